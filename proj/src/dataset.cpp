// SPDX-License-Identifier: Apache-2.0
#include "phosphor/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <set>

#include "phosphor/error.hpp"
#include "phosphor/rng.hpp"
#include "phosphor/serialization.hpp"

namespace fs = std::filesystem;

namespace phosphor {

std::string_view category_name(Category category) {
  switch (category) {
    case Category::N: return "N";
    case Category::C: return "C";
    case Category::CP: return "CP";
    case Category::P: return "P";
  }
  return "?";
}

Category parse_category(std::string_view name) {
  for (Category c : kCategories) {
    if (category_name(c) == name) return c;
  }
  throw Error(ErrorCode::ManifestParse, "unknown category '" + std::string(name) + "'");
}

bool category_has_people(Category category) { return category == Category::P || category == Category::CP; }
bool category_has_cars(Category category) { return category == Category::C || category == Category::CP; }

void StimulusClip::validate() const {
  if (clip_id.empty()) throw Error(ErrorCode::ManifestParse, "clip without clip_id");
  if (!(fps > 0.0) || !(duration_s > 0.0)) {
    throw Error(ErrorCode::ManifestParse, "clip " + clip_id + ": fps and duration_s must be positive");
  }
  if (ground_truth.has_people != category_has_people(category) ||
      ground_truth.has_cars != category_has_cars(category)) {
    throw Error(ErrorCode::ManifestParse, "clip " + clip_id + ": category " + std::string(category_name(category)) +
                                              " contradicts has_people/has_cars");
  }
}

std::vector<const StimulusClip*> StimulusCatalog::main_clips() const {
  std::vector<const StimulusClip*> out;
  for (const auto& c : clips) {
    if (!c.practice) out.push_back(&c);
  }
  return out;
}

std::vector<const StimulusClip*> StimulusCatalog::practice_clips() const {
  std::vector<const StimulusClip*> out;
  for (const auto& c : clips) {
    if (c.practice) out.push_back(&c);
  }
  return out;
}

const StimulusClip& StimulusCatalog::find(std::string_view clip_id) const {
  for (const auto& c : clips) {
    if (c.clip_id == clip_id) return c;
  }
  throw Error(ErrorCode::InvalidArgument, "no clip '" + std::string(clip_id) + "' in catalog");
}

fs::path StimulusCatalog::clip_dir(const StimulusClip& clip) const {
  const fs::path dir(clip.dir);
  return dir.is_absolute() ? dir : root / dir;
}

bool is_balanced(const std::vector<StimulusClip>& clips) {
  std::array<int, 4> per{};
  int total = 0;
  for (const auto& c : clips) {
    if (c.practice) continue;
    ++per[static_cast<std::size_t>(c.category)];
    ++total;
  }
  return total == 16 && std::all_of(per.begin(), per.end(), [](int n) { return n == 4; });
}

int count_frames(const fs::path& dir) {
  int n = 0;
  while (fs::exists(dir / numbered_name("frame", n, "ppm")) || fs::exists(dir / numbered_name("frame", n, "pgm"))) ++n;
  return n;
}

StimulusCatalog load_catalog(const fs::path& manifest, const CatalogOptions& options) {
  if (!fs::exists(manifest)) throw Error(ErrorCode::ManifestParse, "manifest not found: " + manifest.string());
  StimulusCatalog catalog;
  try {
    read_json(manifest).get_to(catalog);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestParse, manifest.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Io) throw;
    throw Error(ErrorCode::ManifestParse, manifest.string() + ": " + e.what());
  }
  catalog.root = manifest.parent_path();

  std::set<std::string> ids;
  for (const auto& clip : catalog.clips) {
    clip.validate();
    if (!ids.insert(clip.clip_id).second) throw Error(ErrorCode::ManifestParse, "duplicate clip_id " + clip.clip_id);
  }
  if (options.paper_design) {
    if (!catalog.balanced) {
      throw Error(ErrorCode::CategoryImbalance, "paper design needs 16 main clips, 4 per category");
    }
    for (const auto& clip : catalog.clips) {
      if (clip.duration_s != 5.0) throw Error(ErrorCode::ManifestParse, "clip " + clip.clip_id + " is not 5 s long");
    }
  }
  if (options.check_frames) {
    for (const auto& clip : catalog.clips) {
      const fs::path dir = catalog.clip_dir(clip);
      if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingFrames, "missing frame directory " + dir.string());
      const int found = count_frames(dir);
      if (found != clip.frame_count()) {
        throw Error(ErrorCode::MissingFrames, "clip " + clip.clip_id + ": expected " +
                                                  std::to_string(clip.frame_count()) + " frames, found " +
                                                  std::to_string(found));
      }
    }
  }
  return catalog;
}

void save_catalog(const StimulusCatalog& catalog, const fs::path& manifest) { write_json(manifest, catalog); }

VideoFrame load_frame(const fs::path& dir, int index) {
  VideoFrame frame;
  frame.frame_index = index;
  const fs::path ppm = dir / numbered_name("frame", index, "ppm");
  frame.planes = read_pnm(fs::exists(ppm) ? ppm : dir / numbered_name("frame", index, "pgm"));
  return frame;
}

AuxMaps load_aux(const fs::path& dir, int index) {
  AuxMaps aux;
  if (const fs::path p = dir / numbered_name("saliency", index, "pfm"); fs::exists(p)) {
    aux.saliency = read_pfm(p).cast<double>();
  }
  if (const fs::path p = dir / numbered_name("depth", index, "pfm"); fs::exists(p)) {
    aux.depth = read_pfm(p).cast<double>();
  }
  if (const fs::path p = dir / numbered_name("labels", index, "pgm"); fs::exists(p)) {
    aux.labels = read_pgm(p).cast<int>();
  }
  return aux;
}

namespace {

struct Mover {
  int label = 0;
  int width = 0;
  int height = 0;
  double x = 0.0, y = 0.0;    // top-left
  double vx = 0.0, vy = 0.0;  // pixels per frame
  std::array<double, 3> color{};
  int texture = 0;
};

void bounce(double& pos, double& vel, double lo, double hi) {
  pos += vel;
  for (int guard = 0; guard < 4 && (pos < lo || pos > hi); ++guard) {
    if (pos < lo) {
      pos = 2.0 * lo - pos;
      vel = -vel;
    } else if (pos > hi) {
      pos = 2.0 * hi - pos;
      vel = -vel;
    }
  }
  pos = std::clamp(pos, lo, hi);
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0)); }

}  // namespace

StimulusClip generate_synthetic_clip(Category category, std::uint64_t seed, double fps, double duration_s,
                                     const fs::path& dir, const SynthOptions& options) {
  const int width = options.width, height = options.height;
  if (width < 64 || height < 48) throw Error(ErrorCode::InvalidArgument, "synthetic clips need at least 64x48 pixels");
  if (!(fps > 0.0) || !(duration_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "fps and duration must be positive");

  StimulusClip clip;
  clip.dir = dir.string();
  clip.fps = fps;
  clip.duration_s = duration_s;
  clip.category = category;
  clip.ground_truth = {category_has_people(category), category_has_cars(category)};

  std::mt19937_64 rng(seed);
  const int horizon = static_cast<int>(0.45 * height);
  const double speed = 25.0 / fps;

  // Static background: sky above the horizon, road with sidewalks below.
  ImageI base_labels = ImageI::Zero(height, width);
  ImageD base_depth(height, width);
  std::array<ImageD, 3> base_rgb{ImageD(height, width), ImageD(height, width), ImageD(height, width)};
  const double tint = uniform(rng, -15.0, 15.0);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double grain = uniform(rng, -1.0, 1.0);
      std::array<double, 3> rgb;
      if (r < horizon) {
        const double t = static_cast<double>(r) / horizon;
        rgb = {125 + 6 * t + 0.3 * tint, 130 + 6 * t, 140 + 4 * t};
        base_depth(r, c) = 100.0 + 20.0 * (1.0 - t);
      } else {
        const double u = static_cast<double>(c) / width;
        int id = label::background;
        if (u >= 0.3 && u < 0.7) {
          id = label::road;
          rgb = {122, 122, 126};
        } else if ((u >= 0.15 && u < 0.3) || (u >= 0.7 && u < 0.85)) {
          id = label::sidewalk;
          rgb = {132, 130, 126};
        } else {
          rgb = {118, 132 + 0.3 * tint, 110};
        }
        base_labels(r, c) = id;
        base_depth(r, c) = 20.0 + 80.0 * static_cast<double>(height - 1 - r) / (height - 1 - horizon);
      }
      for (int k = 0; k < 3; ++k) base_rgb[k](r, c) = rgb[k] + grain;
    }
  }

  std::vector<Mover> movers;
  auto spawn = [&](int id) {
    Mover m;
    m.label = id;
    if (id == label::car) {
      m.height = 14 + static_cast<int>(uniform_index(rng, 4));  // 14..17
      m.width = 32 + static_cast<int>(uniform_index(rng, 9));   // 32..40
      m.vx = uniform(rng, 1.5, 3.0) * speed;
      m.vy = 0.0;
    } else {
      m.width = 8 + static_cast<int>(uniform_index(rng, 3));    // 8..10
      m.height = 20 + static_cast<int>(uniform_index(rng, 7));  // 20..26
      m.vx = uniform(rng, 0.4, 1.0) * speed;
      m.vy = uniform(rng, -0.2, 0.2) * speed;
    }
    if (uniform01(rng) < 0.5) m.vx = -m.vx;
    m.x = uniform(rng, 0.0, width - m.width);
    m.y = uniform(rng, horizon - m.height / 2.0, height - m.height);
    // dark or bright so objects stand out against the muted background
    const bool dark = uniform01(rng) < 0.5;
    for (double& ch : m.color) ch = dark ? uniform(rng, 25.0, 55.0) : uniform(rng, 205.0, 230.0);
    m.texture = static_cast<int>(uniform_index(rng, 3)) + 2;
    movers.push_back(m);
  };
  const int cars = category_has_cars(category) ? 1 + static_cast<int>(uniform_index(rng, 2)) : 0;
  const int people = category_has_people(category) ? 1 + static_cast<int>(uniform_index(rng, 2)) : 0;
  for (int i = 0; i < cars; ++i) spawn(label::car);
  for (int i = 0; i < people; ++i) spawn(label::person);

  fs::create_directories(dir);
  const int frames = clip.frame_count();
  for (int f = 0; f < frames; ++f) {
    std::array<ImageD, 3> rgb = base_rgb;
    ImageI labels = base_labels;
    ImageD depth = base_depth;
    for (const Mover& m : movers) {  // cars first, people drawn on top
      const int x0 = static_cast<int>(std::nearbyint(m.x));
      const int y0 = static_cast<int>(std::nearbyint(m.y));
      const int bottom = std::min(height - 1, y0 + m.height - 1);
      const double near = 0.85 * base_depth(bottom, std::clamp(x0, 0, width - 1));
      for (int r = std::max(0, y0); r < std::min(height, y0 + m.height); ++r) {
        for (int c = std::max(0, x0); c < std::min(width, x0 + m.width); ++c) {
          const int lr = r - y0, lc = c - x0;
          double shade;
          if (m.label == label::car) {
            shade = ((lc / m.texture + lr / m.texture) % 2 == 0) ? 25.0 : -25.0;
            if (lr > m.height - 4 && (lc < 6 || lc > m.width - 7)) shade = -m.color[0] + 20.0;  // wheels
          } else {
            shade = lr < m.height / 5 ? 40.0 : (lr < m.height / 2 ? 0.0 : -35.0);
          }
          for (int k = 0; k < 3; ++k) rgb[k](r, c) = m.color[k] + shade;
          labels(r, c) = m.label;
          depth(r, c) = near;
        }
      }
    }

    const ImageU8 red = rgb[0].unaryExpr(&to_u8), green = rgb[1].unaryExpr(&to_u8), blue = rgb[2].unaryExpr(&to_u8);
    write_ppm(dir / numbered_name("frame", f, "ppm"), red, green, blue);
    write_pgm(dir / numbered_name("labels", f, "pgm"), labels.cast<std::uint8_t>());
    write_pfm(dir / numbered_name("depth", f, "pfm"), depth.cast<float>());
    const VideoFrame frame{{red, green, blue}, f};
    write_pfm(dir / numbered_name("saliency", f, "pfm"), fallback_saliency(frame).cast<float>());

    for (Mover& m : movers) {
      bounce(m.x, m.vx, 0.0, width - m.width);
      bounce(m.y, m.vy, horizon - m.height / 2.0, height - m.height);
    }
  }
  return clip;
}

StimulusCatalog generate_synthetic_catalog(const fs::path& root, std::uint64_t seed, double fps, double duration_s,
                                           int practice, const SynthOptions& options) {
  StimulusCatalog catalog;
  catalog.root = root;
  std::uint64_t index = 0;
  for (Category category : kCategories) {
    for (int k = 1; k <= 4; ++k) {
      const std::string id = "synth_" + std::string(category_name(category)) + "_" + std::to_string(k);
      StimulusClip clip = generate_synthetic_clip(category, stream_seed(seed, index++), fps, duration_s,
                                                  root / "clips" / id, options);
      clip.clip_id = id;
      clip.dir = "clips/" + id;
      catalog.clips.push_back(clip);
    }
  }
  for (int k = 1; k <= practice; ++k) {
    const Category category = kCategories[static_cast<std::size_t>(k - 1) % 4];
    const std::string id = "practice_" + std::to_string(k);
    StimulusClip clip = generate_synthetic_clip(category, stream_seed(seed, index++), fps, duration_s,
                                                root / "clips" / id, options);
    clip.clip_id = id;
    clip.dir = "clips/" + id;
    clip.practice = true;
    catalog.clips.push_back(clip);
  }
  catalog.balanced = is_balanced(catalog.clips);
  save_catalog(catalog, root / "catalog.json");
  return catalog;
}

}  // namespace phosphor
