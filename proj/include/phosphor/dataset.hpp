// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "phosphor/scene.hpp"

namespace phosphor {

/// N: no targets, C: cars, P: people, CP: both.
enum class Category { N, C, CP, P };

inline constexpr Category kCategories[] = {Category::N, Category::C, Category::CP, Category::P};

std::string_view category_name(Category category);
Category parse_category(std::string_view name);
bool category_has_people(Category category);
bool category_has_cars(Category category);

struct GroundTruth {
  bool has_people = false;
  bool has_cars = false;

  bool operator==(const GroundTruth&) const = default;
};

struct StimulusClip {
  std::string clip_id;
  /// Frame directory as written in the manifest (relative to it unless absolute).
  std::string dir;
  double fps = 25.0;
  double duration_s = 5.0;
  Category category = Category::N;
  GroundTruth ground_truth;
  /// Practice clips are shown before the main block and never in it.
  bool practice = false;

  int frame_count() const { return static_cast<int>(std::lround(fps * duration_s)); }
  /// Throws Error(ManifestParse) when category and ground truth disagree.
  void validate() const;
  bool operator==(const StimulusClip&) const = default;
};

struct StimulusCatalog {
  std::vector<StimulusClip> clips;
  /// True when the main (non-practice) clips are exactly 16, four per category.
  bool balanced = false;
  /// Directory the clip dirs are resolved against; not serialized.
  std::filesystem::path root;

  std::vector<const StimulusClip*> main_clips() const;
  std::vector<const StimulusClip*> practice_clips() const;
  const StimulusClip& find(std::string_view clip_id) const;
  std::filesystem::path clip_dir(const StimulusClip& clip) const;

  bool operator==(const StimulusCatalog& other) const {
    return clips == other.clips && balanced == other.balanced;
  }
};

bool is_balanced(const std::vector<StimulusClip>& clips);

struct CatalogOptions {
  /// Require the 16-clip, 4-per-category design.
  bool paper_design = false;
  /// Check that each clip directory holds fps * duration frames.
  bool check_frames = true;
};

/// Throws Error(ManifestParse), Error(CategoryImbalance) or Error(MissingFrames).
StimulusCatalog load_catalog(const std::filesystem::path& manifest, const CatalogOptions& options = {});
void save_catalog(const StimulusCatalog& catalog, const std::filesystem::path& manifest);

/// Counts frame_NNNNN.ppm / .pgm files numbered contiguously from 0.
int count_frames(const std::filesystem::path& dir);

VideoFrame load_frame(const std::filesystem::path& dir, int index);

/// Loads whichever of saliency/depth/labels exist for frame `index`.
AuxMaps load_aux(const std::filesystem::path& dir, int index);

struct SynthOptions {
  int width = 160;
  int height = 120;
};

/// Renders a deterministic synthetic clip into `dir`: frames, label maps,
/// depth maps and fallback saliency. The returned clip's dir is `dir` as given.
StimulusClip generate_synthetic_clip(Category category, std::uint64_t seed, double fps, double duration_s,
                                     const std::filesystem::path& dir, const SynthOptions& options = {});

/// Writes a balanced 16-clip catalog (plus `practice` practice clips) under
/// `root`, with manifest root/catalog.json.
StimulusCatalog generate_synthetic_catalog(const std::filesystem::path& root, std::uint64_t seed, double fps,
                                           double duration_s, int practice = 2, const SynthOptions& options = {});

}  // namespace phosphor
