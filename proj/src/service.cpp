// SPDX-License-Identifier: Apache-2.0
#include "phosphor/service.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "phosphor/error.hpp"
#include "phosphor/image.hpp"
#include "phosphor/rng.hpp"

namespace fs = std::filesystem;

namespace phosphor {

// ---------------------------------------------------------------------------
// configuration

void RunConfig::validate() const {
  if (strategies.empty()) throw Error(ErrorCode::InvalidArgument, "no strategies selected");
  for (int g : grids) {
    if (g < 2) throw Error(ErrorCode::InvalidArgument, "grid size must be at least 2");
  }
  if (cells.empty()) throw Error(ErrorCode::InvalidArgument, "no model conditions selected");
  for (const ParamCell& c : cells) AxonMapParams{c.rho_um, c.lambda_um, decay}.validate();
  if (percept_width < 2 || percept_height < 2) throw Error(ErrorCode::InvalidArgument, "percept too small");
  bundles.validate();
  if (!(w_min > 0.0 && w_min <= 0.1)) throw Error(ErrorCode::InvalidArgument, "w_min must lie in (0, 0.1]");
  if (!(pipeline.decay_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "decay_rate must be positive");
  if (max_frames < 0) throw Error(ErrorCode::InvalidArgument, "max_frames must be non-negative");
  if (subjects < 0) throw Error(ErrorCode::InvalidArgument, "subjects must be non-negative");
  if (n_resamples == 0) throw Error(ErrorCode::InvalidArgument, "n_resamples must be positive");
  if (port < 0 || port > 65535) throw Error(ErrorCode::InvalidArgument, "port out of range");
}

void RunConfig::require_catalog() const {
  if (catalog.empty() || !fs::exists(catalog)) {
    throw Error(ErrorCode::InvalidArgument, "catalog not found: " + catalog.string());
  }
}

namespace {

fs::path resolve(const fs::path& base, const std::string& value) {
  const fs::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

std::string_view correction_name(RateCorrection c) { return c == RateCorrection::None ? "none" : "log_linear"; }

RateCorrection parse_correction(std::string_view name) {
  if (name == "none") return RateCorrection::None;
  if (name == "log_linear") return RateCorrection::LogLinear;
  throw Error(ErrorCode::InvalidArgument, "unknown correction '" + std::string(name) + "'");
}

}  // namespace

RunConfig run_config_from_json(const json& j, const fs::path& base) {
  RunConfig c;
  try {
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
    if (j.contains("catalog")) c.catalog = resolve(base, j.at("catalog").get<std::string>());
    if (j.contains("aux_root")) c.aux_root = resolve(base, j.at("aux_root").get<std::string>());
    if (j.contains("output")) c.output = resolve(base, j.at("output").get<std::string>());
    if (j.contains("strategies")) {
      c.strategies.clear();
      for (const auto& s : j.at("strategies")) c.strategies.push_back(parse_strategy(s.get<std::string>()));
    }
    if (j.contains("grids")) j.at("grids").get_to(c.grids);
    if (j.contains("cells")) j.at("cells").get_to(c.cells);
    if (j.contains("percept")) {
      c.percept_width = j.at("percept").value("width", c.percept_width);
      c.percept_height = j.at("percept").value("height", c.percept_height);
    }
    if (j.contains("bundles")) j.at("bundles").get_to(c.bundles);
    if (j.contains("decay")) c.decay = parse_decay(j.at("decay").get<std::string>());
    c.w_min = j.value("w_min", c.w_min);
    if (j.contains("pipeline")) j.at("pipeline").get_to(c.pipeline);
    if (j.contains("clips")) j.at("clips").get_to(c.clips);
    c.max_frames = j.value("max_frames", c.max_frames);
    c.oracle = j.value("oracle", c.oracle);
    c.write_pfm = j.value("write_pfm", c.write_pfm);
    c.seed = j.value("seed", c.seed);
    c.subjects = j.value("subjects", c.subjects);
    if (j.contains("pooling")) c.pooling = parse_pooling(j.at("pooling").get<std::string>());
    if (j.contains("fdr_mode")) c.fdr_mode = parse_fdr_mode(j.at("fdr_mode").get<std::string>());
    if (j.contains("correction")) c.correction = parse_correction(j.at("correction").get<std::string>());
    c.n_resamples = j.value("n_resamples", c.n_resamples);
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::InvalidArgument, "config not found: " + path.string());
  return run_config_from_json(read_json(path), path.parent_path());
}

json to_json(const RunConfig& c) {
  json strategies = json::array();
  for (Strategy s : c.strategies) strategies.push_back(strategy_name(s));
  return json{{"catalog", c.catalog.string()},
              {"aux_root", c.aux_root.string()},
              {"output", c.output.string()},
              {"strategies", strategies},
              {"grids", c.grids},
              {"cells", c.cells},
              {"percept", {{"width", c.percept_width}, {"height", c.percept_height}}},
              {"bundles", c.bundles},
              {"decay", decay_name(c.decay)},
              {"w_min", c.w_min},
              {"pipeline", c.pipeline},
              {"clips", c.clips},
              {"max_frames", c.max_frames},
              {"oracle", c.oracle},
              {"write_pfm", c.write_pfm},
              {"seed", c.seed},
              {"subjects", c.subjects},
              {"pooling", pooling_name(c.pooling)},
              {"fdr_mode", fdr_mode_name(c.fdr_mode)},
              {"correction", correction_name(c.correction)},
              {"n_resamples", c.n_resamples},
              {"host", c.host},
              {"port", c.port}};
}

void apply_environment(RunConfig& config) {
  const char* seed = std::getenv("PHOSPHOR_SEED");
  if (seed == nullptr || *seed == '\0') return;
  std::uint64_t value = 0;
  const char* end = seed + std::char_traits<char>::length(seed);
  const auto [ptr, ec] = std::from_chars(seed, end, value);
  if (ec != std::errc() || ptr != end) throw Error(ErrorCode::InvalidArgument, "PHOSPHOR_SEED is not an integer");
  config.seed = value;
}

// ---------------------------------------------------------------------------
// layout

namespace {

std::string number_token(double v) {
  std::ostringstream out;
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    out << static_cast<long long>(v);
  } else {
    out << std::setprecision(10) << v;
  }
  return out.str();
}

}  // namespace

fs::path preprocess_dir(const RunConfig& config, std::string_view clip_id, Strategy strategy) {
  return config.output / "preprocess" / std::string(clip_id) / std::string(strategy_name(strategy));
}

fs::path render_dir(const RunConfig& config, std::string_view clip_id, Strategy strategy, int grid,
                    const ParamCell& cell) {
  const std::string name =
      "g" + std::to_string(grid) + "_rho" + number_token(cell.rho_um) + "_lambda" + number_token(cell.lambda_um);
  return config.output / "render" / std::string(clip_id) / std::string(strategy_name(strategy)) / name;
}

fs::path sessions_dir(const RunConfig& config) { return config.output / "sessions"; }
fs::path responses_dir(const RunConfig& config) { return config.output / "responses"; }
fs::path analysis_dir(const RunConfig& config) { return config.output / "analysis"; }

PerceptGrid percept_grid(const RunConfig& config) {
  return build_percept_grid(RetinalCoordinateFrame{}, config.percept_width, config.percept_height, Extent{});
}

// ---------------------------------------------------------------------------
// batch commands

namespace {

StimulusCatalog open_catalog(const RunConfig& config, bool check_frames) {
  config.require_catalog();
  CatalogOptions options;
  options.check_frames = check_frames;
  return load_catalog(config.catalog, options);
}

std::vector<const StimulusClip*> selected_clips(const RunConfig& config, const StimulusCatalog& catalog) {
  std::vector<const StimulusClip*> out;
  if (config.clips.empty()) {
    for (const auto& c : catalog.clips) out.push_back(&c);
  } else {
    for (const auto& id : config.clips) out.push_back(&catalog.find(id));
  }
  return out;
}

int frames_to_process(const RunConfig& config, const StimulusClip& clip) {
  const int n = clip.frame_count();
  return config.max_frames > 0 ? std::min(n, config.max_frames) : n;
}

fs::path frame_file(const fs::path& dir, int index) {
  const fs::path ppm = dir / numbered_name("frame", index, "ppm");
  return fs::exists(ppm) ? ppm : dir / numbered_name("frame", index, "pgm");
}

/// Aggregates per-file digests into one order-sensitive hash.
class HashList {
 public:
  void add(const fs::path& file) { text_ += file.filename().string() + ":" + sha256_file(file) + "\n"; }
  void add_bytes(std::string_view name, std::string_view bytes) {
    text_ += std::string(name) + ":" + sha256_hex(bytes) + "\n";
  }
  std::string digest() const { return sha256_hex(text_); }

 private:
  std::string text_;
};

}  // namespace

CommandSummary cmd_preprocess(const RunConfig& config) {
  config.validate();
  const StimulusCatalog catalog = open_catalog(config, true);
  CommandSummary summary;
  for (const StimulusClip* clip : selected_clips(config, catalog)) {
    const fs::path dir = catalog.clip_dir(*clip);
    const fs::path aux_dir = config.aux_root.empty() ? dir : config.aux_root / clip->clip_id;
    const int frames = frames_to_process(config, *clip);
    for (Strategy strategy : config.strategies) {
      const fs::path out = preprocess_dir(config, clip->clip_id, strategy);
      HashList inputs, outputs;
      for (int f = 0; f < frames; ++f) {
        const VideoFrame frame = load_frame(dir, f);
        frame.validate();
        const AuxMaps aux = load_aux(aux_dir, f);
        const GrayFrame gray = apply_strategy(strategy, frame, aux, config.pipeline);
        const fs::path file = out / numbered_name("gray", f, "pgm");
        write_pgm(file, quantize_u8(gray.pixels));
        if (gray.degenerate_depth) {
          summary.warnings.push_back(clip->clip_id + " frame " + std::to_string(f) + ": degenerate depth map");
        }

        inputs.add(frame_file(dir, f));
        for (const char* stem : {"saliency", "depth", "labels"}) {
          const fs::path aux_file = aux_dir / numbered_name(stem, f, std::string_view(stem) == "labels" ? "pgm" : "pfm");
          if (fs::exists(aux_file)) inputs.add(aux_file);
        }
        outputs.add(file);
      }
      json sidecar{{"schema_version", kSchemaVersion},
                   {"clip_id", clip->clip_id},
                   {"strategy", strategy_name(strategy)},
                   {"params",
                    {{"decay_rate", config.pipeline.decay_rate},
                     {"depth_cut_percentile", 80.0},
                     {"saliency_top_percent", 10.0},
                     {"combination", combination_mode_name(config.pipeline.combination)},
                     {"gray", "rec601"}}},
                   {"frames", frames},
                   {"source_dir", clip->dir},
                   {"input_hash", inputs.digest()},
                   {"output_hash", outputs.digest()}};
      write_json(out / "pipeline.json", sidecar);
      summary.outputs.push_back(out);
    }
  }
  return summary;
}

CommandSummary cmd_render(const RunConfig& config) {
  config.validate();
  const StimulusCatalog catalog = open_catalog(config, false);
  const PerceptGrid percept = percept_grid(config);
  std::map<double, SensitivityTable> tables;
  auto table_for = [&](double lambda) -> const SensitivityTable& {
    auto it = tables.find(lambda);
    if (it == tables.end()) {
      it = tables.emplace(lambda, build_sensitivity_table(percept, AxonMapParams{100.0, lambda, config.decay},
                                                          config.bundles, config.w_min))
               .first;
    }
    return it->second;
  };

  CommandSummary summary;
  for (const StimulusClip* clip : selected_clips(config, catalog)) {
    for (Strategy strategy : config.strategies) {
      const fs::path in = preprocess_dir(config, clip->clip_id, strategy);
      std::vector<ImageD> grays;
      HashList inputs;
      for (int f = 0;; ++f) {
        if (config.max_frames > 0 && f >= config.max_frames) break;
        const fs::path file = in / numbered_name("gray", f, "pgm");
        if (!fs::exists(file)) break;
        grays.push_back(read_pgm(file).cast<double>());
        inputs.add(file);
      }
      if (grays.empty()) {
        throw Error(ErrorCode::MissingFrames, "no preprocessed frames in " + in.string() + "; run preprocess first");
      }
      const std::string input_hash = inputs.digest();

      for (int size : config.grids) {
        const ElectrodeGrid grid = ElectrodeGrid::square(size);
        if (!grid.standard_size()) {
          summary.warnings.push_back("grid " + std::to_string(size) + " is not one of 8, 16, 32");
        }
        std::vector<AmplitudeFrame> amps;
        for (std::size_t f = 0; f < grays.size(); ++f) {
          amps.push_back(encode_amplitudes(grays[f], grid, static_cast<int>(f)));
        }
        for (const ParamCell& cell : config.cells) {
          const AxonMapParams params{cell.rho_um, cell.lambda_um, config.decay};
          std::vector<PerceptFrame> frames;
          if (config.oracle) {
            for (const auto& a : amps) frames.push_back(render_oracle(a, grid, params, percept, config.bundles));
          } else {
            const FastRenderer renderer(table_for(cell.lambda_um), grid, params);
            frames = render_video(amps, renderer);
          }
          const fs::path out = render_dir(config, clip->clip_id, strategy, size, cell);
          HashList outputs;
          for (const PerceptFrame& pf : frames) {
            const fs::path file = out / numbered_name("frame", pf.frame_index, "pgm");
            write_pgm(file, quantize_u8(pf.brightness, 255.0));
            outputs.add(file);
            if (config.write_pfm) {
              write_pfm(out / numbered_name("frame", pf.frame_index, "pfm"), pf.brightness.cast<float>());
            }
          }
          json setup{{"clip_id", clip->clip_id},
                     {"strategy", strategy_name(strategy)},
                     {"grid", grid},
                     {"params", params},
                     {"bundles", config.bundles},
                     {"percept",
                      {{"width", percept.width}, {"height", percept.height}, {"extent", percept.extent}}},
                     {"w_min", config.w_min},
                     {"renderer", config.oracle ? "oracle" : "fast"}};
          HashList config_hash;
          config_hash.add_bytes("setup", setup.dump());
          config_hash.add_bytes("input", input_hash);
          json sidecar = setup;
          sidecar["schema_version"] = kSchemaVersion;
          sidecar["fps"] = clip->fps;
          sidecar["frames"] = frames.size();
          sidecar["input_hash"] = input_hash;
          sidecar["config_hash"] = config_hash.digest();
          sidecar["output_hash"] = outputs.digest();
          write_json(out / "render.json", sidecar);
          summary.outputs.push_back(out);
        }
      }
    }
  }
  return summary;
}

json session_to_json(const StoredSession& session) {
  return json{{"schema_version", kSchemaVersion}, {"session_id", session.session_id}, {"plan", session.plan}};
}

StoredSession session_from_json(const json& j) {
  StoredSession s;
  j.at("session_id").get_to(s.session_id);
  j.at("plan").get_to(s.plan);
  return s;
}

CommandSummary cmd_make_session(const RunConfig& config) {
  config.validate();
  const StimulusCatalog catalog = open_catalog(config, false);
  CommandSummary summary;
  if (catalog.practice_clips().empty()) summary.warnings.push_back("catalog has no practice clips; no practice trials");
  for (int k = 0; k < config.subjects; ++k) {
    char id[32];
    std::snprintf(id, sizeof id, "s%03d", k + 1);
    StoredSession session;
    session.session_id = id;
    // round-robin over the configured conditions (all nine by default)
    const ParamCell& cell = config.cells[static_cast<std::size_t>(k) % config.cells.size()];
    session.plan = make_session(id, catalog, cell,
                                stream_seed(config.seed, static_cast<std::uint64_t>(k)));
    const fs::path file = sessions_dir(config) / (session.session_id + ".json");
    write_json(file, session_to_json(session));
    summary.outputs.push_back(file);
  }
  return summary;
}

std::vector<StoredSession> load_sessions(const RunConfig& config) {
  std::vector<StoredSession> out;
  const fs::path dir = sessions_dir(config);
  if (!fs::is_directory(dir)) return out;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      out.push_back(session_from_json(read_json(f)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ManifestParse, f.string() + ": " + e.what());
    }
  }
  return out;
}

std::vector<LoggedResponse> read_response_log(const fs::path& path, std::vector<std::string>& warnings) {
  std::vector<LoggedResponse> out;
  if (!fs::exists(path)) return out;
  const std::string text = read_file(path);
  std::size_t start = 0, line_no = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    const bool terminated = end != std::string::npos;
    if (!terminated) end = text.size();
    const std::string_view line(text.data() + start, end - start);
    ++line_no;
    start = end + 1;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      LoggedResponse r;
      j.at("session_id").get_to(r.session_id);
      from_json(j, r.record);
      r.trial.clip_id = j.value("clip_id", std::string());
      if (j.contains("strategy")) r.trial.strategy = parse_strategy(j.at("strategy").get<std::string>());
      r.trial.grid = j.value("grid", 0);
      out.push_back(std::move(r));
    } catch (const std::exception&) {
      const bool final_line = !terminated || text.find_first_not_of('\n', start) == std::string::npos;
      warnings.push_back(path.filename().string() + ": skipped " +
                         (final_line ? std::string("truncated final line ") : std::string("malformed line ")) +
                         std::to_string(line_no));
    }
  }
  return out;
}

namespace {

std::optional<MetricsReport> try_evaluate(const std::vector<TrialRecord>& records, const RunConfig& config) {
  if (records.empty()) return std::nullopt;
  try {
    return evaluate(records, config.pooling, config.correction, config.fdr_mode);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UndefinedRate) return std::nullopt;
    throw;
  }
}

json metrics_json(const std::optional<MetricsReport>& m) { return m ? json(*m) : json(nullptr); }

struct SubjectResult {
  StoredSession session;
  std::size_t answered = 0;
  std::optional<MetricsReport> overall;
  std::map<Strategy, std::optional<MetricsReport>> by_strategy;
  std::map<int, std::optional<MetricsReport>> by_grid;
  std::map<std::pair<Strategy, int>, std::optional<MetricsReport>> cells;
};

std::string fixed(double v, int digits = 3) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

}  // namespace

CommandSummary cmd_analyze(const RunConfig& config, std::string* table) {
  config.validate();
  CommandSummary summary;
  const std::vector<StoredSession> sessions = load_sessions(config);
  if (sessions.empty()) throw Error(ErrorCode::InvalidArgument, "no sessions under " + sessions_dir(config).string());

  std::vector<SubjectResult> subjects;
  for (const StoredSession& session : sessions) {
    SubjectResult result{session, 0, std::nullopt, {}, {}, {}};
    const auto logged = read_response_log(responses_dir(config) / (session.session_id + ".jsonl"), summary.warnings);
    std::set<std::size_t> seen;
    std::vector<TrialRecord> all;
    std::map<Strategy, std::vector<TrialRecord>> by_strategy;
    std::map<int, std::vector<TrialRecord>> by_grid;
    std::map<std::pair<Strategy, int>, std::vector<TrialRecord>> cells;
    for (const LoggedResponse& r : logged) {
      if (r.session_id != session.session_id || r.record.practice) continue;
      if (r.record.trial_index >= session.plan.trials.size()) continue;
      if (!seen.insert(r.record.trial_index).second) continue;
      const TrialSpec& spec = session.plan.trials[r.record.trial_index];
      all.push_back(r.record);
      by_strategy[spec.strategy].push_back(r.record);
      by_grid[spec.grid].push_back(r.record);
      cells[{spec.strategy, spec.grid}].push_back(r.record);
    }
    result.answered = all.size();
    if (result.answered < session.plan.trials.size()) {
      summary.warnings.push_back("IncompleteSession: " + session.session_id + " has " +
                                 std::to_string(result.answered) + " of " +
                                 std::to_string(session.plan.trials.size()) + " trials");
    }
    result.overall = try_evaluate(all, config);
    for (Strategy s : kStrategies) result.by_strategy[s] = try_evaluate(by_strategy[s], config);
    for (int g : kGridSizes) result.by_grid[g] = try_evaluate(by_grid[g], config);
    for (Strategy s : kStrategies) {
      for (int g : kGridSizes) result.cells[{s, g}] = try_evaluate(cells[{s, g}], config);
    }
    subjects.push_back(std::move(result));
  }

  json subject_list = json::array();
  for (const SubjectResult& r : subjects) {
    json by_strategy = json::object(), by_grid = json::object(), cell_list = json::array();
    for (const auto& [s, m] : r.by_strategy) by_strategy[std::string(strategy_name(s))] = metrics_json(m);
    for (const auto& [g, m] : r.by_grid) by_grid[std::to_string(g)] = metrics_json(m);
    for (const auto& [key, m] : r.cells) {
      cell_list.push_back({{"strategy", strategy_name(key.first)}, {"grid", key.second}, {"metrics", metrics_json(m)}});
    }
    const double coverage =
        r.session.plan.trials.empty() ? 0.0 : static_cast<double>(r.answered) / r.session.plan.trials.size();
    subject_list.push_back({{"session_id", r.session.session_id},
                            {"subject_id", r.session.plan.subject_id},
                            {"param_cell", r.session.plan.param_cell},
                            {"answered", r.answered},
                            {"coverage", coverage},
                            {"overall", metrics_json(r.overall)},
                            {"by_strategy", by_strategy},
                            {"by_grid", by_grid},
                            {"cells", cell_list}});
  }

  // Comparisons: strategies and grids within subjects, rho and lambda between.
  std::vector<StatTestResult> stats;
  std::uint64_t index = 0;
  auto paired = [&](const std::string& label, auto pick_a, auto pick_b) {
    std::vector<double> a, b;
    for (const SubjectResult& r : subjects) {
      const auto& ma = pick_a(r);
      const auto& mb = pick_b(r);
      if (ma && mb) {
        a.push_back(ma->d_prime);
        b.push_back(mb->d_prime);
      }
    }
    const std::uint64_t seed = stream_seed(config.seed, index++);
    if (a.empty()) {
      summary.warnings.push_back("comparison " + label + " skipped: no subjects with both conditions");
      return;
    }
    stats.push_back(bootstrap_diff(a, b, config.n_resamples, seed, true, label));
  };
  for (std::size_t i = 0; i < std::size(kStrategies); ++i) {
    for (std::size_t k = i + 1; k < std::size(kStrategies); ++k) {
      const Strategy si = kStrategies[i], sk = kStrategies[k];
      paired("strategy:" + std::string(strategy_name(si)) + "-" + std::string(strategy_name(sk)),
             [&](const SubjectResult& r) -> const auto& { return r.by_strategy.at(si); },
             [&](const SubjectResult& r) -> const auto& { return r.by_strategy.at(sk); });
    }
  }
  for (std::size_t i = 0; i < std::size(kGridSizes); ++i) {
    for (std::size_t k = i + 1; k < std::size(kGridSizes); ++k) {
      const int gi = kGridSizes[i], gk = kGridSizes[k];
      paired("grid:" + std::to_string(gi) + "-" + std::to_string(gk),
             [&](const SubjectResult& r) -> const auto& { return r.by_grid.at(gi); },
             [&](const SubjectResult& r) -> const auto& { return r.by_grid.at(gk); });
    }
  }
  auto unpaired = [&](const std::string& name, auto value_of) {
    std::vector<double> levels;
    for (const SubjectResult& r : subjects) {
      const double v = value_of(r.session.plan.param_cell);
      if (std::find(levels.begin(), levels.end(), v) == levels.end()) levels.push_back(v);
    }
    std::sort(levels.begin(), levels.end());
    for (std::size_t i = 0; i < levels.size(); ++i) {
      for (std::size_t k = i + 1; k < levels.size(); ++k) {
        std::vector<double> a, b;
        for (const SubjectResult& r : subjects) {
          if (!r.overall) continue;
          const double v = value_of(r.session.plan.param_cell);
          if (v == levels[i]) a.push_back(r.overall->d_prime);
          if (v == levels[k]) b.push_back(r.overall->d_prime);
        }
        const std::string label = name + ":" + number_token(levels[i]) + "-" + number_token(levels[k]);
        const std::uint64_t seed = stream_seed(config.seed, index++);
        if (a.empty() || b.empty()) {
          summary.warnings.push_back("comparison " + label + " skipped: empty group");
          continue;
        }
        stats.push_back(bootstrap_diff(a, b, config.n_resamples, seed, false, label));
      }
    }
  };
  unpaired("rho", [](const ParamCell& c) { return c.rho_um; });
  unpaired("lambda", [](const ParamCell& c) { return c.lambda_um; });
  fdr_adjust(stats);

  const json options{{"pooling", pooling_name(config.pooling)},
                     {"fdr_mode", fdr_mode_name(config.fdr_mode)},
                     {"correction", correction_name(config.correction)}};
  const fs::path out = analysis_dir(config);
  write_json(out / "metrics.json", json{{"schema_version", kSchemaVersion},
                                        {"options", options},
                                        {"subjects", subject_list},
                                        {"warnings", summary.warnings}});
  write_json(out / "stats.json", json{{"schema_version", kSchemaVersion},
                                      {"n_resamples", config.n_resamples},
                                      {"comparisons", stats}});
  summary.outputs = {out / "metrics.json", out / "stats.json"};

  if (table != nullptr) {
    std::ostringstream t;
    t << std::left << std::setw(22) << "condition" << std::setw(10) << "d'" << std::setw(10) << "accuracy"
      << std::setw(10) << "precision" << std::setw(10) << "recall" << std::setw(10) << "F1" << "n\n";
    for (Strategy s : kStrategies) {
      for (int g : kGridSizes) {
        double sums[5] = {0, 0, 0, 0, 0};
        int counts[5] = {0, 0, 0, 0, 0};
        for (const SubjectResult& r : subjects) {
          const auto& m = r.cells.at({s, g});
          if (!m) continue;
          const std::optional<double> values[5] = {m->d_prime, m->accuracy, m->precision, m->recall, m->f1};
          for (int k = 0; k < 5; ++k) {
            if (values[k]) {
              sums[k] += *values[k];
              ++counts[k];
            }
          }
        }
        t << std::setw(22) << (std::string(strategy_name(s)) + " " + std::to_string(g) + "x" + std::to_string(g));
        for (int k = 0; k < 5; ++k) t << std::setw(10) << (counts[k] ? fixed(sums[k] / counts[k]) : "-");
        t << counts[0] << "\n";
      }
    }
    *table = t.str();
  }
  return summary;
}

CommandSummary cmd_synth(const RunConfig& config, double fps, double duration_s, int practice,
                         const SynthOptions& options) {
  generate_synthetic_catalog(config.output, config.seed, fps, duration_s, practice, options);
  CommandSummary summary;
  summary.outputs.push_back(config.output / "catalog.json");
  return summary;
}

// ---------------------------------------------------------------------------
// serve-mode handlers

namespace {

HttpResult json_result(int status, const json& body) { return {status, "application/json", body.dump()}; }

HttpResult error_result(int status, std::string_view error, std::string_view message) {
  return json_result(status, json{{"error", error}, {"message", message}});
}

std::optional<std::size_t> parse_index(std::string_view text) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

/// Returns an error message for the first schema violation.
std::optional<std::string> check_envelope(const json& j) {
  if (!j.is_object()) return "envelope must be an object";
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
      j["schema_version"].get<int>() != kSchemaVersion) {
    return "schema_version must be 1";
  }
  if (!j.contains("session_id") || !j["session_id"].is_string()) return "session_id must be a string";
  if (!j.contains("trial_index") || !j["trial_index"].is_number_unsigned()) {
    return "trial_index must be a non-negative integer";
  }
  if (!j.contains("client_timestamp") || !(j["client_timestamp"].is_string() || j["client_timestamp"].is_number())) {
    return "client_timestamp must be a string or number";
  }
  if (!j.contains("payload") || !j["payload"].is_object()) return "payload must be an object";
  const json& p = j["payload"];
  if (!p.contains("response") || !p["response"].is_object()) return "payload.response must be an object";
  for (const char* key : {"saw_people", "saw_cars"}) {
    if (!p["response"].contains(key) || !p["response"][key].is_boolean()) {
      return std::string("payload.response.") + key + " must be a boolean";
    }
  }
  if (!p.contains("confidence") || !p["confidence"].is_number_integer()) return "payload.confidence must be an integer";
  const auto confidence = p["confidence"].get<long long>();
  if (confidence < 1 || confidence > 5) return "payload.confidence must be 1..5";
  if (!p.contains("response_time_ms") || !p["response_time_ms"].is_number() ||
      p["response_time_ms"].get<double>() < 0.0) {
    return "payload.response_time_ms must be a non-negative number";
  }
  if (p.contains("practice") && !p["practice"].is_boolean()) return "payload.practice must be a boolean";
  if (p.contains("trial_index") && p["trial_index"] != j["trial_index"]) return "payload.trial_index disagrees";
  return std::nullopt;
}

}  // namespace

ExperimentService::ExperimentService(RunConfig config) : config_(std::move(config)) {
  config_.validate();
  config_.require_catalog();
  CatalogOptions options;
  options.check_frames = false;
  catalog_ = load_catalog(config_.catalog, options);
  for (StoredSession& s : load_sessions(config_)) {
    Session session{std::move(s.plan), {}};
    const fs::path log = responses_dir(config_) / (s.session_id + ".jsonl");
    std::vector<std::string> warnings;
    for (const LoggedResponse& r : read_response_log(log, warnings)) session.answered.insert(r.record.trial_index);
    // A crash can leave a partial last line; start the next record on a
    // fresh line.
    if (fs::exists(log)) {
      const std::string text = read_file(log);
      if (!text.empty() && text.back() != '\n') {
        std::ofstream(log, std::ios::app | std::ios::binary) << '\n';
      }
    }
    sessions_.emplace(s.session_id, std::move(session));
  }
}

const ExperimentService::Session* ExperimentService::find(std::string_view session_id) const {
  const auto it = sessions_.find(session_id);
  return it == sessions_.end() ? nullptr : &it->second;
}

std::size_t ExperimentService::trial_count(std::string_view session_id) const {
  const Session* s = find(session_id);
  return s ? s->plan.trials.size() + s->plan.practice_trials.size() : 0;
}

const TrialSpec* ExperimentService::trial_spec(const Session& session, std::size_t index) const {
  if (index < session.plan.trials.size()) return &session.plan.trials[index];
  index -= session.plan.trials.size();
  if (index < session.plan.practice_trials.size()) return &session.plan.practice_trials[index];
  return nullptr;
}

fs::path ExperimentService::stimulus_dir(const Session& session, const TrialSpec& trial) const {
  return render_dir(config_, trial.clip_id, trial.strategy, trial.grid, session.plan.param_cell);
}

HttpResult ExperimentService::health() const {
  return json_result(200, json{{"status", "ok"}, {"schema_version", kSchemaVersion}, {"sessions", sessions_.size()}});
}

HttpResult ExperimentService::session(std::string_view session_id) const {
  const Session* s = find(session_id);
  if (s == nullptr) return error_result(404, "UnknownSession", "no session " + std::string(session_id));
  json trials = json::array(), practice = json::array();
  const std::size_t main = s->plan.trials.size();
  for (std::size_t i = 0; i < main; ++i) {
    trials.push_back({{"trial_index", i}, {"strategy", strategy_name(s->plan.trials[i].strategy)},
                      {"grid", s->plan.trials[i].grid}});
  }
  for (std::size_t i = 0; i < s->plan.practice_trials.size(); ++i) {
    practice.push_back({{"trial_index", main + i},
                        {"strategy", strategy_name(s->plan.practice_trials[i].strategy)},
                        {"grid", s->plan.practice_trials[i].grid}});
  }
  json answered = json::array();
  {
    std::lock_guard lock(log_mutex_);
    for (std::size_t i : s->answered) answered.push_back(i);
  }
  return json_result(200, json{{"schema_version", kSchemaVersion},
                               {"session_id", session_id},
                               {"param_cell", s->plan.param_cell},
                               {"trials", trials},
                               {"practice_trials", practice},
                               {"answered", answered}});
}

HttpResult ExperimentService::stimulus(std::string_view session_id, std::string_view trial) const {
  const Session* s = find(session_id);
  if (s == nullptr) return error_result(404, "UnknownSession", "no session " + std::string(session_id));
  const auto index = parse_index(trial);
  const TrialSpec* spec = index ? trial_spec(*s, *index) : nullptr;
  if (spec == nullptr) return error_result(404, "UnknownTrial", "no trial " + std::string(trial));
  const fs::path dir = stimulus_dir(*s, *spec);
  const bool practice = *index >= s->plan.trials.size();
  int frames = 0;
  while (fs::exists(dir / numbered_name("frame", frames, "pgm"))) ++frames;
  if (frames == 0) return error_result(404, "StimulusNotRendered", "stimulus for trial " + std::string(trial) + " is missing");

  const std::string base = "/api/stimulus/" + std::string(session_id) + "/" + std::to_string(*index);
  json urls = json::array(), originals = json::array();
  for (int f = 0; f < frames; ++f) {
    urls.push_back(base + "/spv/" + std::to_string(f) + ".png");
    if (practice) originals.push_back(base + "/original/" + std::to_string(f) + ".png");
  }
  double fps = 25.0;
  try {
    fps = catalog_.find(spec->clip_id).fps;
  } catch (const Error&) {
  }
  json manifest{{"schema_version", kSchemaVersion}, {"session_id", session_id}, {"trial_index", *index},
                {"practice", practice},             {"fps", fps},               {"frame_urls", urls}};
  if (practice) manifest["original_frame_urls"] = originals;
  return json_result(200, manifest);
}

HttpResult ExperimentService::frame(std::string_view session_id, std::string_view trial, std::string_view kind,
                                    std::string_view frame_index) const {
  const Session* s = find(session_id);
  if (s == nullptr) return error_result(404, "UnknownSession", "no session " + std::string(session_id));
  const auto index = parse_index(trial);
  const TrialSpec* spec = index ? trial_spec(*s, *index) : nullptr;
  if (spec == nullptr) return error_result(404, "UnknownTrial", "no trial " + std::string(trial));
  const auto f = parse_index(frame_index);
  if (!f) return error_result(404, "UnknownFrame", "bad frame index");
  const int fi = static_cast<int>(*f);

  ImageU8 image;
  if (kind == "spv") {
    const fs::path file = stimulus_dir(*s, *spec) / numbered_name("frame", fi, "pgm");
    if (!fs::exists(file)) return error_result(404, "UnknownFrame", "no frame " + std::to_string(fi));
    image = read_pgm(file);
  } else if (kind == "original" && *index >= s->plan.trials.size()) {
    const StimulusClip& clip = catalog_.find(spec->clip_id);
    const fs::path dir = catalog_.clip_dir(clip);
    if (fi >= clip.frame_count() || !fs::exists(frame_file(dir, fi))) {
      return error_result(404, "UnknownFrame", "no frame " + std::to_string(fi));
    }
    image = quantize_u8(load_frame(dir, fi).gray());
  } else {
    return error_result(404, "UnknownFrame", "unknown frame kind");
  }
  return {200, "image/png", encode_png(image)};
}

HttpResult ExperimentService::post_response(std::string_view body) {
  json envelope;
  try {
    envelope = json::parse(body);
  } catch (const json::exception& e) {
    return error_result(422, "SchemaViolation", std::string("invalid JSON: ") + e.what());
  }
  if (auto problem = check_envelope(envelope)) return error_result(422, "SchemaViolation", *problem);

  const std::string session_id = envelope["session_id"].get<std::string>();
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return error_result(404, "UnknownSession", "no session " + session_id);
  Session& s = it->second;
  const auto index = envelope["trial_index"].get<std::size_t>();
  const TrialSpec* spec = trial_spec(s, index);
  if (spec == nullptr) return error_result(404, "UnknownTrial", "no trial " + std::to_string(index));
  const bool practice = index >= s.plan.trials.size();
  const json& payload = envelope["payload"];
  if (payload.value("practice", practice) != practice) {
    return error_result(422, "SchemaViolation", "payload.practice does not match the trial");
  }

  TrialRecord record;
  record.trial_index = index;
  payload["response"].get_to(record.response);
  record.confidence = payload["confidence"].get<int>();
  record.response_time_ms = payload["response_time_ms"].get<double>();
  record.practice = practice;
  const StimulusClip& clip = catalog_.find(spec->clip_id);
  record.ground_truth = clip.ground_truth;

  json line = record;
  line["schema_version"] = kSchemaVersion;
  line["session_id"] = session_id;
  line["client_timestamp"] = envelope["client_timestamp"];
  line["clip_id"] = spec->clip_id;
  line["strategy"] = strategy_name(spec->strategy);
  line["grid"] = spec->grid;

  std::lock_guard lock(log_mutex_);
  if (s.answered.count(index) != 0) {
    return error_result(409, "DuplicateResponse", "trial " + std::to_string(index) + " already answered");
  }
  const fs::path log = responses_dir(config_) / (session_id + ".jsonl");
  fs::create_directories(log.parent_path());
  {
    std::ofstream out(log, std::ios::app | std::ios::binary);
    out << line.dump() << '\n';
    out.flush();
    if (!out) return error_result(500, "Io", "cannot append to response log");
  }
  s.answered.insert(index);
  return json_result(200, json{{"status", "accepted"}, {"session_id", session_id}, {"trial_index", index}});
}

std::pair<int, std::string> describe_failure(const std::exception& error) {
  if (const auto* e = dynamic_cast<const Error*>(&error)) {
    const int code = e->code() == ErrorCode::Internal ? 2 : 1;
    return {code, json{{"error", e->name()}, {"message", e->what()}}.dump()};
  }
  if (dynamic_cast<const json::exception*>(&error) != nullptr) {
    return {1, json{{"error", "ManifestParse"}, {"message", error.what()}}.dump()};
  }
  return {2, json{{"error", "Internal"}, {"message", error.what()}}.dump()};
}

}  // namespace phosphor
