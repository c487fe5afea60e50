// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "phosphor/dataset.hpp"
#include "phosphor/psychophysics.hpp"
#include "phosphor/renderer.hpp"
#include "phosphor/scene.hpp"
#include "phosphor/serialization.hpp"

namespace phosphor {

inline constexpr int kSchemaVersion = 1;

/// Everything a batch command or the server needs. Loaded from JSON, then
/// overridden by PHOSPHOR_SEED and command-line flags.
struct RunConfig {
  std::filesystem::path catalog;
  /// Optional root holding <clip_id>/ aux maps; defaults to the clip dirs.
  std::filesystem::path aux_root;
  std::filesystem::path output = "phosphor-out";

  std::vector<Strategy> strategies{std::begin(kStrategies), std::end(kStrategies)};
  std::vector<int> grids{std::begin(kGridSizes), std::end(kGridSizes)};
  std::vector<ParamCell> cells = experiment_cells();
  int percept_width = 256;
  int percept_height = 256;
  BundleModelConfig bundles;
  DecayForm decay = DecayForm::Gaussian;
  double w_min = 1e-3;
  PipelineParams pipeline;
  /// Only these clips (all when empty).
  std::vector<std::string> clips;
  /// Process at most this many frames per clip (all when 0).
  int max_frames = 0;
  bool oracle = false;
  bool write_pfm = false;

  std::uint64_t seed = 1;
  int subjects = 9;
  Pooling pooling = Pooling::PerTargetType;
  FdrMode fdr_mode = FdrMode::PaperFDR;
  RateCorrection correction = RateCorrection::LogLinear;
  std::size_t n_resamples = 10000;

  std::string host = "127.0.0.1";
  int port = 8080;

  /// Checks enum-like fields and numeric ranges.
  void validate() const;
  /// Throws Error(InvalidArgument) when the catalog file is missing.
  void require_catalog() const;
};

/// Relative paths in the file are resolved against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const json& j, const std::filesystem::path& base = {});
json to_json(const RunConfig& config);
/// Applies PHOSPHOR_SEED when set.
void apply_environment(RunConfig& config);

/// Directory names used under the output root.
std::filesystem::path preprocess_dir(const RunConfig& config, std::string_view clip_id, Strategy strategy);
std::filesystem::path render_dir(const RunConfig& config, std::string_view clip_id, Strategy strategy, int grid,
                                 const ParamCell& cell);
std::filesystem::path sessions_dir(const RunConfig& config);
std::filesystem::path responses_dir(const RunConfig& config);
std::filesystem::path analysis_dir(const RunConfig& config);

PerceptGrid percept_grid(const RunConfig& config);

struct CommandSummary {
  std::vector<std::filesystem::path> outputs;
  std::vector<std::string> warnings;
};

CommandSummary cmd_preprocess(const RunConfig& config);
CommandSummary cmd_render(const RunConfig& config);
CommandSummary cmd_make_session(const RunConfig& config);
/// Writes metrics.json and stats.json; `table` receives the per-condition
/// accuracy/precision/recall/F1 summary.
CommandSummary cmd_analyze(const RunConfig& config, std::string* table = nullptr);
/// Synthetic 16-clip catalog under config.output (catalog path is set to it).
CommandSummary cmd_synth(const RunConfig& config, double fps, double duration_s, int practice,
                         const SynthOptions& options = {});

struct StoredSession {
  std::string session_id;
  SessionPlan plan;
};

json session_to_json(const StoredSession& session);
StoredSession session_from_json(const json& j);
std::vector<StoredSession> load_sessions(const RunConfig& config);

/// One parsed response-log line.
struct LoggedResponse {
  std::string session_id;
  TrialRecord record;
  TrialSpec trial;
};

/// Reads a JSON-lines log. Malformed lines are skipped and reported in
/// `warnings` (a truncated final line is the expected crash artifact).
std::vector<LoggedResponse> read_response_log(const std::filesystem::path& path, std::vector<std::string>& warnings);

struct HttpResult {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Request handlers behind serve mode, independent of the HTTP transport.
/// GET handlers only read immutable artifacts; post_response serializes
/// appends through one mutex.
class ExperimentService {
 public:
  explicit ExperimentService(RunConfig config);

  HttpResult health() const;
  /// Blinded plan: no clip ids, categories or ground truth.
  HttpResult session(std::string_view session_id) const;
  /// {fps, frame_urls[]} for one trial (practice trials follow the main ones).
  HttpResult stimulus(std::string_view session_id, std::string_view trial) const;
  /// One SPV frame (or original frame for practice) as PNG.
  HttpResult frame(std::string_view session_id, std::string_view trial, std::string_view kind,
                   std::string_view frame_index) const;
  /// 200 accepted, 404 unknown session/trial, 409 duplicate, 422 bad schema.
  HttpResult post_response(std::string_view body);

  const RunConfig& config() const { return config_; }
  std::size_t trial_count(std::string_view session_id) const;

 private:
  struct Session {
    SessionPlan plan;
    std::set<std::size_t> answered;
  };
  const Session* find(std::string_view session_id) const;
  const TrialSpec* trial_spec(const Session& session, std::size_t index) const;
  std::filesystem::path stimulus_dir(const Session& session, const TrialSpec& trial) const;

  RunConfig config_;
  StimulusCatalog catalog_;
  std::map<std::string, Session, std::less<>> sessions_;
  mutable std::mutex log_mutex_;
};

/// HTTP transport for an ExperimentService.
class HttpServer {
 public:
  explicit HttpServer(ExperimentService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds host:port; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called from another thread.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Blocks serving HTTP on config.host:config.port.
void serve(ExperimentService& service);

/// Maps an exception to (exit code, error JSON) for the CLI.
std::pair<int, std::string> describe_failure(const std::exception& error);

}  // namespace phosphor
