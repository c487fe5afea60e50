// SPDX-License-Identifier: Apache-2.0
// phosphor: command-line front end for preprocessing, rendering, sessions,
// serve mode and analysis.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "phosphor/error.hpp"
#include "phosphor/service.hpp"

using namespace phosphor;

namespace {

struct Overrides {
  std::string config;
  std::string catalog;
  std::string output;
  std::string aux_root;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> strategies;
  std::vector<std::string> clips;
  std::vector<int> grids;
  std::vector<double> rhos;
  std::vector<double> lambdas;
  std::optional<int> percept;
  std::optional<int> max_frames;
  std::optional<double> w_min;
  std::optional<double> decay_rate;
  std::string decay;
  std::string combination;
  bool oracle = false;
  bool pfm = false;
  std::optional<int> subjects;
  std::string pooling;
  std::string fdr_mode;
  std::optional<std::size_t> resamples;
  std::string host;
  std::optional<int> port;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run configuration");
  cmd->add_option("--catalog", o.catalog, "catalog.json path");
  cmd->add_option("--output,-o", o.output, "output root");
  cmd->add_option("--seed", o.seed, "base seed (overrides config and PHOSPHOR_SEED)");
}

RunConfig build_config(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  apply_environment(c);
  if (!o.catalog.empty()) c.catalog = o.catalog;
  if (!o.output.empty()) c.output = o.output;
  if (!o.aux_root.empty()) c.aux_root = o.aux_root;
  if (o.seed) c.seed = *o.seed;
  if (!o.strategies.empty()) {
    c.strategies.clear();
    for (const auto& s : o.strategies) c.strategies.push_back(parse_strategy(s));
  }
  if (!o.clips.empty()) c.clips = o.clips;
  if (!o.grids.empty()) c.grids = o.grids;
  if (!o.rhos.empty() || !o.lambdas.empty()) {
    std::vector<double> rhos = o.rhos, lambdas = o.lambdas;
    if (rhos.empty()) {
      for (const auto& cell : c.cells) {
        if (std::find(rhos.begin(), rhos.end(), cell.rho_um) == rhos.end()) rhos.push_back(cell.rho_um);
      }
    }
    if (lambdas.empty()) {
      for (const auto& cell : c.cells) {
        if (std::find(lambdas.begin(), lambdas.end(), cell.lambda_um) == lambdas.end()) lambdas.push_back(cell.lambda_um);
      }
    }
    c.cells.clear();
    for (double r : rhos) {
      for (double l : lambdas) c.cells.push_back({r, l});
    }
  }
  if (o.percept) c.percept_width = c.percept_height = *o.percept;
  if (o.max_frames) c.max_frames = *o.max_frames;
  if (o.w_min) c.w_min = *o.w_min;
  if (o.decay_rate) c.pipeline.decay_rate = *o.decay_rate;
  if (!o.decay.empty()) c.decay = parse_decay(o.decay);
  if (!o.combination.empty()) c.pipeline.combination = parse_combination_mode(o.combination);
  if (o.oracle) c.oracle = true;
  if (o.pfm) c.write_pfm = true;
  if (o.subjects) c.subjects = *o.subjects;
  if (!o.pooling.empty()) c.pooling = parse_pooling(o.pooling);
  if (!o.fdr_mode.empty()) c.fdr_mode = parse_fdr_mode(o.fdr_mode);
  if (o.resamples) c.n_resamples = *o.resamples;
  if (!o.host.empty()) c.host = o.host;
  if (o.port) c.port = *o.port;
  c.validate();
  return c;
}

void report(const CommandSummary& summary) {
  for (const auto& w : summary.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& p : summary.outputs) std::cout << p.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated prosthetic vision toolkit"};
  app.require_subcommand(1);
  Overrides o;
  double fps = 25.0, duration = 5.0;
  int practice = 2, width = 160, height = 120;

  auto* preprocess = app.add_subcommand("preprocess", "run scene-simplification strategies over a catalog");
  add_common(preprocess, o);
  preprocess->add_option("--aux-root", o.aux_root, "directory holding <clip_id>/ aux maps");
  preprocess->add_option("--strategy", o.strategies, "saliency|depth|segmentation|combination (repeatable)");
  preprocess->add_option("--clip", o.clips, "restrict to clip ids (repeatable)");
  preprocess->add_option("--max-frames", o.max_frames, "frames per clip");
  preprocess->add_option("--decay-rate", o.decay_rate, "depth strategy decay rate");
  preprocess->add_option("--combination", o.combination, "literal|normalized");

  auto* render = app.add_subcommand("render", "render SPV sequences from preprocessed frames");
  add_common(render, o);
  render->add_option("--strategy", o.strategies, "strategies to render (repeatable)");
  render->add_option("--clip", o.clips, "restrict to clip ids (repeatable)");
  render->add_option("--grid", o.grids, "electrode grid sizes (repeatable)");
  render->add_option("--rho", o.rhos, "rho values in um (repeatable)");
  render->add_option("--lambda", o.lambdas, "lambda values in um (repeatable)");
  render->add_option("--percept", o.percept, "percept resolution (square)");
  render->add_option("--max-frames", o.max_frames, "frames per clip");
  render->add_option("--w-min", o.w_min, "sensitivity table cutoff");
  render->add_option("--decay", o.decay, "gaussian|exponential");
  render->add_flag("--oracle", o.oracle, "use the brute-force renderer");
  render->add_flag("--pfm", o.pfm, "also write float PFM frames");

  auto* make_session = app.add_subcommand("make-session", "generate per-subject session plans");
  add_common(make_session, o);
  make_session->add_option("--subjects", o.subjects, "number of subjects");

  auto* serve_cmd = app.add_subcommand("serve", "serve sessions, stimuli and response collection over HTTP");
  add_common(serve_cmd, o);
  serve_cmd->add_option("--host", o.host, "bind address");
  serve_cmd->add_option("--port", o.port, "TCP port");

  auto* analyze = app.add_subcommand("analyze", "compute metrics.json and stats.json from response logs");
  add_common(analyze, o);
  analyze->add_option("--pooling", o.pooling, "per_target_type|per_trial_any");
  analyze->add_option("--fdr-mode", o.fdr_mode, "paper_fdr|false_alarm");
  analyze->add_option("--resamples", o.resamples, "bootstrap resamples");

  auto* synth = app.add_subcommand("synth", "generate a synthetic 16-clip catalog");
  add_common(synth, o);
  synth->add_option("--fps", fps, "frames per second");
  synth->add_option("--duration", duration, "clip duration in seconds");
  synth->add_option("--practice", practice, "number of practice clips");
  synth->add_option("--width", width, "frame width");
  synth->add_option("--height", height, "frame height");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "InvalidArgument"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }

  try {
    const RunConfig config = build_config(o);
    if (preprocess->parsed()) {
      report(cmd_preprocess(config));
    } else if (render->parsed()) {
      report(cmd_render(config));
    } else if (make_session->parsed()) {
      report(cmd_make_session(config));
    } else if (analyze->parsed()) {
      std::string table;
      report(cmd_analyze(config, &table));
      std::cout << table;
    } else if (synth->parsed()) {
      report(cmd_synth(config, fps, duration, practice, SynthOptions{width, height}));
    } else if (serve_cmd->parsed()) {
      ExperimentService service(config);
      serve(service);
    }
  } catch (const std::exception& e) {
    const auto [code, message] = describe_failure(e);
    std::cerr << message << "\n";
    return code;
  }
  return 0;
}
