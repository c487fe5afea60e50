// SPDX-License-Identifier: Apache-2.0
#include "phosphor/serialization.hpp"

#include <string>

#include "phosphor/error.hpp"
#include "phosphor/image.hpp"

namespace phosphor {

namespace {

template <typename T>
void read_optional(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

}  // namespace

std::string_view decay_name(DecayForm form) { return form == DecayForm::Gaussian ? "gaussian" : "exponential"; }

DecayForm parse_decay(std::string_view name) {
  if (name == "gaussian") return DecayForm::Gaussian;
  if (name == "exponential") return DecayForm::Exponential;
  throw Error(ErrorCode::InvalidArgument, "unknown decay form '" + std::string(name) + "'");
}

std::string_view pooling_name(Pooling pooling) {
  return pooling == Pooling::PerTargetType ? "per_target_type" : "per_trial_any";
}

Pooling parse_pooling(std::string_view name) {
  if (name == "per_target_type") return Pooling::PerTargetType;
  if (name == "per_trial_any") return Pooling::PerTrialAny;
  throw Error(ErrorCode::InvalidArgument, "unknown pooling '" + std::string(name) + "'");
}

std::string_view fdr_mode_name(FdrMode mode) { return mode == FdrMode::PaperFDR ? "paper_fdr" : "false_alarm"; }

FdrMode parse_fdr_mode(std::string_view name) {
  if (name == "paper_fdr") return FdrMode::PaperFDR;
  if (name == "false_alarm") return FdrMode::FalseAlarm;
  throw Error(ErrorCode::InvalidArgument, "unknown fdr mode '" + std::string(name) + "'");
}

std::string_view combination_mode_name(CombinationMode mode) {
  return mode == CombinationMode::Literal ? "literal" : "normalized";
}

CombinationMode parse_combination_mode(std::string_view name) {
  if (name == "literal") return CombinationMode::Literal;
  if (name == "normalized") return CombinationMode::Normalized;
  throw Error(ErrorCode::InvalidArgument, "unknown combination mode '" + std::string(name) + "'");
}

void to_json(json& j, const BundleModelConfig& v) {
  j = json{{"model", v.model}, {"r0_um", v.r0_um}, {"c1_deg", v.c1_deg},
           {"c2", v.c2},       {"step_um", v.step_um}, {"lattice_um", v.lattice_um}};
}

void from_json(const json& j, BundleModelConfig& v) {
  read_optional(j, "model", v.model);
  read_optional(j, "r0_um", v.r0_um);
  read_optional(j, "c1_deg", v.c1_deg);
  read_optional(j, "c2", v.c2);
  read_optional(j, "step_um", v.step_um);
  read_optional(j, "lattice_um", v.lattice_um);
}

void to_json(json& j, const AxonMapParams& v) {
  j = json{{"rho_um", v.rho_um}, {"lambda_um", v.lambda_um}, {"decay", decay_name(v.decay)}};
}

void from_json(const json& j, AxonMapParams& v) {
  read_optional(j, "rho_um", v.rho_um);
  read_optional(j, "lambda_um", v.lambda_um);
  if (j.contains("decay")) v.decay = parse_decay(j.at("decay").get<std::string>());
}

void to_json(json& j, const Extent& v) {
  j = json{{"x_min", v.x_min}, {"x_max", v.x_max}, {"y_min", v.y_min}, {"y_max", v.y_max}};
}

void from_json(const json& j, Extent& v) {
  j.at("x_min").get_to(v.x_min);
  j.at("x_max").get_to(v.x_max);
  j.at("y_min").get_to(v.y_min);
  j.at("y_max").get_to(v.y_max);
}

void to_json(json& j, const ElectrodeGrid& v) {
  j = json{{"rows", v.rows}, {"cols", v.cols}, {"pitch_um", v.pitch_um}, {"center", {v.center.x(), v.center.y()}}};
}

void from_json(const json& j, ElectrodeGrid& v) {
  j.at("rows").get_to(v.rows);
  j.at("cols").get_to(v.cols);
  j.at("pitch_um").get_to(v.pitch_um);
  if (j.contains("center")) v.center = {j.at("center").at(0).get<double>(), j.at("center").at(1).get<double>()};
}

void to_json(json& j, const PipelineParams& v) {
  j = json{{"decay_rate", v.decay_rate}, {"combination", combination_mode_name(v.combination)}};
}

void from_json(const json& j, PipelineParams& v) {
  read_optional(j, "decay_rate", v.decay_rate);
  if (j.contains("combination")) v.combination = parse_combination_mode(j.at("combination").get<std::string>());
}

void to_json(json& j, const GroundTruth& v) { j = json{{"has_people", v.has_people}, {"has_cars", v.has_cars}}; }

void from_json(const json& j, GroundTruth& v) {
  j.at("has_people").get_to(v.has_people);
  j.at("has_cars").get_to(v.has_cars);
}

void to_json(json& j, const StimulusClip& v) {
  j = json{{"clip_id", v.clip_id},
           {"dir", v.dir},
           {"fps", v.fps},
           {"duration_s", v.duration_s},
           {"category", category_name(v.category)},
           {"has_people", v.ground_truth.has_people},
           {"has_cars", v.ground_truth.has_cars}};
  if (v.practice) j["practice"] = true;
}

void from_json(const json& j, StimulusClip& v) {
  j.at("clip_id").get_to(v.clip_id);
  j.at("dir").get_to(v.dir);
  j.at("fps").get_to(v.fps);
  j.at("duration_s").get_to(v.duration_s);
  v.category = parse_category(j.at("category").get<std::string>());
  j.at("has_people").get_to(v.ground_truth.has_people);
  j.at("has_cars").get_to(v.ground_truth.has_cars);
  v.practice = j.value("practice", false);
}

void to_json(json& j, const StimulusCatalog& v) { j = json{{"clips", v.clips}}; }

void from_json(const json& j, StimulusCatalog& v) {
  j.at("clips").get_to(v.clips);
  v.balanced = is_balanced(v.clips);
}

void to_json(json& j, const ParamCell& v) { j = json{{"rho_um", v.rho_um}, {"lambda_um", v.lambda_um}}; }

void from_json(const json& j, ParamCell& v) {
  j.at("rho_um").get_to(v.rho_um);
  j.at("lambda_um").get_to(v.lambda_um);
}

void to_json(json& j, const TrialSpec& v) {
  j = json{{"clip_id", v.clip_id}, {"strategy", strategy_name(v.strategy)}, {"grid", v.grid}};
}

void from_json(const json& j, TrialSpec& v) {
  j.at("clip_id").get_to(v.clip_id);
  v.strategy = parse_strategy(j.at("strategy").get<std::string>());
  j.at("grid").get_to(v.grid);
}

void to_json(json& j, const SessionPlan& v) {
  j = json{{"subject_id", v.subject_id},
           {"param_cell", v.param_cell},
           {"trials", v.trials},
           {"practice_trials", v.practice_trials},
           {"rng_seed", v.rng_seed}};
}

void from_json(const json& j, SessionPlan& v) {
  j.at("subject_id").get_to(v.subject_id);
  j.at("param_cell").get_to(v.param_cell);
  j.at("trials").get_to(v.trials);
  j.at("practice_trials").get_to(v.practice_trials);
  j.at("rng_seed").get_to(v.rng_seed);
}

void to_json(json& j, const Response& v) { j = json{{"saw_people", v.saw_people}, {"saw_cars", v.saw_cars}}; }

void from_json(const json& j, Response& v) {
  j.at("saw_people").get_to(v.saw_people);
  j.at("saw_cars").get_to(v.saw_cars);
}

void to_json(json& j, const TrialRecord& v) {
  j = json{{"trial_index", v.trial_index},     {"response", v.response},
           {"confidence", v.confidence},       {"response_time_ms", v.response_time_ms},
           {"ground_truth", v.ground_truth},   {"practice", v.practice}};
}

void from_json(const json& j, TrialRecord& v) {
  j.at("trial_index").get_to(v.trial_index);
  j.at("response").get_to(v.response);
  j.at("confidence").get_to(v.confidence);
  j.at("response_time_ms").get_to(v.response_time_ms);
  j.at("ground_truth").get_to(v.ground_truth);
  v.practice = j.value("practice", false);
}

void to_json(json& j, const DetectionCounts& v) {
  j = json{{"hits", v.hits},
           {"misses", v.misses},
           {"false_discoveries", v.false_discoveries},
           {"correct_rejections", v.correct_rejections},
           {"yes_responses", v.yes_responses},
           {"signal_events", v.signal_events},
           {"noise_events", v.noise_events}};
}

namespace {

json optional_value(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void to_json(json& j, const MetricsReport& v) {
  j = json{{"d_prime", v.d_prime},
           {"hit_rate", v.hit_rate},
           {"fdr", v.fdr},
           {"accuracy", optional_value(v.accuracy)},
           {"precision", optional_value(v.precision)},
           {"recall", optional_value(v.recall)},
           {"f1", optional_value(v.f1)},
           {"n_trials", v.n_trials},
           {"correction_applied", v.correction_applied}};
}

void to_json(json& j, const StatTestResult& v) {
  j = json{{"label", v.label},
           {"observed_diff", v.observed_diff},
           {"boot_p", v.boot_p},
           {"fdr_adjusted_p", v.fdr_adjusted_p},
           {"n_resamples", v.n_resamples},
           {"seed", v.seed},
           {"paired", v.paired}};
}

void from_json(const json& j, StatTestResult& v) {
  j.at("label").get_to(v.label);
  j.at("observed_diff").get_to(v.observed_diff);
  j.at("boot_p").get_to(v.boot_p);
  j.at("fdr_adjusted_p").get_to(v.fdr_adjusted_p);
  j.at("n_resamples").get_to(v.n_resamples);
  j.at("seed").get_to(v.seed);
  v.paired = j.value("paired", false);
}

json read_json(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestParse, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& value) { write_file(path, value.dump(2) + "\n"); }

}  // namespace phosphor
