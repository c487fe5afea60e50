// SPDX-License-Identifier: Apache-2.0
#pragma once

// JSON mappings for the configuration and record types. Field names follow
// the on-disk schemas (catalog.json, session files, response logs,
// metrics.json, stats.json).

#include <filesystem>

#include <json.hpp>

#include "phosphor/dataset.hpp"
#include "phosphor/psychophysics.hpp"
#include "phosphor/renderer.hpp"
#include "phosphor/retina.hpp"
#include "phosphor/scene.hpp"

namespace phosphor {

using nlohmann::json;

void to_json(json& j, const BundleModelConfig& v);
void from_json(const json& j, BundleModelConfig& v);
void to_json(json& j, const AxonMapParams& v);
void from_json(const json& j, AxonMapParams& v);
void to_json(json& j, const Extent& v);
void from_json(const json& j, Extent& v);
void to_json(json& j, const ElectrodeGrid& v);
void from_json(const json& j, ElectrodeGrid& v);
void to_json(json& j, const PipelineParams& v);
void from_json(const json& j, PipelineParams& v);

void to_json(json& j, const GroundTruth& v);
void from_json(const json& j, GroundTruth& v);
void to_json(json& j, const StimulusClip& v);
void from_json(const json& j, StimulusClip& v);
void to_json(json& j, const StimulusCatalog& v);
void from_json(const json& j, StimulusCatalog& v);

void to_json(json& j, const ParamCell& v);
void from_json(const json& j, ParamCell& v);
void to_json(json& j, const TrialSpec& v);
void from_json(const json& j, TrialSpec& v);
void to_json(json& j, const SessionPlan& v);
void from_json(const json& j, SessionPlan& v);
void to_json(json& j, const Response& v);
void from_json(const json& j, Response& v);
void to_json(json& j, const TrialRecord& v);
void from_json(const json& j, TrialRecord& v);
void to_json(json& j, const DetectionCounts& v);
void to_json(json& j, const MetricsReport& v);
void to_json(json& j, const StatTestResult& v);
void from_json(const json& j, StatTestResult& v);

std::string_view decay_name(DecayForm form);
DecayForm parse_decay(std::string_view name);
std::string_view pooling_name(Pooling pooling);
Pooling parse_pooling(std::string_view name);
std::string_view fdr_mode_name(FdrMode mode);
FdrMode parse_fdr_mode(std::string_view name);
std::string_view combination_mode_name(CombinationMode mode);
CombinationMode parse_combination_mode(std::string_view name);

/// Parses a JSON file; throws Error(ManifestParse) with the file name on
/// malformed input and Error(Io) when it cannot be read.
json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; key order is deterministic.
void write_json(const std::filesystem::path& path, const json& value);

}  // namespace phosphor
