// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phosphor/dataset.hpp"
#include "phosphor/scene.hpp"

namespace phosphor {

/// One (rho, lambda) model condition.
struct ParamCell {
  double rho_um = 100.0;
  double lambda_um = 0.0;

  bool operator==(const ParamCell&) const = default;
};

/// The nine experimental conditions, rho-major.
std::vector<ParamCell> experiment_cells();
bool is_experiment_cell(const ParamCell& cell);
/// Round-robin condition for the subject with this zero-based index.
ParamCell assign_cell(std::size_t subject_index);

inline constexpr int kGridSizes[] = {8, 16, 32};

struct TrialSpec {
  std::string clip_id;
  Strategy strategy = Strategy::Saliency;
  int grid = 8;

  bool operator==(const TrialSpec&) const = default;
  auto operator<=>(const TrialSpec& other) const {
    if (auto c = clip_id <=> other.clip_id; c != 0) return c;
    if (auto c = static_cast<int>(strategy) <=> static_cast<int>(other.strategy); c != 0) return c;
    return grid <=> other.grid;
  }
};

struct SessionPlan {
  std::string subject_id;
  ParamCell param_cell;
  std::vector<TrialSpec> trials;
  std::vector<TrialSpec> practice_trials;
  std::uint64_t rng_seed = 0;

  bool operator==(const SessionPlan&) const = default;
};

inline constexpr std::size_t kMainTrials = 192;
inline constexpr std::size_t kPracticeTrials = 8;

/// 16 clips x 4 strategies x 3 grids, shuffled by `seed`. Practice trials
/// cycle through the catalog's practice clips (none if it has none).
/// Throws Error(UnbalancedCatalog).
SessionPlan make_session(std::string subject_id, const StimulusCatalog& catalog, const ParamCell& cell,
                         std::uint64_t seed);

struct Response {
  bool saw_people = false;
  bool saw_cars = false;

  bool operator==(const Response&) const = default;
};

struct TrialRecord {
  std::size_t trial_index = 0;
  Response response;
  int confidence = 3;
  double response_time_ms = 0.0;
  GroundTruth ground_truth;
  bool practice = false;

  /// Throws Error(InvalidArgument) for confidence outside 1..5.
  void validate() const;
  bool operator==(const TrialRecord&) const = default;
};

enum class Pooling {
  /// Two events per trial: one for people, one for cars.
  PerTargetType,
  /// One event per trial: "any target present".
  PerTrialAny,
};

struct DetectionCounts {
  std::int64_t hits = 0;
  std::int64_t misses = 0;
  std::int64_t false_discoveries = 0;
  std::int64_t correct_rejections = 0;
  std::int64_t yes_responses = 0;
  std::int64_t signal_events = 0;
  std::int64_t noise_events = 0;

  std::int64_t total_events() const { return signal_events + noise_events; }
  bool operator==(const DetectionCounts&) const = default;
};

DetectionCounts compute_counts(std::span<const TrialRecord> records, Pooling pooling = Pooling::PerTargetType);

enum class FdrMode {
  /// false discoveries / yes responses
  PaperFDR,
  /// false discoveries / noise events (classic false-alarm rate)
  FalseAlarm,
};

enum class RateCorrection { None, LogLinear };

struct ClassificationMetrics {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

struct MetricsReport {
  double d_prime = 0.0;
  double hit_rate = 0.0;
  double fdr = 0.0;
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::int64_t n_trials = 0;
  bool correction_applied = false;
};

/// Standard normal CDF.
double normal_cdf(double z);
/// Acklam's rational approximation followed by one Halley step.
/// Throws Error(DomainError) unless 0 < p < 1.
double inverse_normal_cdf(double p);

/// Z(hit_rate) - Z(false_rate).
double d_prime_from_rates(double hit_rate, double false_rate);

/// Throws Error(UndefinedRate) when a denominator is zero, or when a rate
/// is exactly 0 or 1 and correction is None.
MetricsReport d_prime(const DetectionCounts& counts, RateCorrection correction = RateCorrection::LogLinear,
                      FdrMode mode = FdrMode::PaperFDR);

/// Undefined metrics (zero denominators) are left empty.
ClassificationMetrics classification_metrics(const DetectionCounts& counts);

/// d_prime plus classification metrics; n_trials is the record count.
MetricsReport evaluate(std::span<const TrialRecord> records, Pooling pooling = Pooling::PerTargetType,
                       RateCorrection correction = RateCorrection::LogLinear, FdrMode mode = FdrMode::PaperFDR);

struct StatTestResult {
  std::string label;
  double observed_diff = 0.0;
  double boot_p = 1.0;
  double fdr_adjusted_p = 1.0;
  std::size_t n_resamples = 0;
  std::uint64_t seed = 0;
  bool paired = false;
};

/// Two-sided percentile bootstrap for mean(a) - mean(b). Resample i draws
/// from its own stream seeded by (seed, i). Throws Error(EmptyGroup) or
/// Error(LengthMismatch).
StatTestResult bootstrap_diff(std::span<const double> group_a, std::span<const double> group_b,
                              std::size_t n_resamples = 10000, std::uint64_t seed = 0, bool paired = false,
                              std::string label = {});

/// Benjamini-Hochberg adjusted p values in input order. Throws
/// Error(DomainError) for p outside [0, 1].
std::vector<double> fdr_adjust(std::span<const double> p_values);

/// Fills fdr_adjusted_p across one family of tests.
void fdr_adjust(std::span<StatTestResult> results);

}  // namespace phosphor
