// SPDX-License-Identifier: Apache-2.0
#include "phosphor/psychophysics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "phosphor/error.hpp"
#include "phosphor/rng.hpp"

namespace phosphor {

std::vector<ParamCell> experiment_cells() {
  std::vector<ParamCell> cells;
  for (double rho : {100.0, 300.0, 500.0}) {
    for (double lambda : {0.0, 1000.0, 5000.0}) cells.push_back({rho, lambda});
  }
  return cells;
}

bool is_experiment_cell(const ParamCell& cell) {
  const auto cells = experiment_cells();
  return std::find(cells.begin(), cells.end(), cell) != cells.end();
}

ParamCell assign_cell(std::size_t subject_index) {
  const auto cells = experiment_cells();
  return cells[subject_index % cells.size()];
}

SessionPlan make_session(std::string subject_id, const StimulusCatalog& catalog, const ParamCell& cell,
                         std::uint64_t seed) {
  if (!is_balanced(catalog.clips)) {
    throw Error(ErrorCode::UnbalancedCatalog, "sessions need 16 main clips, 4 per category");
  }
  if (!is_experiment_cell(cell)) throw Error(ErrorCode::InvalidArgument, "parameter cell is not one of the nine conditions");

  SessionPlan plan;
  plan.subject_id = std::move(subject_id);
  plan.param_cell = cell;
  plan.rng_seed = seed;
  for (const StimulusClip* clip : catalog.main_clips()) {
    for (Strategy strategy : kStrategies) {
      for (int grid : kGridSizes) plan.trials.push_back({clip->clip_id, strategy, grid});
    }
  }
  const auto practice = catalog.practice_clips();
  if (!practice.empty()) {
    for (std::size_t k = 0; k < kPracticeTrials; ++k) {
      plan.practice_trials.push_back({practice[k % practice.size()]->clip_id, kStrategies[k % 4], kGridSizes[k % 3]});
    }
  }
  std::mt19937_64 rng(seed);
  shuffle(plan.trials, rng);
  shuffle(plan.practice_trials, rng);
  return plan;
}

void TrialRecord::validate() const {
  if (confidence < 1 || confidence > 5) throw Error(ErrorCode::InvalidArgument, "confidence must be 1..5");
  if (!(response_time_ms >= 0.0)) throw Error(ErrorCode::InvalidArgument, "response_time_ms must be non-negative");
}

DetectionCounts compute_counts(std::span<const TrialRecord> records, Pooling pooling) {
  DetectionCounts counts;
  auto add = [&](bool present, bool reported) {
    if (present) {
      ++counts.signal_events;
      reported ? ++counts.hits : ++counts.misses;
    } else {
      ++counts.noise_events;
      reported ? ++counts.false_discoveries : ++counts.correct_rejections;
    }
    if (reported) ++counts.yes_responses;
  };
  for (const TrialRecord& r : records) {
    if (pooling == Pooling::PerTargetType) {
      add(r.ground_truth.has_people, r.response.saw_people);
      add(r.ground_truth.has_cars, r.response.saw_cars);
    } else {
      add(r.ground_truth.has_people || r.ground_truth.has_cars, r.response.saw_people || r.response.saw_cars);
    }
  }
  return counts;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::DomainError, "inverse_normal_cdf needs 0 < p < 1");
  // 1 - p is exact for p >= 0.5, so work in the lower half.
  if (p > 0.5) return -inverse_normal_cdf(1.0 - p);

  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  // Halley refinement against the erfc-based CDF.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double d_prime_from_rates(double hit_rate, double false_rate) {
  return inverse_normal_cdf(hit_rate) - inverse_normal_cdf(false_rate);
}

namespace {

// Returns the (possibly corrected) rate; sets `corrected` when a 0/1 rate
// was replaced.
double bounded_rate(std::int64_t count, std::int64_t denominator, RateCorrection correction, const char* what,
                    bool& corrected) {
  if (denominator <= 0) throw Error(ErrorCode::UndefinedRate, std::string(what) + " has no events");
  const double rate = static_cast<double>(count) / static_cast<double>(denominator);
  if (rate > 0.0 && rate < 1.0) return rate;
  if (correction == RateCorrection::None) {
    throw Error(ErrorCode::UndefinedRate, std::string(what) + " is 0 or 1 and no correction was requested");
  }
  corrected = true;
  const double half = 0.5 / static_cast<double>(denominator);
  return rate == 0.0 ? half : 1.0 - half;
}

}  // namespace

MetricsReport d_prime(const DetectionCounts& counts, RateCorrection correction, FdrMode mode) {
  const std::int64_t false_denominator = mode == FdrMode::PaperFDR ? counts.yes_responses : counts.noise_events;
  if (counts.hits < 0 || counts.false_discoveries < 0 || counts.hits > counts.signal_events ||
      counts.false_discoveries > false_denominator) {
    throw Error(ErrorCode::InvalidArgument, "inconsistent detection counts");
  }
  MetricsReport report;
  report.hit_rate = bounded_rate(counts.hits, counts.signal_events, correction, "hit rate", report.correction_applied);
  report.fdr = bounded_rate(counts.false_discoveries, false_denominator, correction, "false discovery rate",
                            report.correction_applied);
  report.d_prime = d_prime_from_rates(report.hit_rate, report.fdr);
  const ClassificationMetrics cm = classification_metrics(counts);
  report.accuracy = cm.accuracy;
  report.precision = cm.precision;
  report.recall = cm.recall;
  report.f1 = cm.f1;
  return report;
}

ClassificationMetrics classification_metrics(const DetectionCounts& counts) {
  ClassificationMetrics m;
  if (counts.total_events() > 0) {
    m.accuracy = static_cast<double>(counts.hits + counts.correct_rejections) / static_cast<double>(counts.total_events());
  }
  if (counts.yes_responses > 0) m.precision = static_cast<double>(counts.hits) / static_cast<double>(counts.yes_responses);
  if (counts.signal_events > 0) m.recall = static_cast<double>(counts.hits) / static_cast<double>(counts.signal_events);
  if (m.precision && m.recall && *m.precision + *m.recall > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  }
  return m;
}

MetricsReport evaluate(std::span<const TrialRecord> records, Pooling pooling, RateCorrection correction,
                       FdrMode mode) {
  MetricsReport report = d_prime(compute_counts(records, pooling), correction, mode);
  report.n_trials = static_cast<std::int64_t>(records.size());
  return report;
}

namespace {

double mean(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

}  // namespace

StatTestResult bootstrap_diff(std::span<const double> group_a, std::span<const double> group_b,
                              std::size_t n_resamples, std::uint64_t seed, bool paired, std::string label) {
  if (group_a.empty() || group_b.empty()) throw Error(ErrorCode::EmptyGroup, "bootstrap groups must be non-empty");
  if (paired && group_a.size() != group_b.size()) {
    throw Error(ErrorCode::LengthMismatch, "paired bootstrap needs equal group sizes");
  }
  if (n_resamples == 0) throw Error(ErrorCode::InvalidArgument, "n_resamples must be positive");

  StatTestResult result;
  result.label = std::move(label);
  result.n_resamples = n_resamples;
  result.seed = seed;
  result.paired = paired;
  result.observed_diff = mean(group_a) - mean(group_b);

  const std::size_t na = group_a.size(), nb = group_b.size();
  std::size_t at_or_below = 0, at_or_above = 0;
  for (std::size_t i = 0; i < n_resamples; ++i) {
    SplitMix64 rng(stream_seed(seed, i));
    double diff;
    if (paired) {
      double sum = 0.0;
      for (std::size_t k = 0; k < na; ++k) {
        const auto j = static_cast<std::size_t>(uniform_index(rng, na));
        sum += group_a[j] - group_b[j];
      }
      diff = sum / static_cast<double>(na);
    } else {
      double sa = 0.0, sb = 0.0;
      for (std::size_t k = 0; k < na; ++k) sa += group_a[static_cast<std::size_t>(uniform_index(rng, na))];
      for (std::size_t k = 0; k < nb; ++k) sb += group_b[static_cast<std::size_t>(uniform_index(rng, nb))];
      diff = sa / static_cast<double>(na) - sb / static_cast<double>(nb);
    }
    if (diff <= 0.0) ++at_or_below;
    if (diff >= 0.0) ++at_or_above;
  }
  const double tail = static_cast<double>(std::min(at_or_below, at_or_above)) / static_cast<double>(n_resamples);
  result.boot_p = std::min(1.0, 2.0 * tail);
  result.fdr_adjusted_p = result.boot_p;
  return result;
}

std::vector<double> fdr_adjust(std::span<const double> p_values) {
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::DomainError, "p values must lie in [0, 1]");
  }
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });

  std::vector<double> adjusted(m);
  double running = 1.0;
  for (std::size_t k = m; k-- > 0;) {
    // p * (m / rank) never rounds below p
    const double scaled = p_values[order[k]] * (static_cast<double>(m) / static_cast<double>(k + 1));
    running = std::min(running, scaled);
    adjusted[order[k]] = std::min(1.0, running);
  }
  return adjusted;
}

void fdr_adjust(std::span<StatTestResult> results) {
  std::vector<double> p;
  p.reserve(results.size());
  for (const auto& r : results) p.push_back(r.boot_p);
  const std::vector<double> adjusted = fdr_adjust(p);
  for (std::size_t i = 0; i < results.size(); ++i) results[i].fdr_adjusted_p = adjusted[i];
}

}  // namespace phosphor
