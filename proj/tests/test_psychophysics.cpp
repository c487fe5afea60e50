// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <random>

#include "oracles.hpp"
#include "phosphor/error.hpp"
#include "phosphor/psychophysics.hpp"

using namespace phosphor;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

StimulusCatalog balanced_catalog(int practice = 2) {
  StimulusCatalog catalog;
  for (Category c : kCategories) {
    for (int k = 0; k < 4; ++k) {
      StimulusClip clip;
      clip.clip_id = std::string(category_name(c)) + std::to_string(k);
      clip.category = c;
      clip.ground_truth = {category_has_people(c), category_has_cars(c)};
      catalog.clips.push_back(clip);
    }
  }
  for (int k = 0; k < practice; ++k) {
    StimulusClip clip;
    clip.clip_id = "practice" + std::to_string(k);
    clip.practice = true;
    catalog.clips.push_back(clip);
  }
  catalog.balanced = is_balanced(catalog.clips);
  return catalog;
}

std::vector<TrialSpec> cross_product(const StimulusCatalog& catalog) {
  std::vector<TrialSpec> all;
  for (const StimulusClip* clip : catalog.main_clips()) {
    for (Strategy s : kStrategies) {
      for (int g : kGridSizes) all.push_back({clip->clip_id, s, g});
    }
  }
  std::sort(all.begin(), all.end());
  return all;
}

TrialRecord record(GroundTruth truth, Response response) {
  TrialRecord r;
  r.ground_truth = truth;
  r.response = response;
  return r;
}

// One trial per main clip, answered by `respond`.
template <typename Responder>
std::vector<TrialRecord> one_per_clip(const StimulusCatalog& catalog, Responder respond) {
  std::vector<TrialRecord> out;
  for (const StimulusClip* clip : catalog.main_clips()) out.push_back(record(clip->ground_truth, respond(clip->ground_truth)));
  return out;
}

}  // namespace

TEST_CASE("inverse normal CDF") {
  CHECK(std::abs(inverse_normal_cdf(0.5)) <= 1e-15);
  CHECK(std::abs(inverse_normal_cdf(0.975) - 1.959964) <= 1e-6);
  CHECK(std::abs(inverse_normal_cdf(0.975) - oracle::normal_quantile(0.975)) <= 1e-12);
  CHECK(std::abs(inverse_normal_cdf(0.75) - 0.674490) <= 1e-6);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double p = u(rng);
    if (p <= 0.0) continue;
    const double z = inverse_normal_cdf(p);
    CHECK(std::abs(static_cast<double>(oracle::normal_cdf(z)) - p) <= 1e-9);
  }
  // tails
  for (double p : {1e-9, 1e-6, 0.02425, 0.5 - 1e-12, 0.97575, 1 - 1e-6, 1 - 1e-9}) {
    CHECK(std::abs(static_cast<double>(oracle::normal_cdf(inverse_normal_cdf(p))) - p) <= 1e-9);
  }
  for (double bad : {0.0, 1.0, -0.1, 1.5}) CHECK(code_of([&] { inverse_normal_cdf(bad); }) == ErrorCode::DomainError);
  CHECK(normal_cdf(1.0) == doctest::Approx(0.8413447460685429));
}

TEST_CASE("detection counts") {
  SUBCASE("CP trial, both reported") {
    const TrialRecord r = record({true, true}, {true, true});
    const DetectionCounts c = compute_counts(std::span(&r, 1));
    CHECK(c.hits == 2);
    CHECK(c.false_discoveries == 0);
  }
  SUBCASE("N trial, people reported") {
    const TrialRecord r = record({false, false}, {true, false});
    const DetectionCounts c = compute_counts(std::span(&r, 1));
    CHECK(c.false_discoveries == 1);
    CHECK(c.correct_rejections == 1);
    CHECK(c.yes_responses == 1);
  }
  SUBCASE("always-yes responder on a balanced block") {
    const auto records = one_per_clip(balanced_catalog(), [](GroundTruth) { return Response{true, true}; });
    const DetectionCounts c = compute_counts(records);
    CHECK(c.hits == c.signal_events);
    CHECK(c.false_discoveries == 16);
    const MetricsReport m = d_prime(c);
    CHECK(m.hit_rate == doctest::Approx(1.0 - 1.0 / (2.0 * 16)));
  }
  SUBCASE("per-trial pooling") {
    const TrialRecord rs[] = {record({true, false}, {false, true}), record({false, false}, {false, false})};
    const DetectionCounts c = compute_counts(rs, Pooling::PerTrialAny);
    CHECK(c.signal_events == 1);
    CHECK(c.hits == 1);
    CHECK(c.correct_rejections == 1);
  }
  SUBCASE("internal consistency on random records") {
    std::mt19937_64 rng(3);
    std::bernoulli_distribution coin(0.5);
    std::vector<TrialRecord> rs;
    for (int i = 0; i < 200; ++i) rs.push_back(record({coin(rng), coin(rng)}, {coin(rng), coin(rng)}));
    for (Pooling p : {Pooling::PerTargetType, Pooling::PerTrialAny}) {
      const DetectionCounts c = compute_counts(rs, p);
      CHECK(c.hits + c.misses == c.signal_events);
      CHECK(c.false_discoveries + c.correct_rejections == c.noise_events);
      CHECK(c.hits + c.false_discoveries == c.yes_responses);
      CHECK(c.total_events() == (p == Pooling::PerTargetType ? 400 : 200));
    }
  }
}

TEST_CASE("d prime examples") {
  CHECK(d_prime_from_rates(0.5, 0.5) == doctest::Approx(0.0).scale(1e-15));
  CHECK(std::abs(d_prime_from_rates(0.8413447, 0.1586553) - 2.0) <= 1e-5);

  DetectionCounts c;
  c.hits = 12;
  c.misses = 4;
  c.signal_events = 16;
  c.false_discoveries = 5;
  c.yes_responses = 20;
  c.noise_events = 16;
  c.correct_rejections = 11;
  const MetricsReport m = d_prime(c, RateCorrection::None);
  CHECK(m.hit_rate == 0.75);
  CHECK(m.fdr == 0.25);
  CHECK(std::abs(m.d_prime - 1.34898) <= 1e-5);
  CHECK(std::abs(m.d_prime - (oracle::normal_quantile(0.75) - oracle::normal_quantile(0.25))) <= 1e-9);
  CHECK_FALSE(m.correction_applied);

  const MetricsReport alarm = d_prime(c, RateCorrection::None, FdrMode::FalseAlarm);
  CHECK(alarm.fdr == doctest::Approx(5.0 / 16.0));
}

TEST_CASE("d prime degenerate rates") {
  DetectionCounts perfect;
  perfect.hits = 10;
  perfect.signal_events = 10;
  perfect.yes_responses = 10;
  perfect.noise_events = 6;
  perfect.correct_rejections = 6;
  CHECK(code_of([&] { d_prime(perfect, RateCorrection::None); }) == ErrorCode::UndefinedRate);
  const MetricsReport m = d_prime(perfect);
  CHECK(m.correction_applied);
  CHECK(m.hit_rate == doctest::Approx(1.0 - 1.0 / 20.0));
  CHECK(m.fdr == doctest::Approx(1.0 / 20.0));
  CHECK(m.d_prime == doctest::Approx(2.0 * oracle::normal_quantile(1.0 - 1.0 / 20.0)));

  DetectionCounts empty;
  empty.noise_events = 4;
  empty.correct_rejections = 4;
  CHECK(code_of([&] { d_prime(empty); }) == ErrorCode::UndefinedRate);
  DetectionCounts silent;
  silent.signal_events = 4;
  silent.misses = 4;
  CHECK(code_of([&] { d_prime(silent); }) == ErrorCode::UndefinedRate);
  silent.noise_events = 4;
  silent.correct_rejections = 4;
  CHECK(code_of([&] { d_prime(silent); }) == ErrorCode::UndefinedRate);
  CHECK_NOTHROW(d_prime(silent, RateCorrection::LogLinear, FdrMode::FalseAlarm));
}

TEST_CASE("d prime antisymmetry and monotonicity") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.001, 0.999);
  for (int i = 0; i < 500; ++i) {
    const double h = u(rng), f = u(rng), dh = 0.0005;
    CHECK(d_prime_from_rates(h, f) == doctest::Approx(-d_prime_from_rates(f, h)).scale(1e-12));
    if (h + dh < 1.0) CHECK(d_prime_from_rates(h + dh, f) > d_prime_from_rates(h, f));
    if (f + dh < 1.0) CHECK(d_prime_from_rates(h, f + dh) < d_prime_from_rates(h, f));
  }
}

TEST_CASE("classification metrics") {
  SUBCASE("worked example") {
    DetectionCounts c;
    c.hits = 12;
    c.false_discoveries = 5;
    c.correct_rejections = 11;
    c.misses = 4;
    c.signal_events = 16;
    c.noise_events = 16;
    c.yes_responses = 17;
    const ClassificationMetrics m = classification_metrics(c);
    CHECK(*m.accuracy == doctest::Approx(0.71875));
    CHECK(*m.precision == doctest::Approx(12.0 / 17.0));
    CHECK(*m.recall == doctest::Approx(0.75));
    const double p = 12.0 / 17.0, r = 0.75;
    CHECK(*m.f1 == doctest::Approx(2 * p * r / (p + r)));
    CHECK(*m.f1 == doctest::Approx(0.7273).epsilon(1e-4));
  }
  SUBCASE("perfect responder") {
    const auto rs = one_per_clip(balanced_catalog(), [](GroundTruth t) { return Response{t.has_people, t.has_cars}; });
    const MetricsReport m = evaluate(rs);
    CHECK(*m.accuracy == 1.0);
    CHECK(*m.precision == 1.0);
    CHECK(*m.recall == 1.0);
    CHECK(*m.f1 == 1.0);
    CHECK(m.n_trials == 16);
  }
  SUBCASE("always-no responder") {
    const auto rs = one_per_clip(balanced_catalog(), [](GroundTruth) { return Response{false, false}; });
    const DetectionCounts c = compute_counts(rs);
    const ClassificationMetrics m = classification_metrics(c);
    CHECK(*m.recall == 0.0);
    CHECK_FALSE(m.precision.has_value());
    CHECK_FALSE(m.f1.has_value());
    CHECK(*m.accuracy == doctest::Approx(static_cast<double>(c.noise_events) / c.total_events()));
  }
}

TEST_CASE("bootstrap") {
  const std::vector<double> a{1.0, 2.0, 4.0, 3.5, 0.5, 2.2};
  SUBCASE("identical paired groups") {
    const StatTestResult r = bootstrap_diff(a, a, 2000, 1, true);
    CHECK(r.observed_diff == 0.0);
    CHECK(r.boot_p == 1.0);
    CHECK(r.paired);
  }
  SUBCASE("degenerate separated groups") {
    const std::vector<double> ones(10, 1.0), zeros(10, 0.0);
    const StatTestResult r = bootstrap_diff(ones, zeros, 10000, 5);
    CHECK(r.observed_diff == 1.0);
    CHECK(r.boot_p <= 2.0 / 10000);
    CHECK(r.n_resamples == 10000);
  }
  SUBCASE("determinism") {
    const std::vector<double> b{0.3, 1.9, 2.5, 1.0, 0.1, 2.0, 0.8};
    const StatTestResult x = bootstrap_diff(a, b, 3000, 77);
    const StatTestResult y = bootstrap_diff(a, b, 3000, 77);
    CHECK(x.boot_p == y.boot_p);
    CHECK(x.seed == 77);
    CHECK(x.boot_p >= 0.0);
    CHECK(x.boot_p <= 1.0);
  }
  SUBCASE("errors") {
    const std::vector<double> none;
    CHECK(code_of([&] { bootstrap_diff(none, a); }) == ErrorCode::EmptyGroup);
    CHECK(code_of([&] { bootstrap_diff(a, none); }) == ErrorCode::EmptyGroup);
    const std::vector<double> shorter{1.0, 2.0};
    CHECK(code_of([&] { bootstrap_diff(a, shorter, 100, 0, true); }) == ErrorCode::LengthMismatch);
    CHECK_NOTHROW(bootstrap_diff(a, shorter, 100, 0, false));
  }
  SUBCASE("false-positive calibration") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> noise(0.0, 1.0);
    int rejections = 0;
    const int experiments = 200;
    for (int e = 0; e < experiments; ++e) {
      std::vector<double> x(30), y(30);
      for (double& v : x) v = noise(rng);
      for (double& v : y) v = noise(rng);
      rejections += bootstrap_diff(x, y, 2000, static_cast<std::uint64_t>(e)).boot_p < 0.05 ? 1 : 0;
    }
    const double rate = static_cast<double>(rejections) / experiments;
    MESSAGE("false-positive rate " << rate);
    CHECK(rate >= 0.02);
    CHECK(rate <= 0.09);
  }
}

TEST_CASE("Benjamini-Hochberg adjustment") {
  SUBCASE("single p") {
    const std::vector<double> p{0.037};
    CHECK(fdr_adjust(p)[0] == 0.037);
  }
  SUBCASE("worked example") {
    const std::vector<double> p{0.005, 0.011, 0.02, 0.04};
    const auto adj = fdr_adjust(p);
    const double expected[] = {0.020, 0.022, 0.0266667, 0.04};
    for (int i = 0; i < 4; ++i) CHECK(std::abs(adj[i] - expected[i]) <= 1e-5);
  }
  SUBCASE("equal p values are unchanged") {
    const std::vector<double> p(6, 0.03);
    for (double v : fdr_adjust(p)) CHECK(v == doctest::Approx(0.03));
  }
  SUBCASE("matches the quadratic oracle and is order-equivariant") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> p(1 + trial % 12);
      for (double& v : p) v = trial % 3 == 0 ? std::round(u(rng) * 20) / 20 : u(rng) * 0.2;
      const auto adj = fdr_adjust(p);
      const auto expected = oracle::benjamini_hochberg(p);
      std::vector<std::size_t> perm(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) perm[i] = i;
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<double> permuted(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) permuted[i] = p[perm[i]];
      const auto adj_permuted = fdr_adjust(permuted);
      for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(adj[i] == doctest::Approx(expected[i]).scale(1e-15));
        CHECK(adj[i] >= p[i]);
        CHECK(adj[i] <= 1.0);
        CHECK(adj_permuted[i] == adj[perm[i]]);
      }
    }
  }
  SUBCASE("re-adjusting is not the identity") {
    // BH is a step-up procedure; applying it twice inflates small p values
    // further, so only fixed points such as equal p are stable.
    const std::vector<double> p{0.01, 0.04};
    const auto once = fdr_adjust(p);
    const auto twice = fdr_adjust(once);
    CHECK(once[0] == doctest::Approx(0.02));
    CHECK(twice[0] == doctest::Approx(0.04));
    const std::vector<double> flat(3, 0.2);
    CHECK(fdr_adjust(fdr_adjust(flat)) == fdr_adjust(flat));
  }
  SUBCASE("domain") {
    const std::vector<double> bad{0.2, 1.2};
    CHECK(code_of([&] { fdr_adjust(bad); }) == ErrorCode::DomainError);
  }
  SUBCASE("result family") {
    std::vector<StatTestResult> family(3);
    family[0].boot_p = 0.01;
    family[1].boot_p = 0.5;
    family[2].boot_p = 0.02;
    fdr_adjust(family);
    for (const auto& r : family) CHECK(r.fdr_adjusted_p >= r.boot_p);
    CHECK(family[0].fdr_adjusted_p == doctest::Approx(0.03));
  }
}

TEST_CASE("experiment cells") {
  const auto cells = experiment_cells();
  REQUIRE(cells.size() == 9);
  CHECK(cells[0] == ParamCell{100.0, 0.0});
  CHECK(cells[8] == ParamCell{500.0, 5000.0});
  std::set<std::pair<double, double>> seen;
  for (std::size_t s = 0; s < 9; ++s) {
    const ParamCell c = assign_cell(s);
    CHECK(is_experiment_cell(c));
    seen.insert({c.rho_um, c.lambda_um});
  }
  CHECK(seen.size() == 9);
  CHECK(assign_cell(9) == assign_cell(0));
  CHECK_FALSE(is_experiment_cell({200.0, 0.0}));
}

TEST_CASE("sessions cover the design exactly once") {
  const StimulusCatalog catalog = balanced_catalog();
  const auto expected = cross_product(catalog);
  REQUIRE(expected.size() == kMainTrials);
  std::set<std::vector<TrialSpec>> orders;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const SessionPlan plan = make_session("s", catalog, assign_cell(seed), seed);
    auto trials = plan.trials;
    std::sort(trials.begin(), trials.end());
    CHECK(trials == expected);
    CHECK(plan.practice_trials.size() == kPracticeTrials);
    for (const TrialSpec& t : plan.practice_trials) CHECK(catalog.find(t.clip_id).practice);
    orders.insert(plan.trials);
  }
  CHECK(orders.size() == 1000);
}

TEST_CASE("session determinism and errors") {
  const StimulusCatalog catalog = balanced_catalog();
  const SessionPlan a = make_session("s001", catalog, {300.0, 1000.0}, 7);
  const SessionPlan b = make_session("s001", catalog, {300.0, 1000.0}, 7);
  CHECK(a == b);
  CHECK(a.rng_seed == 7);
  CHECK(a.trials != make_session("s001", catalog, {300.0, 1000.0}, 8).trials);
  CHECK(make_session("s", balanced_catalog(0), {100.0, 0.0}, 1).practice_trials.empty());

  StimulusCatalog short_one = catalog;
  short_one.clips.erase(short_one.clips.begin());
  short_one.balanced = false;
  CHECK(code_of([&] { make_session("s", short_one, {100.0, 0.0}, 1); }) == ErrorCode::UnbalancedCatalog);
  CHECK(code_of([&] { make_session("s", catalog, {150.0, 0.0}, 1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("trial record validation") {
  TrialRecord r;
  for (int c = 1; c <= 5; ++c) {
    r.confidence = c;
    CHECK_NOTHROW(r.validate());
  }
  r.confidence = 0;
  CHECK_THROWS_AS(r.validate(), Error);
  r.confidence = 6;
  CHECK_THROWS_AS(r.validate(), Error);
  r.confidence = 3;
  r.response_time_ms = -1.0;
  CHECK_THROWS_AS(r.validate(), Error);
}
