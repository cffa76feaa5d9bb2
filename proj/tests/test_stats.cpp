#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <set>

#include "support/oracles.hpp"
#include "volseg/stats.hpp"

using namespace volseg;

namespace {

std::vector<double> distinct_values(std::mt19937_64& rng, std::size_t count) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  std::set<double> seen;
  while (seen.size() < count) seen.insert(d(rng));
  std::vector<double> v(seen.begin(), seen.end());
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

double choose(std::size_t n, std::size_t k) {
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

}  // namespace

TEST_CASE("percentile examples") {
  std::vector<double> v;
  for (int i = 0; i <= 10; ++i) v.push_back(i);
  CHECK(percentile(v, 0.5) == 5.0);
  CHECK(percentile(std::vector<double>{10, 20}, 0.95) == 19.5);
  CHECK(percentile(std::vector<double>{3, 1, 2}, 0.0) == 1.0);
  CHECK(percentile(std::vector<double>{3, 1, 2}, 1.0) == 3.0);
  CHECK(percentile(std::vector<double>{7}, 0.3) == 7.0);
  CHECK_THROWS_AS(percentile(std::vector<double>{}, 0.5), Error);
  CHECK_THROWS_AS(percentile(v, 1.5), Error);
}

TEST_CASE("percentile stays within range and is monotone in q") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + trial % 17);
    for (auto& x : v) x = trial % 3 ? d(rng) : std::round(d(rng));
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    double last = -INFINITY;
    for (int k = 0; k <= 40; ++k) {
      const double q = k / 40.0;
      const double p = percentile(v, q);
      CHECK(p >= *lo);
      CHECK(p <= *hi);
      CHECK(p >= last);
      CHECK(p == doctest::Approx(oracle::linear_percentile(v, q)).epsilon(1e-12));
      last = p;
    }
  }
}

TEST_CASE("Mann-Whitney worked examples") {
  const std::vector<double> hi{4, 5, 6}, lo{1, 2, 3};
  auto r = mann_whitney_u_greater(hi, lo);
  CHECK(r.u == 9.0);
  CHECK(r.p_value == 0.05);
  CHECK(r.method == TestMethod::Exact);
  r = mann_whitney_u_greater(lo, hi);
  CHECK(r.u == 0.0);
  CHECK(r.p_value == 1.0);

  const std::vector<double> tied{0.8, 0.9, 0.9, 1.0, 0.7};
  r = mann_whitney_u_greater(tied, tied);
  CHECK(r.method == TestMethod::NormalApproximation);
  CHECK(r.p_value >= 0.4);

  CHECK_THROWS_AS(mann_whitney_u_greater(std::vector<double>{}, lo), Error);
}

TEST_CASE("exact p-values equal full enumeration for all n, m <= 7") {
  std::mt19937_64 rng(2);
  for (std::size_t n = 1; n <= 7; ++n)
    for (std::size_t m = 1; m <= 7; ++m)
      for (int rep = 0; rep < 3; ++rep) {
        const auto pooled = distinct_values(rng, n + m);
        const std::vector<double> a(pooled.begin(), pooled.begin() + static_cast<long>(n));
        const std::vector<double> b(pooled.begin() + static_cast<long>(n), pooled.end());
        double u_oracle = 0.0;
        const double p_oracle = oracle::mann_whitney_enumerated(a, b, &u_oracle);
        const auto r = mann_whitney_u_greater(a, b);
        CHECK(r.method == TestMethod::Exact);
        CHECK(r.u == u_oracle);
        CHECK(r.p_value == doctest::Approx(p_oracle).epsilon(1e-15));

        const auto rev = mann_whitney_u_greater(b, a);
        CHECK(r.u + rev.u == static_cast<double>(n * m));
        const auto counts = mann_whitney_null_counts(n, m);
        const double at_obs = static_cast<double>(counts[static_cast<std::size_t>(r.u)]) / choose(n + m, n);
        CHECK(r.p_value + rev.p_value == doctest::Approx(1.0 + at_obs).epsilon(1e-12));
      }
}

TEST_CASE("null distribution counts") {
  for (std::size_t n = 1; n <= 12; ++n)
    for (std::size_t m = 1; m <= 12; ++m) {
      const auto c = mann_whitney_null_counts(n, m);
      REQUIRE(c.size() == n * m + 1);
      double total = 0.0;
      for (std::size_t u = 0; u < c.size(); ++u) {
        total += static_cast<double>(c[u]);
        CHECK(c[u] == c[n * m - u]);
      }
      CHECK(total == choose(n + m, n));
    }
  // Largest exact table: 20 x 20 needs C(40, 20) ~ 1.4e11, well inside uint64.
  const auto big = mann_whitney_null_counts(20, 20);
  std::uint64_t total = 0;
  for (auto c : big) total += c;
  CHECK(total == 137846528820ull);
}

TEST_CASE("exact/approximate switch") {
  std::mt19937_64 rng(3);
  auto pooled = distinct_values(rng, 40);
  std::vector<double> a(pooled.begin(), pooled.begin() + 20), b(pooled.begin() + 20, pooled.end());
  CHECK(mann_whitney_u_greater(a, b).method == TestMethod::Exact);  // 400 cells
  a.push_back(2.0);
  CHECK(mann_whitney_u_greater(a, b).method == TestMethod::NormalApproximation);  // 420 cells
}

TEST_CASE("normal approximation matches reference values") {
  // Values frozen from an independent implementation of the tie-corrected,
  // continuity-corrected one-sided approximation.
  const std::vector<double> a{0.91, 0.88, 0.95, 0.9, 0.93, 0.87, 0.92, 0.9, 0.94, 0.89, 0.96, 0.9};
  const std::vector<double> b{0.85, 0.9, 0.8, 0.88, 0.86, 0.9, 0.83, 0.87, 0.84, 0.89, 0.82, 0.81};
  auto r = mann_whitney_u_greater(a, b);
  CHECK(r.method == TestMethod::NormalApproximation);
  CHECK(r.u == 130.5);
  CHECK(r.p_value == doctest::Approx(0.00038202346869117425).epsilon(1e-12));

  std::vector<double> c, d;
  for (int i = 1; i <= 25; ++i) c.push_back(std::fmod(i * 0.037, 1.0));
  for (int i = 1; i <= 20; ++i) d.push_back(std::fmod(i * 0.053 + 0.01, 1.0));
  r = mann_whitney_u_greater(c, d);
  CHECK(r.method == TestMethod::NormalApproximation);
  CHECK(r.u == 258.0);
  CHECK(r.p_value == doctest::Approx(0.4319891942646477).epsilon(1e-12));
}

TEST_CASE("midranks") {
  const auto r = midranks(std::vector<double>{3, 1, 3, 2});
  CHECK(r == std::vector<double>{3.5, 1, 3.5, 2});
}

TEST_CASE("Holm-Bonferroni examples") {
  auto c = holm_bonferroni(std::vector<double>{0.01, 0.04, 0.03}, 0.05);
  CHECK(c.adjusted[0] == doctest::Approx(0.03).epsilon(1e-15));
  CHECK(c.adjusted[1] == doctest::Approx(0.06).epsilon(1e-15));
  CHECK(c.adjusted[2] == doctest::Approx(0.06).epsilon(1e-15));
  CHECK(c.reject == std::vector<bool>{true, false, false});

  c = holm_bonferroni(std::vector<double>{0.049}, 0.05);
  CHECK(c.adjusted[0] == 0.049);
  CHECK(c.reject[0]);

  c = holm_bonferroni(std::vector<double>{0.5, 0.6}, 0.05);
  CHECK(c.adjusted == std::vector<double>{1.0, 1.0});
  CHECK(c.reject == std::vector<bool>{false, false});

  c = holm_bonferroni(std::vector<double>{0.05}, 0.05);
  CHECK_FALSE(c.reject[0]);  // strict

  CHECK_THROWS_AS(holm_bonferroni(std::vector<double>{1.2}), Error);
  CHECK_THROWS_AS(holm_bonferroni(std::vector<double>{0.1}, 0.0), Error);
  CHECK(holm_bonferroni(std::vector<double>{0.1, 0.2}, 0.05, {"x", "y"}).labels[1] == "y");
}

TEST_CASE("Holm rejects a superset of Bonferroni and is monotone in sorted order") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(0.0, 0.08);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> p(1 + trial % 9);
    for (auto& x : p) x = d(rng);
    const auto h = holm_bonferroni(p);
    const auto b = bonferroni(p);
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return p[i] < p[j]; });
    bool stopped = false;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto i = order[k];
      if (b.reject[i]) CHECK(h.reject[i]);
      CHECK(h.adjusted[i] <= b.adjusted[i]);
      CHECK(h.adjusted[i] >= p[i]);
      if (k > 0) CHECK(h.adjusted[i] >= h.adjusted[order[k - 1]]);
      if (stopped) CHECK_FALSE(h.reject[i]);
      if (!h.reject[i]) stopped = true;
    }
  }
}

TEST_CASE("summarize") {
  auto s = summarize(std::vector<double>{0.8, 1.0});
  CHECK(s.n == 2);
  CHECK(s.mean == doctest::Approx(0.9));
  CHECK(s.sd == doctest::Approx(0.1414213562).epsilon(1e-9));

  s = summarize(std::vector<double>{0.7});
  CHECK(s.sd == 0.0);
  CHECK(s.median == 0.7);
  CHECK(s.whisker_lo == 0.7);
  CHECK(s.whisker_hi == 0.7);

  // n = 6: quartile positions h = 1.25 and 3.75.
  s = summarize(std::vector<double>{1, 2, 3, 4, 5, 100});
  CHECK(s.q1 == 2.25);
  CHECK(s.q3 == 4.75);
  CHECK(s.whisker_lo == 1.0);
  CHECK(s.whisker_hi == 5.0);
  CHECK(s.outliers == std::vector<double>{100});
  CHECK(s.p05 == doctest::Approx(1.25));
  CHECK(s.p95 == doctest::Approx(5 + 0.75 * 95));
  CHECK(s.min == 1.0);
  CHECK(s.max == 100.0);
  CHECK_THROWS_AS(summarize(std::vector<double>{}), Error);
}

namespace {

// Samples keyed by model; identical across datasets and regions unless overridden.
struct FakeRecords {
  std::map<std::string, std::vector<double>> by_model;
  std::map<std::string, std::vector<double>> overrides;  // "model|dataset|region"
  std::vector<std::string> calls;

  SampleSource source() {
    return [this](const std::string& model, const std::string& dataset, const std::string& region) {
      calls.push_back(model + "|" + dataset + "|" + region);
      auto it = overrides.find(model + "|" + dataset + "|" + region);
      return it != overrides.end() ? it->second : by_model.at(model);
    };
  }
};

StatsPlan two_stage(GateMode gate) {
  StatsPlan plan;
  plan.test_model = "ours";
  plan.stages = {{"vs-a", "a", GateMode::All, {{"d1", "kidney"}, {"d2", "kidney"}}},
                 {"vs-b", "b", gate, {{"d1", "kidney"}, {"d2", "kidney"}}}};
  return plan;
}

}  // namespace

TEST_CASE("hierarchical plan: stage 2 runs only after stage 1 rejects") {
  FakeRecords rec;
  rec.by_model["ours"] = {0.95, 0.96, 0.97, 0.98, 0.99};
  rec.by_model["a"] = {0.80, 0.81, 0.82, 0.83, 0.84};
  rec.by_model["b"] = {0.70, 0.71, 0.72, 0.73, 0.74};

  auto out = run_plan(two_stage(GateMode::All), rec.source());
  REQUIRE(out.stages.size() == 2);
  for (const auto& st : out.stages) {
    CHECK(st.ran);
    for (const auto& h : st.hypotheses) {
      CHECK(h.status == HypothesisStatus::Tested);
      CHECK(h.test.p_value == doctest::Approx(1.0 / 252.0));
      CHECK(h.adjusted_p == doctest::Approx(2.0 / 252.0));
      CHECK(h.reject);
    }
  }

  // Stage 1 fails: ours no better than a.
  FakeRecords fail = rec;
  fail.calls.clear();
  fail.by_model["a"] = rec.by_model["ours"];
  out = run_plan(two_stage(GateMode::All), fail.source());
  CHECK(out.stages[0].ran);
  CHECK_FALSE(out.stages[0].hypotheses[0].reject);
  CHECK_FALSE(out.stages[1].ran);
  for (const auto& h : out.stages[1].hypotheses) {
    CHECK(h.status == HypothesisStatus::Skipped);
    CHECK_FALSE(h.skip_reason.empty());
    CHECK_FALSE(h.reject);
  }
  for (const auto& call : fail.calls) CHECK(call.rfind("b|", 0) != 0);
}

TEST_CASE("matching gate runs only hypotheses rejected in the previous stage") {
  FakeRecords rec;
  rec.by_model["ours"] = {0.95, 0.96, 0.97, 0.98, 0.99};
  rec.by_model["a"] = {0.80, 0.81, 0.82, 0.83, 0.84};
  rec.by_model["b"] = {0.70, 0.71, 0.72, 0.73, 0.74};
  rec.overrides["a|d2|kidney"] = rec.by_model["ours"];

  auto out = run_plan(two_stage(GateMode::Matching), rec.source());
  CHECK(out.stages[0].hypotheses[0].reject);
  CHECK_FALSE(out.stages[0].hypotheses[1].reject);
  CHECK(out.stages[1].ran);
  CHECK(out.stages[1].hypotheses[0].status == HypothesisStatus::Tested);
  CHECK(out.stages[1].hypotheses[1].status == HypothesisStatus::Skipped);
  // The Holm family of stage 2 holds only the tested hypothesis.
  CHECK(out.stages[1].hypotheses[0].adjusted_p == out.stages[1].hypotheses[0].test.p_value);
  CHECK(std::count(rec.calls.begin(), rec.calls.end(), "b|d2|kidney") == 0);

  out = run_plan(two_stage(GateMode::All), rec.source());
  CHECK_FALSE(out.stages[1].ran);
}

TEST_CASE("the gate holds on random plans") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    FakeRecords rec;
    for (const char* m : {"ours", "a", "b"}) {
      std::vector<double> v(6);
      for (auto& x : v) x = d(rng) + (std::string(m) == "ours" ? 0.3 * (trial % 3) : 0.0);
      rec.by_model[m] = v;
    }
    const auto out = run_plan(two_stage(GateMode::All), rec.source());
    const bool all_rejected = std::all_of(out.stages[0].hypotheses.begin(), out.stages[0].hypotheses.end(),
                                          [](const auto& h) { return h.reject; });
    CHECK(out.stages[1].ran == all_rejected);
    if (!all_rejected)
      for (const auto& call : rec.calls) CHECK(call.rfind("b|", 0) != 0);
  }
}
