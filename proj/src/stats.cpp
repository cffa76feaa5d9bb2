#include "volseg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "volseg/volume.hpp"

namespace volseg {

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::EmptySample, "percentile of an empty list");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorKind::InvalidArgument, "percentile q must lie in [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  if (lo == hi) return v[lo];
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string_view to_string(TestMethod m) {
  return m == TestMethod::Exact ? "exact" : "normal-approximation";
}

std::vector<double> midranks(std::span<const double> pooled) {
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  std::vector<double> ranks(pooled.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && pooled[order[j]] == pooled[order[i]]) ++j;
    const double rank = static_cast<double>(i + j + 1) / 2.0;  // mean of 1-based ranks i+1..j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

std::vector<std::uint64_t> mann_whitney_null_counts(std::size_t n, std::size_t m) {
  // table[i][j][u]: arrangements of i "a" and j "b" values with U_a == u.
  // The largest pooled value either belongs to a (beating all j b's) or to b.
  std::vector<std::vector<std::vector<std::uint64_t>>> table(n + 1, std::vector<std::vector<std::uint64_t>>(m + 1));
  for (std::size_t i = 0; i <= n; ++i)
    for (std::size_t j = 0; j <= m; ++j) {
      auto& cell = table[i][j];
      cell.assign(i * j + 1, 0);
      if (i == 0 || j == 0) {
        cell[0] = 1;
        continue;
      }
      const auto& with_a = table[i - 1][j];
      const auto& with_b = table[i][j - 1];
      for (std::size_t u = 0; u < with_a.size(); ++u) cell[u + j] += with_a[u];
      for (std::size_t u = 0; u < with_b.size(); ++u) cell[u] += with_b[u];
    }
  return table[n][m];
}

StatTestResult mann_whitney_u_greater(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::EmptySample, "Mann-Whitney U needs two non-empty samples");
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  for (double v : pooled)
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "Mann-Whitney U samples must be finite");
  const auto ranks = midranks(pooled);
  const double rank_sum_a = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(n), 0.0);
  const double nd = static_cast<double>(n), md = static_cast<double>(m);

  StatTestResult r;
  r.n = n;
  r.m = m;
  r.u = rank_sum_a - nd * (nd + 1.0) / 2.0;

  // Tie groups for the variance correction.
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  bool ties = false;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    if (t > 1) ties = true;
    tie_term += t * t * t - t;
    i = j;
  }

  if (!ties && n * m <= kExactCellLimit) {
    const auto counts = mann_whitney_null_counts(n, m);
    const auto observed = static_cast<std::size_t>(std::llround(r.u));
    std::uint64_t total = 0, upper = 0;
    for (std::size_t u = 0; u < counts.size(); ++u) {
      total += counts[u];
      if (u >= observed) upper += counts[u];
    }
    r.method = TestMethod::Exact;
    r.p_value = static_cast<double>(upper) / static_cast<double>(total);
    return r;
  }

  r.method = TestMethod::NormalApproximation;
  const double big_n = nd + md;
  const double mean = nd * md / 2.0;
  const double var = nd * md / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
  if (!(var > 0.0)) {
    r.p_value = 1.0;  // every value tied: no evidence either way
    return r;
  }
  const double z = (r.u - mean - 0.5) / std::sqrt(var);
  r.p_value = std::clamp(0.5 * std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
  return r;
}

namespace {

void check_pvalues(std::span<const double> pvalues, double alpha) {
  for (double p : pvalues)
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, "p-value outside [0, 1]");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidArgument, "alpha must lie in (0, 1)");
}

}  // namespace

CorrectionResult holm_bonferroni(std::span<const double> pvalues, double alpha, std::vector<std::string> labels) {
  check_pvalues(pvalues, alpha);
  const std::size_t m = pvalues.size();
  if (labels.empty())
    for (std::size_t i = 0; i < m; ++i) labels.push_back("H" + std::to_string(i + 1));
  if (labels.size() != m) throw Error(ErrorKind::InvalidArgument, "one label per p-value required");

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pvalues[i] < pvalues[j]; });

  CorrectionResult out;
  out.labels = std::move(labels);
  out.raw.assign(pvalues.begin(), pvalues.end());
  out.adjusted.assign(m, 1.0);
  out.reject.assign(m, false);
  out.alpha = alpha;

  double running = 0.0;
  bool stepping = true;
  for (std::size_t rank = 0; rank < m; ++rank) {
    const std::size_t idx = order[rank];
    running = std::max(running, std::min(1.0, static_cast<double>(m - rank) * pvalues[idx]));
    out.adjusted[idx] = running;
    stepping = stepping && running < alpha;
    out.reject[idx] = stepping;
  }
  return out;
}

CorrectionResult bonferroni(std::span<const double> pvalues, double alpha) {
  check_pvalues(pvalues, alpha);
  CorrectionResult out;
  out.alpha = alpha;
  out.raw.assign(pvalues.begin(), pvalues.end());
  for (std::size_t i = 0; i < pvalues.size(); ++i) {
    out.labels.push_back("H" + std::to_string(i + 1));
    out.adjusted.push_back(std::min(1.0, static_cast<double>(pvalues.size()) * pvalues[i]));
    out.reject.push_back(out.adjusted.back() < alpha);
  }
  return out;
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptySample, "cannot summarize an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  Summary s;
  s.n = v.size();
  s.min = v.front();
  s.max = v.back();
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  s.median = percentile(v, 0.5);
  s.q1 = percentile(v, 0.25);
  s.q3 = percentile(v, 0.75);
  s.p05 = percentile(v, 0.05);
  s.p95 = percentile(v, 0.95);
  const double iqr = s.q3 - s.q1;
  const double fence_lo = s.q1 - 1.5 * iqr;
  const double fence_hi = s.q3 + 1.5 * iqr;
  s.whisker_lo = s.q1;
  s.whisker_hi = s.q3;
  for (double x : v) {
    if (x < fence_lo || x > fence_hi) {
      s.outliers.push_back(x);
      continue;
    }
    s.whisker_lo = std::min(s.whisker_lo, x);
    s.whisker_hi = std::max(s.whisker_hi, x);
  }
  return s;
}

PlanOutcome run_plan(const StatsPlan& plan, const SampleSource& samples) {
  if (!(plan.alpha > 0.0 && plan.alpha < 1.0)) throw Error(ErrorKind::InvalidArgument, "plan alpha must lie in (0, 1)");
  PlanOutcome out;
  out.alpha = plan.alpha;
  out.metric = plan.metric;
  out.test_model = plan.test_model;
  out.stages.reserve(plan.stages.size());

  const StageOutcome* previous = nullptr;
  for (const PlanStage& stage : plan.stages) {
    StageOutcome so;
    so.name = stage.name;
    so.reference_model = stage.reference_model;

    bool stage_open = true;
    if (previous != nullptr && stage.gate == GateMode::All) {
      stage_open = previous->ran && !previous->hypotheses.empty() &&
                   std::all_of(previous->hypotheses.begin(), previous->hypotheses.end(),
                               [](const HypothesisOutcome& h) { return h.reject; });
    }

    std::vector<std::size_t> tested;
    for (const Hypothesis& h : stage.hypotheses) {
      HypothesisOutcome ho;
      ho.hypothesis = h;
      bool open = stage_open;
      if (open && previous != nullptr && stage.gate == GateMode::Matching) {
        open = std::any_of(previous->hypotheses.begin(), previous->hypotheses.end(),
                           [&](const HypothesisOutcome& p) { return p.hypothesis == h && p.reject; });
      }
      if (!open) {
        ho.skip_reason = "gated: previous stage '" + (previous ? previous->name : std::string{}) + "' not rejected";
      } else {
        const auto a = samples(plan.test_model, h.dataset, h.region);
        const auto b = samples(stage.reference_model, h.dataset, h.region);
        ho.test = mann_whitney_u_greater(a, b);
        ho.status = HypothesisStatus::Tested;
        tested.push_back(so.hypotheses.size());
      }
      so.hypotheses.push_back(std::move(ho));
    }

    if (!tested.empty()) {
      so.ran = true;
      std::vector<double> raw;
      for (std::size_t i : tested) raw.push_back(so.hypotheses[i].test.p_value);
      const auto corr = holm_bonferroni(raw, plan.alpha);
      for (std::size_t k = 0; k < tested.size(); ++k) {
        so.hypotheses[tested[k]].adjusted_p = corr.adjusted[k];
        so.hypotheses[tested[k]].reject = corr.reject[k];
      }
    }
    out.stages.push_back(std::move(so));
    previous = &out.stages.back();
  }
  return out;
}

}  // namespace volseg
