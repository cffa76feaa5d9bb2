#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace volseg {

/// Linear interpolation between closest ranks: h = q (n - 1).
double percentile(std::span<const double> values, double q);

enum class TestMethod { Exact, NormalApproximation };

std::string_view to_string(TestMethod m);

struct StatTestResult {
  double u = 0.0;        // U statistic of the first sample
  double p_value = 1.0;  // one-sided, alternative "first sample is greater"
  TestMethod method = TestMethod::Exact;
  std::size_t n = 0;
  std::size_t m = 0;
};

/// Midranks of the pooled sample, returned in input order (a then b).
std::vector<double> midranks(std::span<const double> pooled);

/// Mann-Whitney U test of "a is stochastically greater than b". The exact
/// null distribution is used when n*m <= 400 and there are no ties; the
/// normal approximation with tie-corrected variance and continuity
/// correction otherwise.
StatTestResult mann_whitney_u_greater(std::span<const double> a, std::span<const double> b);

/// Exact null distribution of U for tie-free samples: counts[u] is the number
/// of the C(n+m, n) rank assignments giving U == u.
std::vector<std::uint64_t> mann_whitney_null_counts(std::size_t n, std::size_t m);

inline constexpr std::size_t kExactCellLimit = 400;

struct CorrectionResult {
  std::vector<std::string> labels;
  std::vector<double> raw;
  std::vector<double> adjusted;
  std::vector<bool> reject;
  double alpha = 0.05;
};

/// Holm-Bonferroni step-down adjustment. Outputs keep the input order.
CorrectionResult holm_bonferroni(std::span<const double> pvalues, double alpha = 0.05,
                                 std::vector<std::string> labels = {});

/// Plain Bonferroni, min(1, m p), for comparison.
CorrectionResult bonferroni(std::span<const double> pvalues, double alpha = 0.05);

/// Box-plot and Table-3 style description of one sample.
struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample (n - 1) divisor; 0 when n == 1
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;  // furthest points within 1.5 IQR of the box
  double whisker_hi = 0.0;
  double p05 = 0.0;
  double p95 = 0.0;
  std::vector<double> outliers;  // ascending
};

Summary summarize(std::span<const double> values);

// Hierarchical testing plan: each stage is one model comparison whose
// hypotheses form one Holm family. A stage only runs when its gate holds.

enum class GateMode {
  All,       // previous stage must reject every hypothesis
  Matching,  // a hypothesis runs only if the same dataset/region was rejected before
};

struct Hypothesis {
  std::string dataset;
  std::string region;

  std::string label() const { return dataset + "/" + region; }
  bool operator==(const Hypothesis&) const = default;
};

struct PlanStage {
  std::string name;
  std::string reference_model;
  GateMode gate = GateMode::All;
  std::vector<Hypothesis> hypotheses;
};

struct StatsPlan {
  double alpha = 0.05;
  std::string metric = "dice";
  std::string test_model;
  std::vector<PlanStage> stages;
};

enum class HypothesisStatus { Tested, Skipped };

struct HypothesisOutcome {
  Hypothesis hypothesis;
  HypothesisStatus status = HypothesisStatus::Skipped;
  std::string skip_reason;
  StatTestResult test;
  double adjusted_p = 1.0;
  bool reject = false;
};

struct StageOutcome {
  std::string name;
  std::string reference_model;
  bool ran = false;
  std::vector<HypothesisOutcome> hypotheses;
};

struct PlanOutcome {
  double alpha = 0.05;
  std::string metric;
  std::string test_model;
  std::vector<StageOutcome> stages;
};

/// Supplies the per-case metric sample for (model, dataset, region).
using SampleSource =
    std::function<std::vector<double>(const std::string& model, const std::string& dataset, const std::string& region)>;

PlanOutcome run_plan(const StatsPlan& plan, const SampleSource& samples);

}  // namespace volseg
