#include "volseg/detection.hpp"

#include <algorithm>
#include <limits>
#include <map>

namespace volseg {

namespace {

/// Minimum-cost assignment of every row to a distinct column (rows <= cols),
/// classic O(n^2 m) potentials formulation. Returns column per row.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const std::size_t m = n == 0 ? 0 : cost[0].size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<bool> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) assignment[p[j] - 1] = j - 1;
  return assignment;
}

std::vector<LesionMatch> match_greedy(std::vector<LesionMatch> candidates) {
  std::sort(candidates.begin(), candidates.end(), [](const LesionMatch& a, const LesionMatch& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.pred_id != b.pred_id) return a.pred_id < b.pred_id;
    return a.ref_id < b.ref_id;
  });
  std::vector<LesionMatch> out;
  std::map<std::uint32_t, bool> pred_used, ref_used;
  for (const auto& c : candidates) {
    if (pred_used[c.pred_id] || ref_used[c.ref_id]) continue;
    pred_used[c.pred_id] = ref_used[c.ref_id] = true;
    out.push_back(c);
  }
  return out;
}

std::vector<LesionMatch> match_optimal(const std::vector<LesionMatch>& candidates) {
  // Without conflicts the candidate set is already a matching.
  std::map<std::uint32_t, int> pred_deg, ref_deg;
  bool conflict = false;
  for (const auto& c : candidates) {
    const int dp = ++pred_deg[c.pred_id];
    const int dr = ++ref_deg[c.ref_id];
    conflict |= dp > 1 || dr > 1;
  }
  if (!conflict) return candidates;

  std::vector<std::uint32_t> preds, refs;
  for (const auto& [id, _] : pred_deg) preds.push_back(id);
  for (const auto& [id, _] : ref_deg) refs.push_back(id);
  const bool transpose = preds.size() > refs.size();
  const auto& rows = transpose ? refs : preds;
  const auto& cols = transpose ? preds : refs;
  auto row_of = [&](std::uint32_t id) { return std::lower_bound(rows.begin(), rows.end(), id) - rows.begin(); };
  auto col_of = [&](std::uint32_t id) { return std::lower_bound(cols.begin(), cols.end(), id) - cols.begin(); };

  // Any extra match outweighs every possible IoU total, so cardinality wins first.
  const double bonus = static_cast<double>(std::min(preds.size(), refs.size())) + 1.0;
  std::vector<std::vector<double>> cost(rows.size(), std::vector<double>(cols.size(), 0.0));
  std::vector<std::vector<const LesionMatch*>> cell(rows.size(), std::vector<const LesionMatch*>(cols.size(), nullptr));
  for (const auto& c : candidates) {
    const auto r = transpose ? row_of(c.ref_id) : row_of(c.pred_id);
    const auto k = transpose ? col_of(c.pred_id) : col_of(c.ref_id);
    cost[r][k] = -(bonus + c.iou);
    cell[r][k] = &c;
  }
  const auto assignment = hungarian(cost);
  std::vector<LesionMatch> out;
  for (std::size_t r = 0; r < assignment.size(); ++r)
    if (const LesionMatch* m = cell[r][assignment[r]]) out.push_back(*m);
  return out;
}

}  // namespace

OverlapTable lesion_overlaps(const ComponentSet& pred, const ComponentSet& ref) {
  assert_same_grid(pred.grid, ref.grid);
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> inter;
  for (std::size_t i = 0; i < pred.ids.size(); ++i)
    if (pred.ids[i] != 0 && ref.ids[i] != 0) ++inter[{pred.ids[i], ref.ids[i]}];

  OverlapTable t;
  t.pred_count = pred.size();
  t.ref_count = ref.size();
  for (const auto& [key, n] : inter) {
    const auto a = pred[key.first].voxel_count();
    const auto b = ref[key.second].voxel_count();
    t.pairs.push_back({key.first, key.second, static_cast<double>(n) / static_cast<double>(a + b - n)});
  }
  return t;
}

DetectionScores detection_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
  DetectionScores s;
  if (tp + fn == 0) {
    const char* why = tp + fp == 0 ? kNoLesions : kNoReference;
    s.precision = s.recall = s.f1 = MetricValue::undefined(why);
    return s;
  }
  const double t = static_cast<double>(tp);
  s.recall = MetricValue::of(t / static_cast<double>(tp + fn));
  s.precision = tp + fp == 0 ? MetricValue::undefined(kNoPredictions) : MetricValue::of(t / static_cast<double>(tp + fp));
  if (tp == 0) {
    s.f1 = MetricValue::of(0.0);
  } else {
    const double p = *s.precision.value, r = *s.recall.value;
    s.f1 = MetricValue::of(2.0 * p * r / (p + r));
  }
  return s;
}

DetectionOutcome match_lesions(const OverlapTable& overlaps, double threshold, MatchStrategy strategy) {
  if (!(threshold >= 0.0 && threshold < 1.0))
    throw Error(ErrorKind::InvalidArgument, "detection threshold must lie in [0, 1)");
  std::vector<LesionMatch> candidates;
  for (const auto& p : overlaps.pairs)
    if (p.iou > threshold) candidates.push_back(p);

  DetectionOutcome o;
  o.threshold = threshold;
  o.matches = strategy == MatchStrategy::Greedy ? match_greedy(std::move(candidates)) : match_optimal(candidates);
  std::sort(o.matches.begin(), o.matches.end(),
            [](const LesionMatch& a, const LesionMatch& b) { return a.pred_id < b.pred_id; });

  std::vector<bool> pred_hit(overlaps.pred_count + 1, false), ref_hit(overlaps.ref_count + 1, false);
  for (const auto& m : o.matches) pred_hit[m.pred_id] = ref_hit[m.ref_id] = true;
  for (std::uint32_t id = 1; id <= overlaps.pred_count; ++id)
    if (!pred_hit[id]) o.false_positives.push_back(id);
  for (std::uint32_t id = 1; id <= overlaps.ref_count; ++id)
    if (!ref_hit[id]) o.false_negatives.push_back(id);

  const auto scores = detection_metrics(o.tp(), o.fp(), o.fn());
  o.precision = scores.precision;
  o.recall = scores.recall;
  o.f1 = scores.f1;
  return o;
}

DetectionOutcome match_lesions(const ComponentSet& pred, const ComponentSet& ref, double threshold,
                               MatchStrategy strategy) {
  return match_lesions(lesion_overlaps(pred, ref), threshold, strategy);
}

}  // namespace volseg
