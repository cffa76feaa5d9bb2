#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <set>

#include "support/oracles.hpp"
#include "support/phantoms.hpp"
#include "volseg/detection.hpp"

using namespace volseg;

namespace {

OverlapTable table(std::size_t np, std::size_t nr, std::vector<LesionMatch> pairs) {
  return {np, nr, std::move(pairs)};
}

oracle::Assignment best(const OverlapTable& t, double threshold) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> edges;
  for (const auto& p : t.pairs)
    if (p.iou > threshold) edges[{p.pred_id, p.ref_id}] = p.iou;
  return oracle::best_assignment(t.pred_count, t.ref_count, edges);
}

double total_iou(const DetectionOutcome& o) {
  double s = 0.0;
  for (const auto& m : o.matches) s += m.iou;
  return s;
}

void check_well_formed(const DetectionOutcome& o, const OverlapTable& t) {
  std::set<std::uint32_t> preds, refs;
  for (const auto& m : o.matches) {
    CHECK(m.iou > o.threshold);
    CHECK(preds.insert(m.pred_id).second);
    CHECK(refs.insert(m.ref_id).second);
  }
  CHECK(o.tp() + o.fp() == t.pred_count);
  CHECK(o.tp() + o.fn() == t.ref_count);
  for (auto id : o.false_positives) CHECK_FALSE(preds.contains(id));
  for (auto id : o.false_negatives) CHECK_FALSE(refs.contains(id));
}

}  // namespace

TEST_CASE("worked example: one match, one spurious prediction, one miss") {
  const Grid g = oracle::make_grid(20, 4, 1);
  RegionMask ref(g), pred(g);
  for (std::size_t x = 0; x < 10; ++x) ref.set(x, 0, 0);  // ref 1: 10 voxels
  for (std::size_t x = 0; x < 6; ++x) pred.set(x, 0, 0);  // IoU 6/10
  ref.set(15, 2, 0);                                       // ref 2, never predicted
  pred.set(5, 3, 0);                                       // spurious prediction
  const auto pc = connected_components(pred), rc = connected_components(ref);
  REQUIRE(pc.size() == 2);
  REQUIRE(rc.size() == 2);
  for (double t : {0.0, 0.5}) {
    for (auto s : {MatchStrategy::Optimal, MatchStrategy::Greedy}) {
      const auto o = match_lesions(pc, rc, t, s);
      CHECK(o.tp() == 1);
      CHECK(o.fp() == 1);
      CHECK(o.fn() == 1);
      CHECK(o.matches[0].iou == 0.6);
      CHECK(o.precision.value == 0.5);
      CHECK(o.recall.value == 0.5);
      CHECK(o.f1.value == 0.5);
    }
  }
  CHECK(match_lesions(pc, rc, 0.6).tp() == 0);  // strict
}

TEST_CASE("identical component sets match completely") {
  std::mt19937_64 rng(1);
  const Grid g = oracle::make_grid(12, 12, 6);
  const auto p = phantom::random_lesion_pair(rng, g, 5);
  const auto cs = connected_components(p.ref);
  const auto o = match_lesions(cs, cs, 0.5);
  CHECK(o.tp() == cs.size());
  for (const auto& m : o.matches) {
    CHECK(m.iou == 1.0);
    CHECK(m.pred_id == m.ref_id);
  }
  if (cs.size() > 0) CHECK(o.f1.value == 1.0);
}

TEST_CASE("IoU exactly at the threshold is not a match") {
  const auto t = table(1, 1, {{1, 1, 0.5}});
  CHECK(match_lesions(t, 0.5).tp() == 0);
  CHECK(match_lesions(t, 0.4999).tp() == 1);
  CHECK_THROWS_AS(match_lesions(t, 1.0), Error);
  CHECK_THROWS_AS(match_lesions(t, -0.1), Error);
}

TEST_CASE("greedy is not optimal below 0.5; the default matcher is") {
  // Greedy takes (1,1) first and strands pred 2; the optimum matches both.
  const auto t = table(2, 2, {{1, 1, 0.4}, {1, 2, 0.3}, {2, 1, 0.2}});
  CHECK(match_lesions(t, 0.0, MatchStrategy::Greedy).tp() == 1);
  const auto o = match_lesions(t, 0.0);
  CHECK(o.tp() == 2);
  CHECK(o.matches == std::vector<LesionMatch>{{1, 2, 0.3}, {2, 1, 0.2}});
}

TEST_CASE("optimal matching equals the exhaustive oracle on random IoU tables") {
  std::mt19937_64 rng(707);
  std::uniform_int_distribution<std::size_t> count(0, 6);
  std::uniform_real_distribution<double> iou(0.0, 1.0);
  std::bernoulli_distribution edge(0.45);
  for (int trial = 0; trial < 600; ++trial) {
    OverlapTable t{count(rng), count(rng), {}};
    for (std::uint32_t p = 1; p <= t.pred_count; ++p)
      for (std::uint32_t r = 1; r <= t.ref_count; ++r)
        if (edge(rng)) t.pairs.push_back({p, r, trial % 4 == 0 ? std::round(iou(rng) * 4) / 4 : iou(rng)});
    for (double th : {0.0, 0.25, 0.5, 0.75}) {
      const auto o = match_lesions(t, th);
      const auto b = best(t, th);
      CHECK(o.tp() == b.cardinality);
      CHECK(total_iou(o) == doctest::Approx(b.total).epsilon(1e-9));
      check_well_formed(o, t);
    }
  }
}

TEST_CASE("on real component sets both strategies agree with the oracle at t >= 0.5") {
  std::mt19937_64 rng(808);
  int instances = 0;
  while (instances < 300) {
    const Grid g = oracle::make_grid(10, 10, 5, {0.8, 0.8, 2.5});
    const auto p = phantom::random_lesion_pair(rng, g, 6);
    const auto pc = connected_components(p.pred), rc = connected_components(p.ref);
    if (pc.size() > 6 || rc.size() > 6) continue;
    ++instances;
    const auto t = lesion_overlaps(pc, rc);
    for (const auto& pair : t.pairs) {
      const auto c = oracle::overlap(pc.mask_of(pair.pred_id), rc.mask_of(pair.ref_id));
      CHECK(pair.iou == static_cast<double>(c.both) / static_cast<double>(c.either));
    }
    std::size_t previous_tp = SIZE_MAX;
    for (double th : {0.0, 0.1, 0.3, 0.5, 0.7, 0.9}) {
      const auto o = match_lesions(t, th);
      const auto b = best(t, th);
      CHECK(o.tp() == b.cardinality);
      CHECK(total_iou(o) == doctest::Approx(b.total).epsilon(1e-9));
      CHECK(o.tp() <= previous_tp);
      previous_tp = o.tp();
      if (th >= 0.5) {
        const auto greedy = match_lesions(t, th, MatchStrategy::Greedy);
        CHECK(greedy.matches == o.matches);
      }
    }
  }
}

TEST_CASE("detection_metrics") {
  auto s = detection_metrics(1, 1, 1);
  CHECK(s.precision.value == 0.5);
  CHECK(s.recall.value == 0.5);
  CHECK(s.f1.value == 0.5);

  s = detection_metrics(0, 0, 0);
  CHECK(s.precision.reason == kNoLesions);
  CHECK(s.recall.reason == kNoLesions);
  CHECK(s.f1.reason == kNoLesions);

  s = detection_metrics(0, 2, 1);
  CHECK(s.precision.value == 0.0);
  CHECK(s.recall.value == 0.0);
  CHECK(s.f1.value == 0.0);

  s = detection_metrics(0, 3, 0);
  CHECK(s.recall.reason == kNoReference);
  CHECK_FALSE(s.precision.defined());

  s = detection_metrics(0, 0, 2);
  CHECK(s.precision.reason == kNoPredictions);
  CHECK(s.recall.value == 0.0);
  CHECK(s.f1.value == 0.0);

  s = detection_metrics(3, 1, 2);
  CHECK(s.precision.value == 0.75);
  CHECK(s.recall.value == 0.6);
  CHECK(*s.f1.value == doctest::Approx(2 * 0.75 * 0.6 / 1.35));
}

TEST_CASE("empty prediction and reference") {
  const Grid g = oracle::make_grid(4, 4, 4);
  const auto empty = connected_components(RegionMask(g));
  const auto o = match_lesions(empty, empty, 0.5);
  CHECK(o.tp() + o.fp() + o.fn() == 0);
  CHECK(o.f1.reason == kNoLesions);
}
