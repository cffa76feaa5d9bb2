#include "volseg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "volseg/volume_io.hpp"

namespace volseg {

namespace {

const std::set<std::string> kContrastPhases{"early-venous", "delayed-venous", "arterial", "unknown"};
const std::set<std::string> kSubtypes{"ccRCC", "pRCC", "chrRCC", "RO", "other", "unknown"};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw Error(ErrorKind::InvalidArgument, "unterminated quote in manifest line: " + line);
  fields.push_back(std::move(cur));
  return fields;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

RegionMask landmark_mask(const LabelVolume& v) {
  std::vector<std::uint8_t> bits(v.size());
  const auto labels = v.labels();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = labels[i] != 0;
  return RegionMask(v.grid(), std::move(bits));
}

bool box_contains_all(const RegionMask& m, const BoundingBox& box) {
  const auto bb = bounding_box(m);
  if (!bb) return true;
  for (int a = 0; a < 3; ++a)
    if (bb->lo[a] < box.lo[a] || bb->hi[a] > box.hi[a]) return false;
  return true;
}

CaseRecord failed(CaseRecord r, const Error& e) {
  r.status = CaseStatus::Failed;
  r.failure_kind = std::string(to_string(e.kind()));
  r.failure_message = e.what();
  return r;
}

}  // namespace

std::vector<CaseManifestEntry> parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::InvalidArgument, "manifest is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  const auto expected = split_csv_line(kManifestHeader);
  std::vector<std::string> trimmed;
  for (const auto& h : header) trimmed.push_back(trim(h));
  if (trimmed != expected)
    throw Error(ErrorKind::InvalidArgument, std::string("manifest header must be: ") + kManifestHeader);

  std::vector<CaseManifestEntry> out;
  std::set<std::string> ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != expected.size())
      throw Error(ErrorKind::InvalidArgument, "manifest line " + std::to_string(line_no) + " has " +
                                                  std::to_string(f.size()) + " fields, expected " +
                                                  std::to_string(expected.size()));
    for (auto& s : f) s = trim(s);
    CaseManifestEntry e;
    e.case_id = f[0];
    if (e.case_id.empty()) throw Error(ErrorKind::InvalidArgument, "manifest line " + std::to_string(line_no) + ": empty case_id");
    if (!ids.insert(e.case_id).second) throw Error(ErrorKind::InvalidArgument, "duplicate case_id: " + e.case_id);
    if (f[1].empty() || f[2].empty())
      throw Error(ErrorKind::InvalidArgument, "case " + e.case_id + ": prediction and reference paths are required");
    e.pred_path = resolve(f[1], base_dir);
    e.ref_path = resolve(f[2], base_dir);
    if (!f[3].empty()) e.lung_mask_path = resolve(f[3], base_dir);
    if (!f[4].empty()) e.bladder_mask_path = resolve(f[4], base_dir);
    if (!f[5].empty()) {
      const auto colon = f[5].find(':');
      e.pred_scheme = f[5].substr(0, colon);
      e.ref_scheme = colon == std::string::npos ? e.pred_scheme : f[5].substr(colon + 1);
      LabelScheme::by_name(e.pred_scheme);
      LabelScheme::by_name(e.ref_scheme);
    }
    if (!f[6].empty()) e.metadata.sex = f[6];
    if (!f[7].empty()) {
      std::size_t used = 0;
      double age = 0.0;
      try {
        age = std::stod(f[7], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != f[7].size() || !std::isfinite(age))
        throw Error(ErrorKind::InvalidArgument, "case " + e.case_id + ": age is not a number: " + f[7]);
      e.metadata.age = age;
    }
    if (!f[8].empty()) e.metadata.contrast_phase = f[8];
    if (!kContrastPhases.contains(e.metadata.contrast_phase))
      throw Error(ErrorKind::InvalidArgument, "case " + e.case_id + ": unknown contrast phase " + f[8]);
    if (!f[9].empty()) e.metadata.subtype = f[9];
    if (!kSubtypes.contains(e.metadata.subtype))
      throw Error(ErrorKind::InvalidArgument, "case " + e.case_id + ": unknown histologic subtype " + f[9]);
    if (!f[10].empty()) e.metadata.dataset = f[10];
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<CaseManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

void EvaluationOptions::validate() const {
  postprocess_config.validate();
  for (double t : detection_thresholds)
    if (!(t >= 0.0 && t < 1.0)) throw Error(ErrorKind::InvalidArgument, "detection thresholds must lie in [0, 1)");
  if (!(margin_mm >= 0.0)) throw Error(ErrorKind::InvalidArgument, "ROI margin must be non-negative");
}

const RegionMetrics& CaseRecord::region(Region r) const {
  for (const auto& m : regions)
    if (m.region == r) return m;
  throw Error(ErrorKind::InvalidArgument, "record has no region " + std::string(to_string(r)));
}

LabelVolume select_annotated_side(const LabelVolume& pred, const LabelVolume& ref, Connectivity connectivity) {
  assert_same_grid(pred.grid(), ref.grid());
  const RegionMask ref_mask = extract_region(ref, Region::KidneyPlusAbnormality);
  const ComponentSet comps = connected_components(extract_region(pred, Region::KidneyPlusAbnormality), connectivity);
  LabelVolume out = pred;
  auto labels = out.labels();
  for (const Component& c : comps.components) {
    const bool overlaps = std::any_of(c.voxels.begin(), c.voxels.end(), [&](std::size_t off) { return ref_mask.test(off); });
    if (!overlaps)
      for (std::size_t off : c.voxels) labels[off] = kBackground;
  }
  return out;
}

CaseRecord evaluate_volumes(const std::string& case_id, const CaseMetadata& metadata, const LabelVolume& pred_raw,
                            const LabelVolume& ref_raw, const LabelScheme& pred_scheme, const LabelScheme& ref_scheme,
                            const std::optional<LabelVolume>& lung, const std::optional<LabelVolume>& bladder,
                            const EvaluationOptions& options) {
  CaseRecord rec;
  rec.case_id = case_id;
  rec.metadata = metadata;
  try {
    options.validate();
    LabelVolume pred = harmonize_labels(pred_raw, pred_scheme);
    LabelVolume ref = harmonize_labels(ref_raw, ref_scheme);
    assert_same_grid(pred.grid(), ref.grid());

    if (options.roi_crop) {
      if (!lung || !bladder) {
        rec.warnings.push_back("roi-crop: landmark masks not supplied; volume left uncropped");
      } else {
        try {
          assert_same_grid(pred.grid(), lung->grid());
          assert_same_grid(pred.grid(), bladder->grid());
          const RoiBox roi = roi_from_landmarks(landmark_mask(*lung), landmark_mask(*bladder), options.margin_mm);
          if (!box_contains_all(extract_region(ref, Region::KidneyPlusAbnormality), roi.box)) {
            rec.warnings.push_back("roi-crop: box would clip reference foreground; volume left uncropped");
          } else {
            pred = crop_to(pred, roi.box);
            ref = crop_to(ref, roi.box);
            rec.roi = roi;
          }
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::NoLandmark && e.kind() != ErrorKind::GridMismatch) throw;
          rec.warnings.push_back(std::string("roi-crop: ") + e.what() + "; volume left uncropped");
        }
      }
    }

    if (options.postprocess) {
      auto cleaned = postprocess(pred, options.postprocess_config);
      pred = std::move(cleaned.volume);
      rec.postprocess = std::move(cleaned.report);
    }

    if (options.annotated_side_datasets.contains(metadata.dataset)) {
      pred = select_annotated_side(pred, ref, options.lesion_connectivity);
      rec.annotated_side_only = true;
    }

    for (std::size_t i = 0; i < kAllRegions.size(); ++i) {
      const Region r = kAllRegions[i];
      rec.regions[i] = region_metrics(extract_region(pred, r), extract_region(ref, r), r, options.hausdorff_mode);
      if (!rec.regions[i].hd95_mm.defined())
        rec.warnings.push_back(std::string(to_string(r)) + ": hd95 undefined (" + rec.regions[i].hd95_mm.reason + ")");
    }

    const ComponentSet pred_lesions = connected_components(extract_region(pred, Region::Abnormality), options.lesion_connectivity);
    const ComponentSet ref_lesions = connected_components(extract_region(ref, Region::Abnormality), options.lesion_connectivity);
    const OverlapTable overlaps = lesion_overlaps(pred_lesions, ref_lesions);
    for (double t : options.detection_thresholds)
      rec.detection.push_back(match_lesions(overlaps, t, options.match_strategy));
  } catch (const Error& e) {
    return failed(std::move(rec), e);
  }
  return rec;
}

CaseRecord evaluate_case(const CaseManifestEntry& entry, const EvaluationOptions& options) {
  CaseRecord rec;
  rec.case_id = entry.case_id;
  rec.metadata = entry.metadata;
  rec.pred_path = entry.pred_path.string();
  rec.ref_path = entry.ref_path.string();
  try {
    const LabelScheme pred_scheme = LabelScheme::by_name(entry.pred_scheme);
    const LabelScheme ref_scheme = LabelScheme::by_name(entry.ref_scheme);
    const LabelVolume pred = load_volume(entry.pred_path);
    const LabelVolume ref = load_volume(entry.ref_path);
    std::optional<LabelVolume> lung, bladder;
    if (options.roi_crop) {
      if (entry.lung_mask_path) lung = load_volume(*entry.lung_mask_path);
      if (entry.bladder_mask_path) bladder = load_volume(*entry.bladder_mask_path);
    }
    CaseRecord out = evaluate_volumes(entry.case_id, entry.metadata, pred, ref, pred_scheme, ref_scheme, lung, bladder, options);
    out.pred_path = rec.pred_path;
    out.ref_path = rec.ref_path;
    return out;
  } catch (const Error& e) {
    return failed(std::move(rec), e);
  }
}

std::vector<CaseRecord> evaluate_all(const std::vector<CaseManifestEntry>& entries, const EvaluationOptions& options,
                                     std::size_t workers) {
  if (workers == 0) throw Error(ErrorKind::InvalidArgument, "worker count must be at least 1");
  std::vector<CaseRecord> records(entries.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) records[i] = evaluate_case(entries[i], options);
  };
  const std::size_t n_threads = std::min(workers, std::max<std::size_t>(entries.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  std::sort(records.begin(), records.end(), [](const CaseRecord& a, const CaseRecord& b) { return a.case_id < b.case_id; });
  return records;
}

namespace {

struct Bucket {
  std::vector<double> values;
  std::size_t undefined = 0;

  void add(const MetricValue& v) {
    if (v.defined()) values.push_back(*v.value);
    else ++undefined;
  }
};

std::optional<Summary> maybe_summary(const Bucket& b) {
  if (b.values.empty()) return std::nullopt;
  return summarize(b.values);
}

}  // namespace

std::vector<MetricSummaryRow> aggregate(std::vector<CaseRecord> records) {
  std::sort(records.begin(), records.end(), [](const CaseRecord& a, const CaseRecord& b) { return a.case_id < b.case_id; });
  std::map<std::string, std::vector<const CaseRecord*>> by_dataset;
  for (const auto& r : records)
    if (r.status == CaseStatus::Ok) by_dataset[r.metadata.dataset].push_back(&r);

  std::vector<MetricSummaryRow> rows;
  for (const auto& [dataset, recs] : by_dataset) {
    for (Region region : kAllRegions) {
      Bucket dice_b, hd_b;
      for (const CaseRecord* r : recs) {
        dice_b.add(r->region(region).dice);
        hd_b.add(r->region(region).hd95_mm);
      }
      rows.push_back({dataset, std::string(to_string(region)), "dice", std::nullopt, dice_b.undefined, maybe_summary(dice_b)});
      rows.push_back({dataset, std::string(to_string(region)), "hd95_mm", std::nullopt, hd_b.undefined, maybe_summary(hd_b)});
    }
    std::map<double, std::array<Bucket, 3>> det;
    for (const CaseRecord* r : recs)
      for (const auto& d : r->detection) {
        auto& b = det[d.threshold];
        b[0].add(d.precision);
        b[1].add(d.recall);
        b[2].add(d.f1);
      }
    for (const auto& [t, b] : det) {
      rows.push_back({dataset, "abnormality", "precision", t, b[0].undefined, maybe_summary(b[0])});
      rows.push_back({dataset, "abnormality", "recall", t, b[1].undefined, maybe_summary(b[1])});
      rows.push_back({dataset, "abnormality", "f1", t, b[2].undefined, maybe_summary(b[2])});
    }
  }
  return rows;
}

std::string age_group(std::optional<double> age, const std::vector<double>& edges) {
  if (!age) return "unknown";
  if (edges.size() < 2) throw Error(ErrorKind::InvalidArgument, "age binning needs at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw Error(ErrorKind::InvalidArgument, "age bin edges must be increasing");
  auto fmt = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };
  if (*age < edges.front()) return "<" + fmt(edges.front());
  if (*age >= edges.back()) return ">=" + fmt(edges.back());
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (*age >= edges[i] && *age < edges[i + 1]) {
      const bool integral = edges[i] == std::floor(edges[i]) && edges[i + 1] == std::floor(edges[i + 1]);
      if (integral) return fmt(edges[i]) + "-" + fmt(edges[i + 1] - 1);
      return "[" + fmt(edges[i]) + "," + fmt(edges[i + 1]) + ")";
    }
  }
  return "unknown";
}

std::string metadata_value(const CaseMetadata& m, const std::string& key, const std::vector<double>& age_bins) {
  if (key == "sex") return m.sex.empty() ? "unknown" : m.sex;
  if (key == "contrast_phase") return m.contrast_phase;
  if (key == "subtype") return m.subtype;
  if (key == "dataset") return m.dataset;
  if (key == "age") {
    if (age_bins.empty()) throw Error(ErrorKind::InvalidArgument, "grouping by age requires bin edges");
    return age_group(m.age, age_bins);
  }
  throw Error(ErrorKind::UnknownField, "unknown subgroup key: " + key);
}

std::vector<SubgroupSummary> subgroup_summarize(const std::vector<CaseRecord>& records, const std::string& key,
                                                const std::vector<double>& age_bins) {
  // Group order: age bins ascending, otherwise lexicographic; "unknown" last.
  auto order_key = [&](const std::string& group) -> std::pair<int, std::string> {
    if (group == "unknown") return {3, group};
    if (key == "age" && !age_bins.empty()) {
      if (group.front() == '<') return {0, ""};
      if (group.rfind(">=", 0) == 0) return {2, ""};
      for (std::size_t i = 0; i + 1 < age_bins.size(); ++i)
        if (age_group(age_bins[i], age_bins) == group) {
          char buf[16];
          std::snprintf(buf, sizeof(buf), "%08zu", i);
          return {1, buf};
        }
    }
    return {1, group};
  };

  std::map<std::pair<int, std::string>, std::pair<std::string, std::vector<const CaseRecord*>>> groups;
  for (const auto& r : records) {
    if (r.status != CaseStatus::Ok) continue;
    const std::string g = metadata_value(r.metadata, key, age_bins);
    auto& slot = groups[order_key(g)];
    slot.first = g;
    slot.second.push_back(&r);
  }
  if (groups.empty()) metadata_value(CaseMetadata{}, key, age_bins);  // still reject unknown keys

  std::vector<SubgroupSummary> out;
  for (const char* metric : {"dice", "hd95_mm"}) {
    for (Region region : kAllRegions) {
      for (const auto& [_, slot] : groups) {
        Bucket b;
        for (const CaseRecord* r : slot.second) {
          const auto& rm = r->region(region);
          b.add(std::string_view(metric) == "dice" ? rm.dice : rm.hd95_mm);
        }
        out.push_back({key, slot.first, metric, std::string(to_string(region)), b.undefined, maybe_summary(b)});
      }
    }
  }
  return out;
}

}  // namespace volseg
