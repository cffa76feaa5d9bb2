#include "volseg/report.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace volseg {

std::string format_number(double v) {
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Json to_json(const MetricValue& v) {
  Json j;
  j["value"] = v.value ? Json(*v.value) : Json(nullptr);
  if (!v.defined()) j["undefined"] = v.reason;
  return j;
}

MetricValue metric_value_from_json(const Json& j) {
  if (j.at("value").is_null()) return MetricValue::undefined(j.value("undefined", std::string("undefined")));
  return MetricValue::of(j.at("value").get<double>());
}

Json to_json(const PostprocessReport& r) {
  Json j;
  j["config"] = {{"volume_exemption_mm3", r.config.volume_exemption_mm3},
                 {"min_axial_diameter_mm", r.config.min_axial_diameter_mm},
                 {"connectivity", static_cast<int>(r.config.connectivity)}};
  Json comps = Json::array();
  for (const auto& d : r.decisions)
    comps.push_back({{"id", d.component_id},
                     {"voxels", d.voxel_count},
                     {"volume_mm3", d.volume_mm3},
                     {"axial_diameter_mm", d.axial_diameter_mm},
                     {"attached", d.attached},
                     {"action", std::string(to_string(d.action))}});
  j["components"] = std::move(comps);
  return j;
}

Json to_json(const DetectionOutcome& o) {
  Json matches = Json::array();
  for (const auto& m : o.matches) matches.push_back({{"pred_id", m.pred_id}, {"ref_id", m.ref_id}, {"iou", m.iou}});
  return {{"threshold", o.threshold},
          {"tp", o.tp()},
          {"fp", o.fp()},
          {"fn", o.fn()},
          {"matches", std::move(matches)},
          {"false_positive_ids", o.false_positives},
          {"false_negative_ids", o.false_negatives},
          {"precision", to_json(o.precision)},
          {"recall", to_json(o.recall)},
          {"f1", to_json(o.f1)}};
}

namespace {

Json to_json(const CaseMetadata& m) {
  return {{"dataset", m.dataset},
          {"sex", m.sex},
          {"age", m.age ? Json(*m.age) : Json(nullptr)},
          {"contrast_phase", m.contrast_phase},
          {"subtype", m.subtype}};
}

}  // namespace

Json to_json(const CaseRecord& r) {
  Json j;
  j["schema"] = kCaseSchema;
  j["case_id"] = r.case_id;
  j["pred_path"] = r.pred_path;
  j["ref_path"] = r.ref_path;
  j["metadata"] = to_json(r.metadata);
  j["status"] = r.status == CaseStatus::Ok ? "ok" : "failed";
  j["warnings"] = r.warnings;
  if (r.status == CaseStatus::Failed) {
    j["failure"] = {{"kind", r.failure_kind}, {"message", r.failure_message}};
    return j;
  }
  Json regions = Json::object();
  for (const auto& m : r.regions)
    regions[std::string(to_string(m.region))] = {{"dice", to_json(m.dice)},
                                                 {"hd95_mm", to_json(m.hd95_mm)},
                                                 {"pred_volume_mm3", m.pred_volume_mm3},
                                                 {"ref_volume_mm3", m.ref_volume_mm3}};
  j["regions"] = std::move(regions);
  Json det = Json::array();
  for (const auto& d : r.detection) det.push_back(to_json(d));
  j["detection"] = std::move(det);
  j["postprocess"] = r.postprocess ? to_json(*r.postprocess) : Json(nullptr);
  if (r.roi)
    j["roi"] = {{"lo", r.roi->box.lo}, {"hi", r.roi->box.hi}, {"provenance", r.roi->provenance}};
  else
    j["roi"] = nullptr;
  j["annotated_side_only"] = r.annotated_side_only;
  return j;
}

CaseRecord case_record_from_json(const Json& j) {
  if (j.value("schema", std::string{}) != kCaseSchema)
    throw Error(ErrorKind::UnsupportedFormat, "not a " + std::string(kCaseSchema) + " record");
  CaseRecord r;
  r.case_id = j.at("case_id").get<std::string>();
  r.pred_path = j.value("pred_path", std::string{});
  r.ref_path = j.value("ref_path", std::string{});
  const Json& m = j.at("metadata");
  r.metadata.dataset = m.at("dataset").get<std::string>();
  r.metadata.sex = m.at("sex").get<std::string>();
  if (!m.at("age").is_null()) r.metadata.age = m.at("age").get<double>();
  r.metadata.contrast_phase = m.at("contrast_phase").get<std::string>();
  r.metadata.subtype = m.at("subtype").get<std::string>();
  r.warnings = j.value("warnings", std::vector<std::string>{});
  if (j.at("status") != "ok") {
    r.status = CaseStatus::Failed;
    r.failure_kind = j.at("failure").at("kind").get<std::string>();
    r.failure_message = j.at("failure").at("message").get<std::string>();
    return r;
  }
  for (std::size_t i = 0; i < kAllRegions.size(); ++i) {
    const Json& rj = j.at("regions").at(std::string(to_string(kAllRegions[i])));
    r.regions[i].region = kAllRegions[i];
    r.regions[i].dice = metric_value_from_json(rj.at("dice"));
    r.regions[i].hd95_mm = metric_value_from_json(rj.at("hd95_mm"));
    r.regions[i].pred_volume_mm3 = rj.at("pred_volume_mm3").get<double>();
    r.regions[i].ref_volume_mm3 = rj.at("ref_volume_mm3").get<double>();
  }
  for (const Json& dj : j.at("detection")) {
    DetectionOutcome d;
    d.threshold = dj.at("threshold").get<double>();
    for (const Json& mj : dj.at("matches"))
      d.matches.push_back({mj.at("pred_id").get<std::uint32_t>(), mj.at("ref_id").get<std::uint32_t>(),
                           mj.at("iou").get<double>()});
    d.false_positives = dj.at("false_positive_ids").get<std::vector<std::uint32_t>>();
    d.false_negatives = dj.at("false_negative_ids").get<std::vector<std::uint32_t>>();
    d.precision = metric_value_from_json(dj.at("precision"));
    d.recall = metric_value_from_json(dj.at("recall"));
    d.f1 = metric_value_from_json(dj.at("f1"));
    r.detection.push_back(std::move(d));
  }
  r.annotated_side_only = j.value("annotated_side_only", false);
  return r;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::CorruptPayload, path.string() + ": " + e.what());
  }
}

std::vector<CaseRecord> read_case_records(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorKind::MissingRecordSet, "no record directory " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<CaseRecord> out;
  for (const auto& f : files) {
    const Json j = read_json(f);
    if (!j.is_object() || j.value("schema", std::string{}) != kCaseSchema) continue;
    try {
      out.push_back(case_record_from_json(j));
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::CorruptPayload, f.string() + ": " + e.what());
    }
  }
  std::sort(out.begin(), out.end(), [](const CaseRecord& a, const CaseRecord& b) { return a.case_id < b.case_id; });
  return out;
}

namespace {

std::string cell(const MetricValue& v) { return v.value ? format_number(*v.value) : std::string{}; }

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void summary_cells(std::ostringstream& os, const std::optional<Summary>& s) {
  if (!s) {
    os << ",,,,,,,,,,,";
    return;
  }
  for (double v : {s->mean, s->sd, s->median, s->q1, s->q3, s->whisker_lo, s->whisker_hi, s->p05, s->p95, s->min, s->max})
    os << ',' << format_number(v);
}

}  // namespace

std::string cases_csv(const std::vector<CaseRecord>& records, const std::vector<double>& thresholds) {
  std::ostringstream os;
  os << "case_id,dataset";
  for (Region r : kAllRegions) {
    const std::string n(to_string(r));
    os << ',' << n << "_dice," << n << "_hd95_mm," << n << "_pred_volume_mm3," << n << "_ref_volume_mm3";
  }
  for (double t : thresholds) {
    const std::string p = "det" + format_number(t) + "_";
    os << ',' << p << "tp," << p << "fp," << p << "fn," << p << "precision," << p << "recall," << p << "f1";
  }
  os << '\n';
  for (const auto& rec : records) {
    if (rec.status != CaseStatus::Ok) continue;
    os << csv_escape(rec.case_id) << ',' << csv_escape(rec.metadata.dataset);
    for (Region r : kAllRegions) {
      const auto& m = rec.region(r);
      os << ',' << cell(m.dice) << ',' << cell(m.hd95_mm) << ',' << format_number(m.pred_volume_mm3) << ','
         << format_number(m.ref_volume_mm3);
    }
    for (double t : thresholds) {
      const auto it = std::find_if(rec.detection.begin(), rec.detection.end(),
                                   [&](const DetectionOutcome& d) { return d.threshold == t; });
      if (it == rec.detection.end()) {
        os << ",,,,,,";
        continue;
      }
      os << ',' << it->tp() << ',' << it->fp() << ',' << it->fn() << ',' << cell(it->precision) << ','
         << cell(it->recall) << ',' << cell(it->f1);
    }
    os << '\n';
  }
  return os.str();
}

std::string aggregate_csv(const std::vector<MetricSummaryRow>& rows) {
  std::ostringstream os;
  os << "dataset,region,metric,threshold,n,n_undefined,mean,sd,median,q1,q3,whisker_lo,whisker_hi,p05,p95,min,max\n";
  for (const auto& r : rows) {
    os << csv_escape(r.dataset) << ',' << r.region << ',' << r.metric << ','
       << (r.threshold ? format_number(*r.threshold) : std::string{}) << ',' << (r.summary ? r.summary->n : 0) << ','
       << r.n_undefined;
    summary_cells(os, r.summary);
    os << '\n';
  }
  return os.str();
}

std::string subgroup_csv(const std::vector<SubgroupSummary>& rows) {
  std::ostringstream os;
  os << "key,group,metric,region,n,n_undefined,mean,sd,median,q1,q3,whisker_lo,whisker_hi,p05,p95,min,max,outliers\n";
  for (const auto& r : rows) {
    os << r.key << ',' << csv_escape(r.group) << ',' << r.metric << ',' << r.region << ','
       << (r.summary ? r.summary->n : 0) << ',' << r.n_undefined;
    summary_cells(os, r.summary);
    os << ',';
    if (r.summary)
      for (std::size_t i = 0; i < r.summary->outliers.size(); ++i)
        os << (i ? ";" : "") << format_number(r.summary->outliers[i]);
    os << '\n';
  }
  return os.str();
}

StatsPlan stats_plan_from_json(const Json& j) {
  try {
    StatsPlan p;
    p.alpha = j.value("alpha", 0.05);
    p.metric = j.value("metric", std::string("dice"));
    if (p.metric != "dice" && p.metric != "hd95_mm")
      throw Error(ErrorKind::InvalidArgument, "plan metric must be dice or hd95_mm");
    p.test_model = j.at("test_model").get<std::string>();
    for (const Json& sj : j.at("stages")) {
      PlanStage s;
      s.name = sj.at("name").get<std::string>();
      s.reference_model = sj.at("reference_model").get<std::string>();
      const std::string gate = sj.value("gate", std::string("all"));
      if (gate == "all") s.gate = GateMode::All;
      else if (gate == "matching") s.gate = GateMode::Matching;
      else throw Error(ErrorKind::InvalidArgument, "unknown gate mode: " + gate);
      for (const Json& hj : sj.at("hypotheses")) {
        Hypothesis h{hj.at("dataset").get<std::string>(), hj.at("region").get<std::string>()};
        region_from_string(h.region);
        s.hypotheses.push_back(std::move(h));
      }
      p.stages.push_back(std::move(s));
    }
    return p;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("malformed stats plan: ") + e.what());
  }
}

Json to_json(const PlanOutcome& o) {
  Json stages = Json::array();
  for (const auto& s : o.stages) {
    Json hyps = Json::array();
    for (const auto& h : s.hypotheses) {
      Json hj{{"dataset", h.hypothesis.dataset}, {"region", h.hypothesis.region}};
      if (h.status == HypothesisStatus::Skipped) {
        hj["status"] = "skipped";
        hj["reason"] = h.skip_reason;
      } else {
        hj["status"] = "tested";
        hj["u"] = h.test.u;
        hj["n_test"] = h.test.n;
        hj["n_reference"] = h.test.m;
        hj["method"] = std::string(to_string(h.test.method));
        hj["p_raw"] = h.test.p_value;
        hj["p_adjusted"] = h.adjusted_p;
        hj["reject"] = h.reject;
      }
      hyps.push_back(std::move(hj));
    }
    stages.push_back({{"name", s.name}, {"reference_model", s.reference_model}, {"ran", s.ran}, {"hypotheses", std::move(hyps)}});
  }
  return {{"schema", kStatsSchema},
          {"alpha", o.alpha},
          {"metric", o.metric},
          {"test_model", o.test_model},
          {"stages", std::move(stages)}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os << text;
  if (!os) throw Error(ErrorKind::Io, "short write to " + path.string());
}

}  // namespace volseg
