#include "volseg/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "volseg/boxplot.hpp"
#include "volseg/report.hpp"
#include "volseg/volume_io.hpp"

namespace volseg::cli {

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> log = [] {
    auto l = spdlog::stderr_color_mt("volseg");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::warn);
    if (const char* env = std::getenv("VOLSEG_EVAL_LOG")) l->set_level(spdlog::level::from_str(env));
    return l;
  }();
  return log;
}

Json options_json(const RunConfig& c) {
  const auto& o = c.options;
  return {{"postprocess", o.postprocess},
          {"volume_exemption_mm3", o.postprocess_config.volume_exemption_mm3},
          {"min_axial_diameter_mm", o.postprocess_config.min_axial_diameter_mm},
          {"connectivity", static_cast<int>(o.lesion_connectivity)},
          {"thresholds", o.detection_thresholds},
          {"roi_crop", o.roi_crop},
          {"margin_mm", o.margin_mm},
          {"annotated_side_datasets", o.annotated_side_datasets},
          {"hausdorff_mode", o.hausdorff_mode == HausdorffMode::Pooled ? "pooled" : "max-of-directed"},
          {"match_strategy", o.match_strategy == MatchStrategy::Greedy ? "greedy" : "optimal"}};
}

}  // namespace

std::string case_file_stem(const std::string& case_id) {
  std::string out;
  for (char c : case_id) {
    const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += safe ? c : '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

int cmd_evaluate(const RunConfig& config) {
  std::vector<CaseManifestEntry> entries;
  try {
    config.options.validate();
    entries = read_manifest(config.manifest);
  } catch (const Error& e) {
    logger()->error("{}", e.what());
    return kExitError;
  }
  logger()->info("evaluating {} cases with {} workers", entries.size(), config.workers);
  const auto records = evaluate_all(entries, config.options, config.workers);

  const auto cases_dir = config.out_dir / "cases";
  std::filesystem::create_directories(cases_dir);
  Json failed = Json::array();
  std::size_t ok = 0;
  for (const auto& r : records) {
    if (r.status == CaseStatus::Failed) {
      logger()->error("case {} failed ({}): {}", r.case_id, r.failure_kind, r.failure_message);
      failed.push_back({{"case_id", r.case_id}, {"kind", r.failure_kind}, {"message", r.failure_message}});
      continue;
    }
    ++ok;
    for (const auto& w : r.warnings) logger()->warn("case {}: {}", r.case_id, w);
    write_text(cases_dir / (case_file_stem(r.case_id) + ".json"), to_json(r).dump(2) + "\n");
  }
  write_text(config.out_dir / "cases.csv", cases_csv(records, config.options.detection_thresholds));
  write_text(config.out_dir / "aggregate.csv", aggregate_csv(aggregate(records)));
  const Json summary{{"schema", kRunSchema},
                     {"manifest", config.manifest.filename().string()},
                     {"cases_total", records.size()},
                     {"cases_ok", ok},
                     {"cases_failed", failed.size()},
                     {"failed", failed},
                     {"options", options_json(config)}};
  write_text(config.out_dir / "run_summary.json", summary.dump(2) + "\n");

  if (!failed.empty() && !config.allow_failures) return kExitCaseFailures;
  return kExitOk;
}

int cmd_postprocess(const PostprocessCommand& c) {
  const LabelVolume raw = load_volume(c.input);
  // Without an explicit scheme the input must already be canonical.
  const LabelVolume canonical = c.scheme ? harmonize_labels(raw, LabelScheme::by_name(*c.scheme)) : raw;
  require_canonical(canonical);
  const auto result = postprocess(canonical, c.config);
  write_volume(result.volume, c.output);
  const auto report_path = c.report ? *c.report : std::filesystem::path(c.output.string() + ".report.json");
  Json j = to_json(result.report);
  j["input"] = c.input.filename().string();
  j["removed_components"] = result.report.removed();
  write_text(report_path, j.dump(2) + "\n");
  logger()->info("post-processing removed {} of {} abnormality components", result.report.removed(),
                 result.report.decisions.size());
  return kExitOk;
}

int cmd_detect(const DetectCommand& c) {
  const LabelVolume pred = harmonize_labels(load_volume(c.pred), LabelScheme::by_name(c.pred_scheme));
  const LabelVolume ref = harmonize_labels(load_volume(c.ref), LabelScheme::by_name(c.ref_scheme));
  assert_same_grid(pred.grid(), ref.grid());
  const auto pl = connected_components(extract_region(pred, Region::Abnormality), c.connectivity);
  const auto rl = connected_components(extract_region(ref, Region::Abnormality), c.connectivity);
  const auto overlaps = lesion_overlaps(pl, rl);
  Json out = Json::array();
  for (double t : c.thresholds) out.push_back(to_json(match_lesions(overlaps, t)));
  const std::string text = Json{{"pred_lesions", pl.size()}, {"ref_lesions", rl.size()}, {"detection", out}}.dump(2) + "\n";
  if (c.out) write_text(*c.out, text);
  else std::cout << text;
  return kExitOk;
}

std::vector<CaseRecord> load_run_records(const std::filesystem::path& dir) {
  const auto nested = dir / "cases";
  return read_case_records(std::filesystem::is_directory(nested) ? nested : dir);
}

int cmd_stats(const StatsCommand& c) {
  const StatsPlan plan = stats_plan_from_json(read_json(c.plan));
  std::map<std::string, std::vector<CaseRecord>> cache;
  auto records_for = [&](const std::string& model) -> const std::vector<CaseRecord>& {
    auto it = cache.find(model);
    if (it != cache.end()) return it->second;
    const auto dir = c.records_dir / model;
    if (!std::filesystem::is_directory(dir))
      throw Error(ErrorKind::MissingRecordSet, "no record set for model '" + model + "' under " + c.records_dir.string());
    return cache.emplace(model, load_run_records(dir)).first->second;
  };
  const SampleSource source = [&](const std::string& model, const std::string& dataset, const std::string& region) {
    std::vector<double> values;
    const Region r = region_from_string(region);
    for (const auto& rec : records_for(model)) {
      if (rec.status != CaseStatus::Ok || rec.metadata.dataset != dataset) continue;
      const auto& m = rec.region(r);
      const MetricValue& v = plan.metric == "dice" ? m.dice : m.hd95_mm;
      if (v.defined()) values.push_back(*v.value);
    }
    if (values.empty())
      throw Error(ErrorKind::EmptySample, "model '" + model + "' has no " + plan.metric + " values for " + dataset + "/" + region);
    return values;
  };
  const PlanOutcome outcome = run_plan(plan, source);
  const std::string text = to_json(outcome).dump(2) + "\n";
  if (c.out) write_text(*c.out, text);
  else std::cout << text;
  return kExitOk;
}

int cmd_subgroup(const SubgroupCommand& c) {
  const auto records = load_run_records(c.records_dir);
  const auto rows = subgroup_summarize(records, c.key, c.age_bins);
  std::filesystem::create_directories(c.out_dir);
  write_text(c.out_dir / ("subgroup_" + c.key + ".csv"), subgroup_csv(rows));

  std::map<std::pair<std::string, std::string>, std::vector<BoxplotGroup>> plots;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& r : rows) {
    const auto k = std::make_pair(r.metric, r.region);
    if (!plots.contains(k)) order.push_back(k);
    auto& groups = plots[k];
    if (r.summary) groups.push_back({r.group, *r.summary});
  }
  for (const auto& k : order) {
    const auto& groups = plots[k];
    const std::string title = k.first + " / " + k.second + " by " + c.key;
    write_text(c.out_dir / ("boxplot_" + c.key + "_" + k.first + "_" + k.second + ".svg"),
               render_boxplot(title, k.first, groups, axis_range_for(k.first, groups)));
  }
  return kExitOk;
}

int cmd_crop(const CropCommand& c) {
  const LabelVolume v = load_volume(c.input);
  auto mask_of = [](const LabelVolume& lv) {
    std::vector<std::uint8_t> bits(lv.size());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = lv.labels()[i] != 0;
    return RegionMask(lv.grid(), std::move(bits));
  };
  const auto lung = mask_of(load_volume(c.lung));
  const auto bladder = mask_of(load_volume(c.bladder));
  const auto result = roi_crop(v, lung, bladder, c.margin_mm);
  write_volume(result.volume, c.output);
  const Json box{{"lo", result.roi.box.lo}, {"hi", result.roi.box.hi}, {"provenance", result.roi.provenance}};
  const std::string text = box.dump(2) + "\n";
  if (c.box_out) write_text(*c.box_out, text);
  else std::cout << text;
  return kExitOk;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Volumetric kidney segmentation evaluation toolkit"};
  app.require_subcommand(1);

  RunConfig eval;
  std::string hd_mode = "max";
  int connectivity = 26;
  std::vector<std::string> annotated_side;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate every case of a manifest");
  evaluate->add_option("--manifest", eval.manifest, "Manifest CSV")->required();
  evaluate->add_option("--out", eval.out_dir, "Output directory")->required();
  evaluate->add_flag("--postprocess,!--no-postprocess", eval.options.postprocess, "Post-process predictions (default on)");
  evaluate->add_option("--volume-exemption-mm3", eval.options.postprocess_config.volume_exemption_mm3);
  evaluate->add_option("--min-diameter-mm", eval.options.postprocess_config.min_axial_diameter_mm);
  evaluate->add_option("--connectivity", connectivity, "6 or 26")->check(CLI::IsMember({6, 26}));
  evaluate->add_option("--thresholds", eval.options.detection_thresholds, "Detection IoU thresholds")->delimiter(',');
  evaluate->add_flag("--roi-crop", eval.options.roi_crop, "Crop to the lung/bladder landmark ROI");
  evaluate->add_option("--margin-mm", eval.options.margin_mm, "ROI margin in mm");
  evaluate->add_option("--workers", eval.workers)->check(CLI::PositiveNumber);
  evaluate->add_option("--annotated-side", annotated_side, "Datasets with single-kidney references")->delimiter(',');
  evaluate->add_option("--hd-mode", hd_mode, "max (default) or pooled")->check(CLI::IsMember({"max", "pooled"}));
  evaluate->add_flag("--allow-failures", eval.allow_failures, "Exit 0 even if cases failed");

  PostprocessCommand pp;
  std::string pp_scheme;
  auto* post = app.add_subcommand("postprocess", "Clean one prediction volume");
  post->add_option("--in", pp.input)->required();
  post->add_option("--out", pp.output)->required();
  post->add_option("--report", pp.report);
  post->add_option("--scheme", pp_scheme, "Source label scheme of the input");
  post->add_option("--volume-exemption-mm3", pp.config.volume_exemption_mm3);
  post->add_option("--min-diameter-mm", pp.config.min_axial_diameter_mm);
  post->add_option("--connectivity", connectivity)->check(CLI::IsMember({6, 26}));

  DetectCommand det;
  auto* detect = app.add_subcommand("detect", "Lesion detection scoring for one case");
  detect->add_option("--pred", det.pred)->required();
  detect->add_option("--ref", det.ref)->required();
  detect->add_option("--pred-scheme", det.pred_scheme);
  detect->add_option("--ref-scheme", det.ref_scheme);
  detect->add_option("--thresholds", det.thresholds)->delimiter(',');
  detect->add_option("--connectivity", connectivity)->check(CLI::IsMember({6, 26}));
  detect->add_option("--out", det.out);

  StatsCommand st;
  auto* stats = app.add_subcommand("stats", "Run a hierarchical statistical testing plan");
  stats->add_option("--records", st.records_dir, "Directory with one evaluate output per model")->required();
  stats->add_option("--plan", st.plan)->required();
  stats->add_option("--out", st.out);

  SubgroupCommand sg;
  auto* subgroup = app.add_subcommand("subgroup", "Subgroup summaries and SVG box plots");
  subgroup->add_option("--records", sg.records_dir)->required();
  subgroup->add_option("--key", sg.key, "sex | age | contrast_phase | subtype | dataset")->required();
  subgroup->add_option("--age-bins", sg.age_bins)->delimiter(',');
  subgroup->add_option("--out", sg.out_dir)->required();

  CropCommand cr;
  auto* crop = app.add_subcommand("crop", "Crop a volume to the landmark ROI");
  crop->add_option("--in", cr.input)->required();
  crop->add_option("--lung", cr.lung)->required();
  crop->add_option("--bladder", cr.bladder)->required();
  crop->add_option("--margin-mm", cr.margin_mm);
  crop->add_option("--out", cr.output)->required();
  crop->add_option("--box-out", cr.box_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitError;
  }

  try {
    const Connectivity conn = connectivity_from_int(connectivity);
    if (evaluate->parsed()) {
      eval.options.lesion_connectivity = conn;
      eval.options.postprocess_config.connectivity = conn;
      eval.options.hausdorff_mode = hd_mode == "pooled" ? HausdorffMode::Pooled : HausdorffMode::MaxOfDirected;
      eval.options.annotated_side_datasets.insert(annotated_side.begin(), annotated_side.end());
      return cmd_evaluate(eval);
    }
    if (post->parsed()) {
      pp.config.connectivity = conn;
      if (!pp_scheme.empty()) pp.scheme = pp_scheme;
      return cmd_postprocess(pp);
    }
    if (detect->parsed()) {
      det.connectivity = conn;
      return cmd_detect(det);
    }
    if (stats->parsed()) return cmd_stats(st);
    if (subgroup->parsed()) return cmd_subgroup(sg);
    if (crop->parsed()) return cmd_crop(cr);
  } catch (const Error& e) {
    logger()->error("{}: {}", to_string(e.kind()), e.what());
    return kExitError;
  }
  return kExitError;
}

}  // namespace volseg::cli
