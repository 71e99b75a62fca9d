#include "thermadapt/cli.hpp"

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "thermadapt/ablation.hpp"
#include "thermadapt/dataset.hpp"
#include "thermadapt/evalmetrics.hpp"
#include "thermadapt/imagegen.hpp"
#include "thermadapt/synth.hpp"

namespace thermadapt {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct IngestArgs {
  std::string root;
  bool unlabelled = false;
  std::string pair_with;
  std::string out;
};

void cmd_ingest(const IngestArgs& a, std::ostream& out) {
  const DomainDataset d = load_domain(a.root, !a.unlabelled);
  std::map<std::string, std::size_t> per_class;
  std::size_t objects = 0;
  for (const DomainRecord& r : d.records()) {
    for (const ObjectInstance& o : r.annotations.objects()) {
      ++per_class[o.class_label];
      ++objects;
    }
  }
  json summary{{"name", d.name()},
               {"labelled", d.labelled()},
               {"images", d.size()},
               {"objects", objects},
               {"per_class", per_class}};
  out << fmt::format("{}: {} images, {} objects\n", d.name(), d.size(), objects);
  for (const auto& [label, n] : per_class) out << fmt::format("  {}: {}\n", label, n);
  if (!a.pair_with.empty()) {
    const DomainDataset thermal = load_domain(a.pair_with, false);
    const SpectralPairing p = pair_spectral(d, thermal);
    summary["pairs"] = p.pairs.size();
    summary["unpaired_visible"] = p.unpaired_visible;
    summary["unpaired_thermal"] = p.unpaired_thermal;
    out << fmt::format("paired with {}: {} pairs, {} unpaired visible, {} unpaired thermal\n",
                       thermal.name(), p.pairs.size(), p.unpaired_visible.size(),
                       p.unpaired_thermal.size());
  }
  if (!a.out.empty()) write_file(a.out, summary.dump(2) + "\n");
}

struct TranslateArgs {
  std::string mode;
  std::string source;
  std::string out;
  std::string target;
  std::string translated;
  bool per_image = false;
  int jobs = 1;
};

void cmd_translate(const TranslateArgs& a, std::ostream& out) {
  const DomainDataset source = load_domain(a.source, true);
  std::optional<DomainDataset> result;
  if (a.mode == "gray") {
    result = translate_gray(source, a.jobs);
  } else if (a.mode == "histmatch") {
    if (a.target.empty()) throw CLI::ValidationError("--target", "histmatch needs --target");
    const DomainDataset target = load_domain(a.target, false);
    result = a.per_image ? translate_histmatch_per_image(source, target, a.jobs)
                         : translate_histmatch(source, pooled_histogram(target, a.jobs), a.jobs);
  } else {
    if (a.translated.empty()) {
      throw CLI::ValidationError("--translated", "external needs --translated");
    }
    result = ingest_translated(a.translated, source, a.jobs);
  }
  save_domain(*result, a.out, a.jobs);
  out << fmt::format("{}: {} images -> {}\n", result->name(), result->size(), a.out);
}

void cmd_invert(const std::string& in, const std::string& out_path) {
  const AnyImage img = read_png(in);
  const GrayImage* gray = std::get_if<GrayImage>(&img);
  if (gray == nullptr) {
    throw Error(ErrorCode::UnsupportedImage, in + ": intensity inversion needs a gray image");
  }
  write_png(out_path, intensity_invert(*gray));
}

void cmd_build_renewed(const std::string& source, const std::string& out_dir, int jobs,
                       std::ostream& out) {
  const DomainDataset renewed = build_renewed_source(load_domain(source, true), jobs);
  save_domain(renewed, out_dir, jobs);
  out << fmt::format("{}: {} images -> {}\n", renewed.name(), renewed.size(), out_dir);
}

struct SynthArgs {
  SynthParams params;
  std::string classes = "person";
  std::size_t count = 0;
  std::string out;
  int jobs = 1;
};

void cmd_synth(SynthArgs a, std::ostream& out) {
  a.params.classes = split_csv(a.classes);
  const SynthDomains d = generate_domains(a.params, a.count, a.jobs);
  save_domain(d.visible.renamed("visible"), fs::path(a.out) / "visible", a.jobs);
  save_domain(d.thermal.renamed("thermal"), fs::path(a.out) / "thermal", a.jobs);
  out << fmt::format("{} paired scenes -> {}/{{visible,thermal}}\n", a.count, a.out);
}

struct DetectArgs {
  std::string target;
  std::string out;
  std::string model;
  std::string config;
  std::string fit_source;
  std::string fit_target;
  std::string save_model;
  std::optional<double> threshold;
  std::string polarity;
  std::optional<int> min_area;
  std::optional<double> background;
  std::string label;
  int jobs = 1;
};

void cmd_detect(const DetectArgs& a, std::ostream& out) {
  if (a.target.empty() && a.save_model.empty()) {
    throw CLI::ValidationError("--target", "detect needs --target or --save-model");
  }
  if (!a.target.empty() && a.out.empty()) {
    throw CLI::ValidationError("--out", "--target needs --out");
  }
  DetectorParams params;
  if (!a.fit_source.empty()) {
    const DomainDataset source = load_domain(a.fit_source, true);
    std::optional<DomainDataset> fit_target;
    if (!a.fit_target.empty()) fit_target = load_domain(a.fit_target, false);
    params = calibrate_detector(source, fit_target ? &*fit_target : nullptr, a.jobs);
  } else if (!a.model.empty()) {
    params = detector_params_from_json(read_json(a.model));
  } else if (!a.config.empty()) {
    const json cfg = read_json(a.config);
    if (cfg.contains("train_dir") && cfg["train_dir"].is_string()) {
      const fs::path model = fs::path(cfg["train_dir"].get<std::string>()) / "model.json";
      if (fs::is_regular_file(model)) params = detector_params_from_json(read_json(model));
    }
  }
  if (a.threshold) params.threshold = *a.threshold;
  if (!a.polarity.empty()) params.polarity = parse_polarity(a.polarity);
  if (a.min_area) params.min_area = *a.min_area;
  if (a.background) params.background = *a.background;
  if (!a.label.empty()) params.class_label = a.label;
  params.validate();

  if (!a.save_model.empty()) write_file(a.save_model, to_json(params).dump(2) + "\n");
  if (a.target.empty()) return;
  const DomainDataset target = load_domain(a.target, false);
  const std::vector<Detection> dets = detect_domain(target, params, a.jobs);
  fs::create_directories(a.out);
  write_detections(fs::path(a.out) / "detections.json", dets);
  out << fmt::format("{} detections on {} images ({} polarity, threshold {:.2f}) -> {}\n",
                     dets.size(), target.size(), to_string(params.polarity), params.threshold,
                     (fs::path(a.out) / "detections.json").string());
}

struct EvalArgs {
  std::string detections;
  std::string target;
  double iou = 0.5;
  std::string mode = "all_points";
  bool legacy_area = false;
  std::string classes;
  std::string label = "Detector";
  std::string out;
  int jobs = 1;
};

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  EvalParams params;
  params.iou_threshold = a.iou;
  params.mode = parse_ap_mode(a.mode);
  params.legacy_area = a.legacy_area;
  params.classes = split_csv(a.classes);
  const DomainDataset target = load_domain(a.target, true);
  const EvalReport report = evaluate(read_detections(a.detections), target, params, a.jobs);
  out << render_eval_table({{a.label, report}});
  for (const auto& [label, n] : report.unknown_class_detections) {
    out << fmt::format("ignored {} detections of unknown class '{}'\n", n, label);
  }
  if (!report.excluded_classes.empty()) {
    out << "excluded (no ground truth):";
    for (const std::string& c : report.excluded_classes) out << ' ' << c;
    out << '\n';
  }
  if (!a.out.empty()) write_file(a.out, to_json(report).dump(2) + "\n");
}

int cmd_ablate(const std::string& config, std::string json_out, int parallel_rows, int jobs,
               std::ostream& out) {
  AblationPlan plan = load_ablation_plan(config);
  if (parallel_rows > 0) plan.parallel_rows = parallel_rows;
  const DomainDataset visible = load_domain(plan.visible, true);
  const DomainDataset target = load_domain(plan.target, true);
  const std::vector<PipelineConfig> rows = plan_grid(plan.axes, plan.base);
  const AblationReport report = run_ablation(rows, visible, target, plan.parallel_rows, jobs);
  if (json_out.empty()) json_out = (plan.base.out_dir / "ablation.json").string();
  write_file(json_out, to_json(report).dump(2) + "\n");
  out << render_report(report, plan.base.eval.classes);
  for (const AblationRow& r : report.rows) {
    if (!r.ok()) return 1;
  }
  return 0;
}

void cmd_report(const std::vector<std::string>& ablations, const std::vector<std::string>& evals,
                const std::string& classes, std::ostream& out) {
  if (ablations.empty() && evals.empty()) {
    throw CLI::ValidationError("--ablation", "report needs --ablation or --eval inputs");
  }
  const std::vector<std::string> cls = split_csv(classes);
  for (const std::string& path : ablations) {
    out << render_report(ablation_report_from_json(read_json(path)), cls);
  }
  if (!evals.empty()) {
    std::vector<std::pair<std::string, EvalReport>> rows;
    for (const std::string& path : evals) {
      rows.emplace_back(fs::path(path).stem().string(), eval_report_from_json(read_json(path)));
    }
    out << render_eval_table(rows, cls);
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fake-thermal source domains, external-stage orchestration and AP/mAP scoring",
               "thermadapt"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  auto add_jobs = [](CLI::App* sub, int& jobs) {
    sub->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  };

  IngestArgs ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Load and validate a domain directory");
  s_ingest->add_option("--root", ingest.root, "Domain root")->required()->check(CLI::ExistingDirectory);
  s_ingest->add_flag("--unlabelled", ingest.unlabelled, "Images only, no annotations");
  s_ingest->add_option("--pair-with", ingest.pair_with, "Thermal domain to pair by image id")
      ->check(CLI::ExistingDirectory);
  s_ingest->add_option("--out", ingest.out, "Summary JSON");

  TranslateArgs translate;
  auto* s_translate = app.add_subcommand("translate", "Build a fake-thermal source domain");
  s_translate->add_option("--mode", translate.mode)
      ->required()
      ->check(CLI::IsMember({"gray", "histmatch", "external"}));
  s_translate->add_option("--source", translate.source, "Labelled visible domain")
      ->required()
      ->check(CLI::ExistingDirectory);
  s_translate->add_option("--out", translate.out, "Output domain root")->required();
  s_translate->add_option("--target", translate.target, "Thermal reference domain (histmatch)")
      ->check(CLI::ExistingDirectory);
  s_translate->add_option("--translated", translate.translated,
                          "Directory of <image_id>.png (external)")
      ->check(CLI::ExistingDirectory);
  s_translate->add_flag("--per-image", translate.per_image,
                        "Match each image against one target image");
  add_jobs(s_translate, translate.jobs);

  std::string invert_in, invert_out;
  auto* s_invert = app.add_subcommand("invert", "Intensity-invert a gray PNG");
  s_invert->add_option("--in", invert_in)->required()->check(CLI::ExistingFile);
  s_invert->add_option("--out", invert_out)->required();

  std::string renew_source, renew_out;
  int renew_jobs = 1;
  auto* s_renew =
      app.add_subcommand("build-renewed", "Fake-thermal domain plus its inverted copy");
  s_renew->add_option("--source", renew_source)->required()->check(CLI::ExistingDirectory);
  s_renew->add_option("--out", renew_out)->required();
  add_jobs(s_renew, renew_jobs);

  SynthArgs synth;
  std::uint64_t synth_seed = 0;
  auto* s_synth = app.add_subcommand("synth", "Generate paired synthetic visible/thermal domains");
  s_synth->add_option("--out", synth.out)->required();
  s_synth->add_option("--count", synth.count, "Number of scenes")->required();
  s_synth->add_option("--seed", synth_seed)->required();
  s_synth->add_option("--width", synth.params.width)->capture_default_str();
  s_synth->add_option("--height", synth.params.height)->capture_default_str();
  s_synth->add_option("--min-objects", synth.params.min_objects)->capture_default_str();
  s_synth->add_option("--max-objects", synth.params.max_objects)->capture_default_str();
  s_synth->add_option("--min-size", synth.params.min_size)->capture_default_str();
  s_synth->add_option("--max-size", synth.params.max_size)->capture_default_str();
  s_synth->add_option("--thermal-bright", synth.params.thermal_bright_fraction,
                      "Fraction of thermal objects brighter than background")
      ->capture_default_str();
  s_synth->add_option("--visible-bright", synth.params.visible_bright_fraction)
      ->capture_default_str();
  s_synth->add_option("--background", synth.params.background)->capture_default_str();
  s_synth->add_option("--contrast", synth.params.contrast)->capture_default_str();
  s_synth->add_option("--noise", synth.params.noise)->capture_default_str();
  s_synth->add_option("--ellipse-fraction", synth.params.ellipse_fraction)->capture_default_str();
  s_synth->add_option("--classes", synth.classes, "Comma-separated labels")->capture_default_str();
  add_jobs(s_synth, synth.jobs);

  DetectArgs detect;
  auto* s_detect = app.add_subcommand("detect", "Threshold blob detector (mock trained detector)");
  s_detect->add_option("--target", detect.target, "Domain to run on")->check(CLI::ExistingDirectory);
  s_detect->add_option("--out", detect.out, "Directory for detections.json");
  s_detect->add_option("--model", detect.model, "Detector params JSON")->check(CLI::ExistingFile);
  s_detect->add_option("--config", detect.config, "Ablation row config (reads train_dir/model.json)")
      ->check(CLI::ExistingFile);
  s_detect->add_option("--fit-source", detect.fit_source, "Calibrate on this labelled domain")
      ->check(CLI::ExistingDirectory);
  s_detect->add_option("--fit-target", detect.fit_target, "Unlabelled target for re-adaptation")
      ->check(CLI::ExistingDirectory);
  s_detect->add_option("--save-model", detect.save_model, "Write the detector params JSON");
  s_detect->add_option("--threshold", detect.threshold);
  s_detect->add_option("--polarity", detect.polarity)
      ->check(CLI::IsMember({"bright", "dark", "both"}));
  s_detect->add_option("--min-area", detect.min_area);
  s_detect->add_option("--background", detect.background);
  s_detect->add_option("--label", detect.label);
  add_jobs(s_detect, detect.jobs);

  EvalArgs ev;
  auto* s_eval = app.add_subcommand("eval", "Score detections against a labelled domain");
  s_eval->add_option("--detections", ev.detections)->required()->check(CLI::ExistingFile);
  s_eval->add_option("--target", ev.target)->required()->check(CLI::ExistingDirectory);
  s_eval->add_option("--iou", ev.iou)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  s_eval->add_option("--mode", ev.mode)
      ->capture_default_str()
      ->check(CLI::IsMember({"all_points", "eleven_point"}));
  s_eval->add_flag("--legacy-area", ev.legacy_area, "Pixel-inclusive (+1) box areas");
  s_eval->add_option("--classes", ev.classes, "Comma-separated classes to score");
  s_eval->add_option("--label", ev.label, "Row label")->capture_default_str();
  s_eval->add_option("--out", ev.out, "Report JSON");
  add_jobs(s_eval, ev.jobs);

  std::string ablate_config, ablate_out;
  int ablate_parallel = 0;
  int ablate_jobs = 1;
  auto* s_ablate = app.add_subcommand("ablate", "Run an ablation grid from a JSON config");
  s_ablate->add_option("--config", ablate_config)->required()->check(CLI::ExistingFile);
  s_ablate->add_option("--out", ablate_out, "Report JSON (default <out_dir>/ablation.json)");
  s_ablate->add_option("--parallel-rows", ablate_parallel)->check(CLI::PositiveNumber);
  add_jobs(s_ablate, ablate_jobs);

  std::vector<std::string> report_ablations, report_evals;
  std::string report_classes;
  auto* s_report = app.add_subcommand("report", "Render saved ablation or eval reports");
  s_report->add_option("--ablation", report_ablations)->check(CLI::ExistingFile);
  s_report->add_option("--eval", report_evals)->check(CLI::ExistingFile);
  s_report->add_option("--classes", report_classes);

  try {
    app.parse(argc, argv);
    int code = 0;
    if (s_ingest->parsed()) {
      cmd_ingest(ingest, out);
    } else if (s_translate->parsed()) {
      cmd_translate(translate, out);
    } else if (s_invert->parsed()) {
      cmd_invert(invert_in, invert_out);
    } else if (s_renew->parsed()) {
      cmd_build_renewed(renew_source, renew_out, renew_jobs, out);
    } else if (s_synth->parsed()) {
      synth.params.seed = synth_seed;
      cmd_synth(synth, out);
    } else if (s_detect->parsed()) {
      cmd_detect(detect, out);
    } else if (s_eval->parsed()) {
      cmd_eval(ev, out);
    } else if (s_ablate->parsed()) {
      code = cmd_ablate(ablate_config, ablate_out, ablate_parallel, ablate_jobs, out);
    } else if (s_report->parsed()) {
      cmd_report(report_ablations, report_evals, report_classes, out);
    }
    return code;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace thermadapt
