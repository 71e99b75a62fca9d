#include "thermadapt/ablation.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

#include "text_table.hpp"
#include "thermadapt/imagegen.hpp"
#include "thermadapt/parallel.hpp"

namespace thermadapt {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A row owns its directories, so stale files from an earlier run are dropped.
void persist(const DomainDataset& domain, const fs::path& dir, int jobs) {
  fs::remove_all(dir);
  save_domain(domain, dir, jobs);
}

const std::string* hook_for(const PipelineConfig& c, Stage s) {
  auto it = c.hooks.find(std::string(to_string(s)));
  if (it == c.hooks.end() || it->second.empty()) return nullptr;
  return &it->second;
}

std::string display_name(Translation t) {
  switch (t) {
    case Translation::None: return "No";
    case Translation::Gray: return "Gray";
    case Translation::HistMatch: return "HistMatch";
    case Translation::External: return "External";
  }
  return "?";
}

std::string row_label(Translation t, bool inversion, bool readapt) {
  std::string label(to_string(t));
  if (inversion) label += "+inv";
  if (readapt) label += "+ra";
  return label;
}

DomainDataset split_of(const DomainDataset& target, const std::optional<std::set<std::string>>& ids) {
  return ids ? target.subset(*ids) : target;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <typename T>
T get_field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string_view to_string(Translation t) {
  switch (t) {
    case Translation::None: return "none";
    case Translation::Gray: return "gray";
    case Translation::HistMatch: return "histmatch";
    case Translation::External: return "external";
  }
  return "unknown";
}

Translation parse_translation(std::string_view text) {
  if (text == "none") return Translation::None;
  if (text == "gray") return Translation::Gray;
  if (text == "histmatch") return Translation::HistMatch;
  if (text == "external") return Translation::External;
  throw Error(ErrorCode::InvalidConfig,
              "unknown translation '" + std::string(text) + "' (none|gray|histmatch|external)");
}

std::string PipelineConfig::label() const { return row_label(translation, inversion, readapt); }

void PipelineConfig::validate() const {
  if (translation == Translation::External && !translated_dir &&
      hook_for(*this, Stage::Translate) == nullptr) {
    throw Error(ErrorCode::InvalidCombination,
                label() + ": external translation needs a translated-images directory or a "
                          "translate hook");
  }
  if (readapt && hook_for(*this, Stage::Train) == nullptr) {
    throw Error(ErrorCode::InvalidCombination, label() + ": re-adaptation needs a train hook");
  }
  if (hook_for(*this, Stage::Detect) == nullptr) {
    throw Error(ErrorCode::InvalidCombination, label() + ": every row needs a detect hook");
  }
  for (const auto& [stage, tmpl] : hooks) {
    if (stage != "translate" && stage != "train" && stage != "detect") {
      throw Error(ErrorCode::InvalidConfig, "unknown hook stage '" + stage + "'");
    }
  }
}

GridAxes published_grid_axes() {
  return {{Translation::None, Translation::Gray, Translation::External}, {false, true}, {false, true}};
}

std::vector<PipelineConfig> plan_grid(const GridAxes& axes, const PipelineConfig& base) {
  if (axes.translation.empty() || axes.inversion.empty() || axes.readapt.empty()) {
    throw Error(ErrorCode::InvalidConfig, "every grid axis needs at least one value");
  }
  std::vector<PipelineConfig> out;
  for (Translation t : axes.translation) {
    for (bool ra : axes.readapt) {
      for (bool inv : axes.inversion) {
        if (t == Translation::None && inv) continue;
        PipelineConfig c = base;
        c.translation = t;
        c.inversion = inv;
        c.readapt = ra;
        c.validate();
        out.push_back(std::move(c));
      }
    }
  }
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, "the grid has no valid rows");
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::string dir = out[i].label();
    for (char& ch : dir) {
      if (ch == '+') ch = '_';
    }
    out[i].out_dir = base.out_dir / fmt::format("{:02d}_{}", i + 1, dir);
  }
  return out;
}

DomainDataset build_source_for(const PipelineConfig& config, const DomainDataset& visible,
                               const DomainDataset& target, int jobs) {
  DomainDataset translated = visible;
  switch (config.translation) {
    case Translation::None:
      break;
    case Translation::Gray:
      translated = translate_gray(visible, jobs);
      break;
    case Translation::HistMatch:
      translated = config.histmatch_per_image
                       ? translate_histmatch_per_image(visible, target, jobs)
                       : translate_histmatch(visible, pooled_histogram(target, jobs), jobs);
      break;
    case Translation::External: {
      fs::path dir;
      if (config.translated_dir) {
        dir = *config.translated_dir;
      } else if (const std::string* hook = hook_for(config, Stage::Translate)) {
        const fs::path in_visible = config.out_dir / "translate_visible";
        const fs::path in_target = config.out_dir / "translate_target";
        persist(visible, in_visible, jobs);
        persist(target.unlabelled(), in_target, jobs);
        dir = config.out_dir / "translate";
        fs::remove_all(dir);
        std::map<std::string, fs::path> bindings = {
            {"SOURCE_DIR", in_visible}, {"TARGET_DIR", in_target}, {"OUT_DIR", dir}};
        const fs::path config_path = config.out_dir / "config.json";
        if (fs::exists(config_path)) bindings.emplace("CONFIG", config_path);
        run_stage_hook(Stage::Translate, *hook, bindings, config.timeout);
      } else {
        throw Error(ErrorCode::InvalidCombination,
                    config.label() + ": no translated images and no translate hook");
      }
      translated = ingest_translated(dir, visible, jobs);
      break;
    }
  }
  if (!config.inversion) return translated;
  return build_renewed_source(translated, jobs);
}

EvalReport run_pipeline(const PipelineConfig& config, const DomainDataset& visible,
                        const DomainDataset& target, int jobs) {
  config.validate();
  if (config.out_dir.empty()) {
    throw Error(ErrorCode::InvalidConfig, config.label() + ": no output directory");
  }
  const fs::path& out = config.out_dir;
  fs::create_directories(out);

  const DomainDataset target_train = split_of(target, config.target_train_ids).unlabelled();
  const DomainDataset target_test = split_of(target, config.target_test_ids);

  const fs::path source_dir = out / "source";
  const fs::path adapt_dir = out / (config.readapt ? "target_train" : "no_target");
  const fs::path test_dir = out / "target_test";
  const fs::path train_dir = out / "train";
  const fs::path detect_dir = out / "detect";
  const fs::path config_path = out / "config.json";
  const std::string* train_hook = hook_for(config, Stage::Train);

  json cfg{{"label", config.label()},
           {"translation", to_string(config.translation)},
           {"inversion", config.inversion},
           {"readapt", config.readapt},
           {"seed", config.seed},
           {"eval", to_json(config.eval)},
           {"source_dir", source_dir.string()},
           {"adapt_target_dir", adapt_dir.string()},
           {"target_test_dir", test_dir.string()},
           {"train_dir", train_hook ? json(train_dir.string()) : json(nullptr)},
           {"detect_dir", detect_dir.string()}};
  write_file(config_path, cfg.dump(2) + "\n");

  const DomainDataset source = build_source_for(config, visible, target_train, jobs);
  persist(source, source_dir, jobs);
  persist(config.readapt ? target_train
                         : DomainDataset(target.name() + "_none", {}, false),
          adapt_dir, jobs);
  persist(target_test.unlabelled(), test_dir, jobs);

  if (train_hook != nullptr) {
    fs::remove_all(train_dir);
    run_stage_hook(Stage::Train, *train_hook,
                   {{"SOURCE_DIR", source_dir},
                    {"TARGET_DIR", adapt_dir},
                    {"OUT_DIR", train_dir},
                    {"CONFIG", config_path}},
                   config.timeout);
  }

  fs::remove_all(detect_dir);
  const StageOutcome detected =
      run_stage_hook(Stage::Detect, *hook_for(config, Stage::Detect),
                     {{"SOURCE_DIR", source_dir},
                      {"TARGET_DIR", test_dir},
                      {"OUT_DIR", detect_dir},
                      {"CONFIG", config_path}},
                     config.timeout);

  const std::vector<Detection> dets = read_detections(detected.artifact);
  EvalReport report = evaluate(dets, target_test, config.eval, jobs);
  write_file(out / "report.json", to_json(report).dump(2) + "\n");
  return report;
}

AblationReport run_ablation(const std::vector<PipelineConfig>& configs,
                            const DomainDataset& visible, const DomainDataset& target,
                            int parallel_rows, int jobs) {
  AblationReport report;
  report.rows.resize(configs.size());
  parallel_for(configs.size(), parallel_rows, [&](std::size_t i) {
    const PipelineConfig& c = configs[i];
    AblationRow& row = report.rows[i];
    row.translation = c.translation;
    row.inversion = c.inversion;
    row.readapt = c.readapt;
    try {
      row.report = run_pipeline(c, visible, target, jobs);
    } catch (const std::exception& e) {
      row.failure = e.what();
    }
  });
  return report;
}

json to_json(const AblationRow& row) {
  json j{{"label", row_label(row.translation, row.inversion, row.readapt)},
         {"translation", to_string(row.translation)},
         {"inversion", row.inversion},
         {"readapt", row.readapt}};
  if (row.report) {
    j["status"] = "ok";
    j["report"] = to_json(*row.report);
  } else {
    j["status"] = "failed";
    j["error"] = row.failure;
  }
  return j;
}

json to_json(const AblationReport& report) {
  json rows = json::array();
  for (const AblationRow& r : report.rows) rows.push_back(to_json(r));
  return json{{"rows", std::move(rows)}};
}

AblationReport ablation_report_from_json(const json& j) {
  AblationReport out;
  try {
    for (const json& r : j.at("rows")) {
      AblationRow row;
      row.translation = parse_translation(r.at("translation").get<std::string>());
      row.inversion = r.at("inversion").get<bool>();
      row.readapt = r.at("readapt").get<bool>();
      if (r.at("status").get<std::string>() == "ok") {
        row.report = eval_report_from_json(r.at("report"));
      } else {
        row.failure = r.value("error", std::string("failed"));
      }
      out.rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed ablation report: ") + e.what());
  }
  return out;
}

std::string render_report(const AblationReport& report, std::vector<std::string> classes) {
  if (classes.empty()) {
    std::set<std::string> all;
    for (const AblationRow& r : report.rows) {
      if (!r.report) continue;
      for (const auto& [label, _] : r.report->per_class) all.insert(label);
    }
    classes.assign(all.begin(), all.end());
  }
  std::vector<std::string> header{"Image trans", "Int-Inv", "R-A"};
  header.insert(header.end(), classes.begin(), classes.end());
  header.push_back("mAP");
  detail::TextTable table(std::move(header), 3);

  const std::string dash = "—";
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const AblationRow& r = report.rows[i];
    std::vector<std::string> row{display_name(r.translation), r.inversion ? "yes" : "-",
                                 r.readapt ? "yes" : "-"};
    for (const std::string& c : classes) {
      if (!r.report) {
        row.push_back(dash);
        continue;
      }
      auto it = r.report->per_class.find(c);
      row.push_back(format_percent(it == r.report->per_class.end() ? std::nullopt : it->second.ap));
    }
    row.push_back(r.report ? format_percent(r.report->map_value) : dash);
    table.add_row(std::move(row));
    if (!r.report) {
      table.add_note(fmt::format("row {} ({}) failed: {}", i + 1,
                                 row_label(r.translation, r.inversion, r.readapt), r.failure));
    }
  }
  return table.str();
}

AblationPlan parse_ablation_plan(const json& j, const fs::path& base_dir) {
  static const std::set<std::string> kKeys{
      "visible",          "target",          "out_dir",          "translated_dir",
      "axes",             "hooks",           "eval",             "target_train_ids",
      "target_test_ids",  "histmatch_per_image", "timeout_seconds", "parallel_rows",
      "seed"};
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "ablation config must be an object");
  for (const auto& [key, _] : j.items()) {
    if (kKeys.count(key) == 0) throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "'");
  }

  AblationPlan plan;
  plan.visible = resolve(base_dir, get_field<std::string>(j, "visible"));
  plan.target = resolve(base_dir, get_field<std::string>(j, "target"));
  plan.base.out_dir = resolve(base_dir, get_field<std::string>(j, "out_dir"));
  if (j.contains("translated_dir") && !j["translated_dir"].is_null()) {
    plan.base.translated_dir = resolve(base_dir, get_field<std::string>(j, "translated_dir"));
  }

  const json axes = j.contains("axes") ? j["axes"] : json::object();
  try {
    const json tr = axes.value("translation", json::array({"none", "gray", "external"}));
    for (const json& t : tr) plan.axes.translation.push_back(parse_translation(t.get<std::string>()));
    for (const json& b : axes.value("inversion", json::array({false, true}))) {
      plan.axes.inversion.push_back(b.get<bool>());
    }
    for (const json& b : axes.value("readapt", json::array({false, true}))) {
      plan.axes.readapt.push_back(b.get<bool>());
    }
    if (j.contains("hooks")) {
      plan.base.hooks = j["hooks"].get<std::map<std::string, std::string>>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("axes/hooks: ") + e.what());
  }

  if (j.contains("eval")) plan.base.eval = eval_params_from_json(j["eval"]);
  if (j.contains("target_train_ids") && !j["target_train_ids"].is_null()) {
    plan.base.target_train_ids =
        read_id_list(resolve(base_dir, get_field<std::string>(j, "target_train_ids")));
  }
  if (j.contains("target_test_ids") && !j["target_test_ids"].is_null()) {
    plan.base.target_test_ids =
        read_id_list(resolve(base_dir, get_field<std::string>(j, "target_test_ids")));
  }
  if (j.contains("histmatch_per_image")) {
    plan.base.histmatch_per_image = get_field<bool>(j, "histmatch_per_image");
  }
  if (j.contains("timeout_seconds") && !j["timeout_seconds"].is_null()) {
    const double s = get_field<double>(j, "timeout_seconds");
    if (!(s > 0)) throw Error(ErrorCode::InvalidConfig, "timeout_seconds must be positive");
    plan.base.timeout = std::chrono::milliseconds(static_cast<long long>(s * 1000.0));
  }
  if (j.contains("parallel_rows")) {
    plan.parallel_rows = get_field<int>(j, "parallel_rows");
    if (plan.parallel_rows < 1) throw Error(ErrorCode::InvalidConfig, "parallel_rows must be >= 1");
  }
  if (j.contains("seed")) plan.base.seed = get_field<std::uint64_t>(j, "seed");
  return plan;
}

AblationPlan load_ablation_plan(const fs::path& config_file) {
  json j;
  try {
    j = json::parse(read_file(config_file));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, config_file.string() + ": " + e.what());
  }
  return parse_ablation_plan(j, config_file.parent_path());
}

}  // namespace thermadapt
