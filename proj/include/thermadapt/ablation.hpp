#pragma once

// Ablation harness: one pipeline row per (translation, inversion,
// re-adaptation) configuration. Neural stages run as external processes
// through command templates; every intermediate domain is written under the
// row's output directory.
//
// Row directory layout:
//   config.json          row description handed to hooks as {CONFIG}
//   source/              source domain used for training (images + annotations)
//   translate/           translate-hook output, one <image_id>.png per source id
//   target_train/        unlabelled target images exposed to re-adaptation
//   no_target/           empty domain bound to {TARGET_DIR} when R-A is off
//   target_test/         unlabelled target images the detector runs on
//   train/, detect/      hook output directories (detect/detections.json)
//   report.json          EvalReport of the row

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "thermadapt/dataset.hpp"
#include "thermadapt/evalmetrics.hpp"

namespace thermadapt {

enum class Translation { None, Gray, HistMatch, External };

std::string_view to_string(Translation t);
Translation parse_translation(std::string_view text);

enum class Stage { Translate, Train, Detect };

std::string_view to_string(Stage s);

struct PipelineConfig {
  Translation translation = Translation::None;
  bool inversion = false;
  bool readapt = false;
  // Stage name ("translate", "train", "detect") -> command template.
  std::map<std::string, std::string> hooks;
  std::filesystem::path out_dir;
  // Pre-translated images for Translation::External; otherwise the translate
  // hook produces them.
  std::optional<std::filesystem::path> translated_dir;
  std::optional<std::set<std::string>> target_train_ids;
  std::optional<std::set<std::string>> target_test_ids;
  EvalParams eval;
  bool histmatch_per_image = false;
  std::optional<std::chrono::milliseconds> timeout;
  std::uint64_t seed = 0;

  // e.g. "gray+inv+ra"
  std::string label() const;
  // Throws InvalidCombination when the row needs a hook it does not have.
  void validate() const;
};

struct GridAxes {
  std::vector<Translation> translation;
  std::vector<bool> inversion;
  std::vector<bool> readapt;
};

// Cartesian product ordered by translation, then re-adaptation, then
// inversion. Rows without translation only vary re-adaptation: inverting the
// untranslated colour source is not a configuration. Each row gets
// out_dir = base.out_dir / "<nn>_<label>".
std::vector<PipelineConfig> plan_grid(const GridAxes& axes, const PipelineConfig& base);

// The 10-row published grid: {none, gray, external} x inversion x R-A.
GridAxes published_grid_axes();

DomainDataset build_source_for(const PipelineConfig& config, const DomainDataset& visible,
                               const DomainDataset& target, int jobs = 1);

struct StageOutcome {
  std::string command;
  int exit_code = 0;
  std::filesystem::path artifact;
  std::filesystem::path log;
};

// Placeholders: {SOURCE_DIR}, {TARGET_DIR}, {OUT_DIR}, {CONFIG}. Bound values
// are single-quoted for /bin/sh. OUT_DIR is created; every other bound path
// must exist. The command's stdout/stderr go to "<OUT_DIR>.log".
//
// Contract artifacts: translate -> at least one PNG in OUT_DIR, detect ->
// OUT_DIR/detections.json, train -> a non-empty OUT_DIR.
//
// Throws UnresolvedPlaceholder, HookFailed, HookTimeout or MissingOutput.
StageOutcome run_stage_hook(Stage stage, const std::string& command_template,
                            const std::map<std::string, std::filesystem::path>& bindings,
                            std::optional<std::chrono::milliseconds> timeout = std::nullopt);

// Substitutes placeholders without running anything.
std::string expand_hook_template(const std::string& command_template,
                                 const std::map<std::string, std::filesystem::path>& bindings);

EvalReport run_pipeline(const PipelineConfig& config, const DomainDataset& visible,
                        const DomainDataset& target, int jobs = 1);

struct AblationRow {
  Translation translation = Translation::None;
  bool inversion = false;
  bool readapt = false;
  std::optional<EvalReport> report;
  std::string failure;

  bool ok() const { return report.has_value(); }
};

struct AblationReport {
  std::vector<AblationRow> rows;
};

// Runs every row; a failing row is recorded and the rest still run. With
// parallel_rows > 1, rows run concurrently (their out_dirs are disjoint).
AblationReport run_ablation(const std::vector<PipelineConfig>& configs,
                            const DomainDataset& visible, const DomainDataset& target,
                            int parallel_rows = 1, int jobs = 1);

nlohmann::json to_json(const AblationRow& row);
nlohmann::json to_json(const AblationReport& report);
AblationReport ablation_report_from_json(const nlohmann::json& j);

// Columns: Image trans, Int-Inv, R-A, one AP per class, mAP (percent, one
// decimal). Failed rows show "—" cells and a note below the table.
std::string render_report(const AblationReport& report, std::vector<std::string> classes = {});

// Ablation config file (JSON). Relative paths resolve against the file's
// directory.
//   {
//     "visible": "dir", "target": "dir", "out_dir": "dir",
//     "translated_dir": "dir",                       (optional)
//     "axes": {"translation": ["none", "gray", ...],
//              "inversion": [false, true], "readapt": [false, true]},
//     "hooks": {"translate": "...", "train": "...", "detect": "..."},
//     "eval": {"iou_threshold": 0.5, "mode": "all_points",
//              "legacy_area": false, "classes": [...]},
//     "target_train_ids": "file", "target_test_ids": "file",  (optional)
//     "histmatch_per_image": false, "timeout_seconds": null,
//     "parallel_rows": 1, "seed": 0
//   }
struct AblationPlan {
  std::filesystem::path visible;
  std::filesystem::path target;
  GridAxes axes;
  PipelineConfig base;
  int parallel_rows = 1;
};

AblationPlan load_ablation_plan(const std::filesystem::path& config_file);
AblationPlan parse_ablation_plan(const nlohmann::json& j, const std::filesystem::path& base_dir);

}  // namespace thermadapt
