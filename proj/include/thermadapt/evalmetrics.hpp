#pragma once

// Detector scoring against a labelled domain: IoU, greedy matching, the
// precision/recall sweep, per-class AP and mAP.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "thermadapt/dataset.hpp"

namespace thermadapt {

struct Detection {
  // Throws InvalidDetection unless score is finite and within [0, 1].
  Detection(std::string image_id, std::string class_label, double score, BoundingBox box);

  std::string image_id;
  std::string class_label;
  double score;
  BoundingBox box;

  friend bool operator==(const Detection&, const Detection&) = default;
};

enum class ApMode { AllPoints, ElevenPoint };

std::string_view to_string(ApMode mode);
ApMode parse_ap_mode(std::string_view text);

struct EvalParams {
  double iou_threshold = 0.5;
  ApMode mode = ApMode::AllPoints;
  // Classic VOC pixel-inclusive areas: +1 per axis.
  bool legacy_area = false;
  // Classes to score. Empty means every label present in the target domain.
  std::vector<std::string> classes;

  friend bool operator==(const EvalParams&, const EvalParams&) = default;
};

double iou(const BoundingBox& a, const BoundingBox& b, bool legacy_area = false);

struct ScoredFlag {
  double score;
  bool is_tp;

  friend bool operator==(const ScoredFlag&, const ScoredFlag&) = default;
};

// Greedy single-match assignment. Detections are visited by descending
// score; each takes the unmatched, non-difficult ground truth of its class on
// the same image with the highest IoU and is a true positive if that IoU
// reaches the threshold. Equal scores are ordered by image id, then box
// coordinates, then input position, so any permutation of the input yields
// the same output.
//
// Every detection must carry class_label; otherwise InvalidParams.
std::vector<ScoredFlag> match_detections(std::span<const Detection> dets,
                                         std::span<const AnnotationSet> ground_truth,
                                         std::string_view class_label, double iou_threshold,
                                         bool legacy_area = false);

// Non-difficult instances of class_label.
std::size_t count_ground_truth(std::span<const AnnotationSet> ground_truth,
                               std::string_view class_label);

struct PrPoint {
  double recall;
  double precision;

  friend bool operator==(const PrPoint&, const PrPoint&) = default;
};

struct PRCurve {
  std::vector<PrPoint> points;
  std::size_t n_gt = 0;
};

// One point per prefix of the score-ordered flags. Recall is 0 when n_gt is 0.
PRCurve precision_recall_curve(std::span<const ScoredFlag> flags, std::size_t n_gt);

// Throws UndefinedAP when the curve has no ground truth.
double average_precision(const PRCurve& curve, ApMode mode);

struct MeanAp {
  double value = 0.0;
  std::vector<std::string> included;
  std::vector<std::string> excluded;
};

// Arithmetic mean over classes with a defined AP; classes mapped to nullopt
// are excluded from the count and listed. Throws NoDefinedClasses.
MeanAp mean_ap(const std::map<std::string, std::optional<double>>& per_class_ap);

struct ClassResult {
  std::optional<double> ap;
  std::size_t n_gt = 0;
  std::size_t n_det = 0;
  std::size_t n_tp = 0;

  friend bool operator==(const ClassResult&, const ClassResult&) = default;
};

struct EvalReport {
  std::map<std::string, ClassResult> per_class;
  double map_value = 0.0;
  std::vector<std::string> excluded_classes;
  // Detections whose class is not in the label set; counted, then ignored.
  std::map<std::string, std::size_t> unknown_class_detections;
  EvalParams params;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Detections on images absent from the target count as false positives.
EvalReport evaluate(std::span<const Detection> dets, const DomainDataset& target,
                    const EvalParams& params, int jobs = 1);

// Detection results file: a JSON array of
//   {"image_id": str, "class_label": str, "score": num, "box": [xmin, ymin, xmax, ymax]}
std::vector<Detection> parse_detections_json(std::string_view text);
std::string detections_to_json(std::span<const Detection> dets);
std::vector<Detection> read_detections(const std::filesystem::path& path);
void write_detections(const std::filesystem::path& path, std::span<const Detection> dets);

nlohmann::json to_json(const EvalParams& params);
EvalParams eval_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

// Percent with one decimal ("26.5"); "n/a" for an undefined value.
std::string format_percent(std::optional<double> fraction);

// Aligned text table: a label column, one AP column per class, then mAP.
// Classes default to the union of the reports' classes in name order.
std::string render_eval_table(const std::vector<std::pair<std::string, EvalReport>>& rows,
                              std::vector<std::string> classes = {});

}  // namespace thermadapt
