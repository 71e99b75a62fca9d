#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "text_table.hpp"
#include "thermadapt/evalmetrics.hpp"
#include "thermadapt/parallel.hpp"

namespace thermadapt {
namespace {

using json = nlohmann::json;

// Canonical visiting order for matching; see match_detections.
std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t i) {
    const Detection& d = dets[i];
    return std::make_tuple(-d.score, std::string_view(d.image_id), d.box.xmin(), d.box.ymin(),
                           d.box.xmax(), d.box.ymax());
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  return order;
}

json to_json(const Detection& d) {
  return json{{"image_id", d.image_id},
              {"class_label", d.class_label},
              {"score", d.score},
              {"box", {d.box.xmin(), d.box.ymin(), d.box.xmax(), d.box.ymax()}}};
}

Detection detection_from_json(const json& j, std::size_t index) {
  const std::string where = "detection " + std::to_string(index);
  if (!j.is_object()) throw Error(ErrorCode::InvalidDetection, where + " is not an object");
  for (const char* key : {"image_id", "class_label", "score", "box"}) {
    if (!j.contains(key)) throw Error(ErrorCode::InvalidDetection, where + " lacks '" + key + "'");
  }
  const json& box = j.at("box");
  if (!box.is_array() || box.size() != 4 || !j.at("score").is_number() ||
      !j.at("image_id").is_string() || !j.at("class_label").is_string()) {
    throw Error(ErrorCode::InvalidDetection, where + " has ill-typed fields");
  }
  for (const json& v : box) {
    if (!v.is_number()) throw Error(ErrorCode::InvalidDetection, where + " box is not numeric");
  }
  return Detection(j.at("image_id").get<std::string>(), j.at("class_label").get<std::string>(),
                   j.at("score").get<double>(),
                   BoundingBox(box[0].get<double>(), box[1].get<double>(), box[2].get<double>(),
                               box[3].get<double>()));
}

}  // namespace

Detection::Detection(std::string id, std::string label, double s, BoundingBox b)
    : image_id(std::move(id)), class_label(std::move(label)), score(s), box(b) {
  if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
    throw Error(ErrorCode::InvalidDetection, "score must be finite and within [0,1]");
  }
  if (class_label.empty()) throw Error(ErrorCode::InvalidDetection, "empty class label");
}

std::string_view to_string(ApMode mode) {
  return mode == ApMode::AllPoints ? "all_points" : "eleven_point";
}

ApMode parse_ap_mode(std::string_view text) {
  if (text == "all_points") return ApMode::AllPoints;
  if (text == "eleven_point") return ApMode::ElevenPoint;
  throw Error(ErrorCode::InvalidParams, "unknown AP mode '" + std::string(text) + "'");
}

double iou(const BoundingBox& a, const BoundingBox& b, bool legacy_area) {
  const double pad = legacy_area ? 1.0 : 0.0;
  const double iw = std::min(a.xmax(), b.xmax()) - std::max(a.xmin(), b.xmin()) + pad;
  const double ih = std::min(a.ymax(), b.ymax()) - std::max(a.ymin(), b.ymin()) + pad;
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double area_a = (a.width() + pad) * (a.height() + pad);
  const double area_b = (b.width() + pad) * (b.height() + pad);
  return inter / (area_a + area_b - inter);
}

std::size_t count_ground_truth(std::span<const AnnotationSet> ground_truth,
                               std::string_view class_label) {
  std::size_t n = 0;
  for (const AnnotationSet& ann : ground_truth) {
    for (const ObjectInstance& obj : ann.objects()) {
      if (!obj.difficult && obj.class_label == class_label) ++n;
    }
  }
  return n;
}

std::vector<ScoredFlag> match_detections(std::span<const Detection> dets,
                                         std::span<const AnnotationSet> ground_truth,
                                         std::string_view class_label, double iou_threshold,
                                         bool legacy_area) {
  for (const Detection& d : dets) {
    if (d.class_label != class_label) {
      throw Error(ErrorCode::InvalidParams, "detection of class '" + d.class_label +
                                                "' passed to matching for '" +
                                                std::string(class_label) + "'");
    }
  }
  struct Candidate {
    const BoundingBox* box;
    bool matched = false;
  };
  std::unordered_map<std::string_view, std::vector<Candidate>> by_image;
  for (const AnnotationSet& ann : ground_truth) {
    auto& slot = by_image[ann.image_id()];
    for (const ObjectInstance& obj : ann.objects()) {
      if (!obj.difficult && obj.class_label == class_label) slot.push_back({&obj.box});
    }
  }

  std::vector<ScoredFlag> flags;
  flags.reserve(dets.size());
  for (std::size_t idx : score_order(dets)) {
    const Detection& d = dets[idx];
    Candidate* best = nullptr;
    double best_iou = -1.0;
    if (auto it = by_image.find(d.image_id); it != by_image.end()) {
      for (Candidate& c : it->second) {
        if (c.matched) continue;
        const double v = iou(d.box, *c.box, legacy_area);
        if (v > best_iou) {
          best_iou = v;
          best = &c;
        }
      }
    }
    const bool tp = best != nullptr && best_iou >= iou_threshold;
    if (tp) best->matched = true;
    flags.push_back({d.score, tp});
  }
  return flags;
}

PRCurve precision_recall_curve(std::span<const ScoredFlag> flags, std::size_t n_gt) {
  PRCurve curve;
  curve.n_gt = n_gt;
  curve.points.reserve(flags.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < flags.size(); ++k) {
    if (flags[k].is_tp) ++tp;
    const double precision = static_cast<double>(tp) / static_cast<double>(k + 1);
    const double recall = n_gt == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(n_gt);
    curve.points.push_back({recall, precision});
  }
  return curve;
}

double average_precision(const PRCurve& curve, ApMode mode) {
  if (curve.n_gt == 0) throw Error(ErrorCode::UndefinedAP, "no ground truth for this class");
  const auto& pts = curve.points;

  if (mode == ApMode::ElevenPoint) {
    double sum = 0.0;
    for (int i = 0; i <= 10; ++i) {
      const double t = i / 10.0;
      double best = 0.0;
      for (const PrPoint& p : pts) {
        if (p.recall >= t) best = std::max(best, p.precision);
      }
      sum += best;
    }
    return sum / 11.0;
  }

  // Precision envelope: running max from the high-recall end.
  std::vector<double> envelope(pts.size());
  double running = 0.0;
  for (std::size_t i = pts.size(); i-- > 0;) {
    running = std::max(running, pts[i].precision);
    envelope[i] = running;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].recall != prev_recall) {
      ap += (pts[i].recall - prev_recall) * envelope[i];
      prev_recall = pts[i].recall;
    }
  }
  return ap;
}

MeanAp mean_ap(const std::map<std::string, std::optional<double>>& per_class_ap) {
  MeanAp out;
  double sum = 0.0;
  for (const auto& [label, ap] : per_class_ap) {
    if (ap) {
      sum += *ap;
      out.included.push_back(label);
    } else {
      out.excluded.push_back(label);
    }
  }
  if (out.included.empty()) {
    throw Error(ErrorCode::NoDefinedClasses, "no class has a defined AP");
  }
  out.value = sum / static_cast<double>(out.included.size());
  return out;
}

EvalReport evaluate(std::span<const Detection> dets, const DomainDataset& target,
                    const EvalParams& params, int jobs) {
  if (!target.labelled()) {
    throw Error(ErrorCode::InvalidParams, "evaluation target '" + target.name() + "' is unlabelled");
  }
  std::vector<std::string> classes = params.classes;
  if (classes.empty()) {
    const auto labels = target.class_labels();
    classes.assign(labels.begin(), labels.end());
  }
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  EvalReport report;
  report.params = params;
  report.params.classes = classes;

  std::map<std::string, std::vector<Detection>> by_class;
  for (const std::string& c : classes) by_class[c];
  for (const Detection& d : dets) {
    auto it = by_class.find(d.class_label);
    if (it == by_class.end()) {
      ++report.unknown_class_detections[d.class_label];
    } else {
      it->second.push_back(d);
    }
  }

  std::vector<AnnotationSet> gt;
  gt.reserve(target.size());
  for (const DomainRecord& r : target.records()) gt.push_back(r.annotations);

  std::vector<ClassResult> results(classes.size());
  parallel_for(classes.size(), jobs, [&](std::size_t i) {
    const std::vector<Detection>& class_dets = by_class.at(classes[i]);
    const auto flags =
        match_detections(class_dets, gt, classes[i], params.iou_threshold, params.legacy_area);
    ClassResult& r = results[i];
    r.n_gt = count_ground_truth(gt, classes[i]);
    r.n_det = flags.size();
    r.n_tp = static_cast<std::size_t>(
        std::count_if(flags.begin(), flags.end(), [](const ScoredFlag& f) { return f.is_tp; }));
    if (r.n_gt > 0) r.ap = average_precision(precision_recall_curve(flags, r.n_gt), params.mode);
  });

  std::map<std::string, std::optional<double>> aps;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    report.per_class[classes[i]] = results[i];
    aps[classes[i]] = results[i].ap;
  }
  const MeanAp m = mean_ap(aps);
  report.map_value = m.value;
  report.excluded_classes = m.excluded;
  return report;
}

std::vector<Detection> parse_detections_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidDetection, std::string("detections file: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::InvalidDetection, "detections file must be a JSON array");
  std::vector<Detection> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) out.push_back(detection_from_json(doc[i], i));
  return out;
}

std::string detections_to_json(std::span<const Detection> dets) {
  json doc = json::array();
  for (const Detection& d : dets) doc.push_back(to_json(d));
  return doc.dump(1) + "\n";
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_detections_json(ss.str());
}

void write_detections(const std::filesystem::path& path, std::span<const Detection> dets) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << detections_to_json(dets);
}

json to_json(const EvalParams& params) {
  return json{{"iou_threshold", params.iou_threshold},
              {"mode", std::string(to_string(params.mode))},
              {"legacy_area", params.legacy_area},
              {"classes", params.classes}};
}

EvalParams eval_params_from_json(const json& j) {
  EvalParams p;
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "eval params must be an object");
  try {
    p.iou_threshold = j.value("iou_threshold", p.iou_threshold);
    p.mode = parse_ap_mode(j.value("mode", std::string("all_points")));
    p.legacy_area = j.value("legacy_area", false);
    p.classes = j.value("classes", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("eval params: ") + e.what());
  }
  if (!(p.iou_threshold > 0.0 && p.iou_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "iou_threshold must be in (0, 1]");
  }
  return p;
}

json to_json(const EvalReport& report) {
  json per_class = json::object();
  for (const auto& [label, r] : report.per_class) {
    per_class[label] = json{{"ap", r.ap ? json(*r.ap) : json(nullptr)},
                            {"n_gt", r.n_gt},
                            {"n_det", r.n_det},
                            {"n_tp", r.n_tp}};
  }
  return json{{"per_class", per_class},
              {"map", report.map_value},
              {"excluded_classes", report.excluded_classes},
              {"unknown_class_detections", report.unknown_class_detections},
              {"params", to_json(report.params)}};
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport report;
  try {
    for (const auto& [label, r] : j.at("per_class").items()) {
      ClassResult c;
      if (!r.at("ap").is_null()) c.ap = r.at("ap").get<double>();
      c.n_gt = r.at("n_gt").get<std::size_t>();
      c.n_det = r.at("n_det").get<std::size_t>();
      c.n_tp = r.at("n_tp").get<std::size_t>();
      report.per_class[label] = c;
    }
    report.map_value = j.at("map").get<double>();
    report.excluded_classes = j.value("excluded_classes", std::vector<std::string>{});
    report.unknown_class_detections =
        j.value("unknown_class_detections", std::map<std::string, std::size_t>{});
    report.params = eval_params_from_json(j.at("params"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("eval report: ") + e.what());
  }
  return report;
}

std::string format_percent(std::optional<double> fraction) {
  if (!fraction) return "n/a";
  return fmt::format("{:.1f}", *fraction * 100.0);
}

std::string render_eval_table(const std::vector<std::pair<std::string, EvalReport>>& rows,
                              std::vector<std::string> classes) {
  if (classes.empty()) {
    std::set<std::string> all;
    for (const auto& [_, report] : rows) {
      for (const auto& [label, r] : report.per_class) all.insert(label);
    }
    classes.assign(all.begin(), all.end());
  }
  std::vector<std::string> header{"Method"};
  header.insert(header.end(), classes.begin(), classes.end());
  header.push_back("mAP");
  detail::TextTable table(std::move(header), 1);
  for (const auto& [label, report] : rows) {
    std::vector<std::string> row{label};
    for (const std::string& c : classes) {
      auto it = report.per_class.find(c);
      row.push_back(format_percent(it == report.per_class.end() ? std::nullopt : it->second.ap));
    }
    row.push_back(format_percent(report.map_value));
    table.add_row(std::move(row));
  }
  return table.str();
}

}  // namespace thermadapt
