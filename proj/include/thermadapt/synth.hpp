#pragma once

// Synthetic paired visible/thermal scenes with exact ground truth, and an
// intensity-threshold blob detector that stands in for a trained detector.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "thermadapt/dataset.hpp"
#include "thermadapt/evalmetrics.hpp"
#include "thermadapt/image.hpp"

namespace thermadapt {

struct SynthParams {
  int width = 128;
  int height = 96;
  int min_objects = 1;
  int max_objects = 4;
  // Side length range of object boxes, in pixels.
  int min_size = 8;
  int max_size = 24;
  // Fraction of objects drawn brighter than the background in the thermal
  // rendition; the rest are darker. Assigned by running object index, so a
  // domain of n objects has exactly floor(n * fraction) bright ones.
  double thermal_bright_fraction = 1.0;
  // Same, for the luma of the visible rendition.
  double visible_bright_fraction = 1.0;
  int background = 96;
  // |object - background| intensity, both renditions.
  int contrast = 80;
  // Uniform per-pixel jitter in [-noise, noise].
  int noise = 0;
  double ellipse_fraction = 0.5;
  std::vector<std::string> classes{"person"};
  std::uint64_t seed = 0;

  // Throws InvalidParams.
  void validate() const;
};

struct SynthScene {
  RgbImage visible;
  GrayImage thermal;
  AnnotationSet annotations;
  // Per object, whether it is brighter than the background in `thermal`.
  std::vector<bool> thermal_bright;
};

// Objects never overlap and keep a one-pixel gap, so 4-connected blobs stay
// separate. Boxes are the tight bounds of the drawn pixels. Throws
// PlacementFailure when the frame cannot fit the drawn object count.
// first_object_index positions this scene within a larger domain for the
// polarity assignment.
SynthScene generate_scene(const SynthParams& params, std::string image_id,
                          std::size_t first_object_index = 0);

struct SynthDomains {
  DomainDataset visible;
  DomainDataset thermal;
};

// `count` scenes "scene_00000"...; scene i uses seed params.seed + i.
SynthDomains generate_domains(const SynthParams& params, std::size_t count, int jobs = 1);

enum class Polarity { Bright, Dark, Both };

std::string_view to_string(Polarity p);
Polarity parse_polarity(std::string_view text);

struct DetectorParams {
  // Contrast threshold relative to the background level, in [0, 255]. A pixel
  // is bright when p > background + threshold and dark when
  // p < background - threshold.
  double threshold = 32.0;
  Polarity polarity = Polarity::Bright;
  int min_area = 1;
  // Fixed background level; when unset, the image median is used.
  std::optional<double> background;
  std::string class_label = "person";

  // Throws InvalidParams.
  void validate() const;
};

nlohmann::json to_json(const DetectorParams& p);
DetectorParams detector_params_from_json(const nlohmann::json& j);

// Median intensity, averaging the two middle values for even pixel counts.
double median_level(const GrayImage& img);

// 4-connected components of the thresholded image, filtered by area. Each
// component becomes a detection whose box is the component's pixel bounds
// and whose score is its mean |p - background| / 255. Bright components
// precede dark ones; within a polarity, raster order of first pixel.
std::vector<Detection> threshold_detect(const GrayImage& img, const DetectorParams& params,
                                        const std::string& image_id = "");

std::vector<Detection> detect_domain(const DomainDataset& domain, const DetectorParams& params,
                                     int jobs = 1);

// The mock "training" step: infers polarity, threshold, minimum area and
// label from the annotated objects of a source domain. When unlabelled
// target images are supplied, the threshold is raised above their
// background noise (a crude re-adaptation to the target statistics).
DetectorParams calibrate_detector(const DomainDataset& source,
                                  const DomainDataset* target = nullptr, int jobs = 1);

}  // namespace thermadapt
