#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <fmt/format.h>

#include "thermadapt/imagegen.hpp"
#include "thermadapt/parallel.hpp"
#include "thermadapt/simd/kernels.hpp"
#include "thermadapt/synth.hpp"

namespace thermadapt {
namespace {

using json = nlohmann::json;

constexpr int kPlacementAttempts = 200;

bool is_bright(std::size_t object_index, double fraction) {
  const auto j = static_cast<double>(object_index);
  return std::floor((j + 1.0) * fraction) - std::floor(j * fraction) >= 1.0;
}

std::uint8_t clamp8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

struct PixelRect {
  int x0, y0, x1, y1;  // half-open

  bool overlaps_with_gap(const PixelRect& o) const {
    return x0 < o.x1 + 1 && o.x0 < x1 + 1 && y0 < o.y1 + 1 && o.y0 < y1 + 1;
  }
};

// Visible object colour with the requested luma and a random tint.
std::array<std::uint8_t, 3> tinted_colour(int luma, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> tint(-30, 30);
  const int r = std::clamp(luma + tint(rng), 0, 255);
  const int b = std::clamp(luma + tint(rng), 0, 255);
  const int g = std::clamp(
      static_cast<int>(std::lround((luma - 0.299 * r - 0.114 * b) / 0.587)), 0, 255);
  return {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
          static_cast<std::uint8_t>(b)};
}

GrayImage gray_of(const DomainRecord& r) { return to_grayscale(r.image()); }

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Median absolute deviation of pixel intensities around the median.
double median_abs_deviation(const GrayImage& img) {
  if (img.empty()) return 0.0;
  const double med = median_level(img);
  std::array<std::uint64_t, 512> hist{};
  for (std::uint8_t p : img.bytes()) {
    // 2*|p - med| is an integer because med is a multiple of 0.5.
    ++hist[static_cast<std::size_t>(std::lround(2.0 * std::abs(p - med)))];
  }
  const std::uint64_t n = img.pixel_count();
  const std::uint64_t lo_rank = (n - 1) / 2;
  const std::uint64_t hi_rank = n / 2;
  double lo = -1.0, hi = -1.0;
  std::uint64_t seen = 0;
  for (std::size_t k = 0; k < hist.size(); ++k) {
    seen += hist[k];
    if (lo < 0 && seen > lo_rank) lo = k / 2.0;
    if (hi < 0 && seen > hi_rank) {
      hi = k / 2.0;
      break;
    }
  }
  return 0.5 * (lo + hi);
}

struct Component {
  int x0, y0, x1, y1;
  std::size_t area = 0;
  double contrast_sum = 0.0;
};

std::vector<Component> label_components(const std::vector<std::uint8_t>& mask,
                                        const GrayImage& img, double background) {
  const int w = img.width();
  const int h = img.height();
  std::vector<std::uint8_t> visited(mask.size(), 0);
  std::vector<std::size_t> stack;
  std::vector<Component> out;
  const auto pixels = img.bytes();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t start = static_cast<std::size_t>(y) * w + x;
      if (mask[start] == 0 || visited[start] != 0) continue;
      Component c{x, y, x + 1, y + 1};
      visited[start] = 1;
      stack.push_back(start);
      while (!stack.empty()) {
        const std::size_t idx = stack.back();
        stack.pop_back();
        const int px = static_cast<int>(idx % w);
        const int py = static_cast<int>(idx / w);
        c.x0 = std::min(c.x0, px);
        c.y0 = std::min(c.y0, py);
        c.x1 = std::max(c.x1, px + 1);
        c.y1 = std::max(c.y1, py + 1);
        ++c.area;
        c.contrast_sum += std::abs(pixels[idx] - background);
        const std::size_t neighbours[4] = {
            px > 0 ? idx - 1 : idx, px + 1 < w ? idx + 1 : idx,
            py > 0 ? idx - w : idx, py + 1 < h ? idx + w : idx};
        for (std::size_t n : neighbours) {
          if (mask[n] != 0 && visited[n] == 0) {
            visited[n] = 1;
            stack.push_back(n);
          }
        }
      }
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace

void SynthParams::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidParams, what); };
  if (width <= 0 || height <= 0) fail("image size must be positive");
  if (min_objects < 0 || max_objects < min_objects) fail("object count range is invalid");
  if (min_size < 1 || max_size < min_size) fail("object size range is invalid");
  if (!(thermal_bright_fraction >= 0.0 && thermal_bright_fraction <= 1.0) ||
      !(visible_bright_fraction >= 0.0 && visible_bright_fraction <= 1.0)) {
    fail("polarity fractions must lie in [0,1]");
  }
  if (!(ellipse_fraction >= 0.0 && ellipse_fraction <= 1.0)) fail("ellipse fraction must lie in [0,1]");
  if (contrast <= 0 || background - contrast < 0 || background + contrast > 255) {
    fail("background +/- contrast must stay within [0,255]");
  }
  if (noise < 0) fail("noise amplitude must be non-negative");
  if (classes.empty()) fail("at least one class label is required");
  for (const auto& c : classes) {
    if (c.empty()) fail("class labels must be non-empty");
  }
}

SynthScene generate_scene(const SynthParams& params, std::string image_id,
                          std::size_t first_object_index) {
  params.validate();
  std::mt19937_64 rng(params.seed);
  const int w = params.width;
  const int h = params.height;

  std::uniform_int_distribution<int> count_dist(params.min_objects, params.max_objects);
  const int count = count_dist(rng);

  std::vector<PixelRect> rects;
  for (int k = 0; k < count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      std::uniform_int_distribution<int> size_dist(params.min_size, params.max_size);
      const int bw = std::min(size_dist(rng), w);
      const int bh = std::min(size_dist(rng), h);
      std::uniform_int_distribution<int> xd(0, w - bw);
      std::uniform_int_distribution<int> yd(0, h - bh);
      const int x0 = xd(rng);
      const int y0 = yd(rng);
      const PixelRect r{x0, y0, x0 + bw, y0 + bh};
      if (std::none_of(rects.begin(), rects.end(),
                       [&](const PixelRect& o) { return r.overlaps_with_gap(o); })) {
        rects.push_back(r);
        placed = true;
      }
    }
    if (!placed) {
      throw Error(ErrorCode::PlacementFailure,
                  fmt::format("could not place object {} of {} in a {}x{} frame", k + 1, count,
                              w, h));
    }
  }

  SynthScene scene{RgbImage(w, h), GrayImage(w, h, clamp8(params.background)),
                   AnnotationSet(image_id, w, h), {}};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) scene.visible.at(x, y, c) = clamp8(params.background);
    }
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> class_dist(0, params.classes.size() - 1);
  std::vector<ObjectInstance> objects;
  for (std::size_t k = 0; k < rects.size(); ++k) {
    const PixelRect& r = rects[k];
    const std::size_t object_index = first_object_index + k;
    const bool thermal_bright = is_bright(object_index, params.thermal_bright_fraction);
    const bool visible_bright = is_bright(object_index, params.visible_bright_fraction);
    const bool ellipse = unit(rng) < params.ellipse_fraction;
    const std::string& label = params.classes[class_dist(rng)];
    const auto thermal_level =
        clamp8(params.background + (thermal_bright ? params.contrast : -params.contrast));
    const auto colour = tinted_colour(
        params.background + (visible_bright ? params.contrast : -params.contrast), rng);

    const double cx = 0.5 * (r.x0 + r.x1);
    const double cy = 0.5 * (r.y0 + r.y1);
    const double rx = 0.5 * (r.x1 - r.x0);
    const double ry = 0.5 * (r.y1 - r.y0);
    int bx0 = r.x1, by0 = r.y1, bx1 = r.x0, by1 = r.y0;
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        if (ellipse) {
          const double dx = (x + 0.5 - cx) / rx;
          const double dy = (y + 0.5 - cy) / ry;
          if (dx * dx + dy * dy > 1.0) continue;
        }
        scene.thermal.at(x, y) = thermal_level;
        for (int c = 0; c < 3; ++c) scene.visible.at(x, y, c) = colour[c];
        bx0 = std::min(bx0, x);
        by0 = std::min(by0, y);
        bx1 = std::max(bx1, x + 1);
        by1 = std::max(by1, y + 1);
      }
    }
    objects.emplace_back(label, BoundingBox(bx0, by0, bx1, by1));
    scene.thermal_bright.push_back(thermal_bright);
  }

  if (params.noise > 0) {
    std::uniform_int_distribution<int> jitter(-params.noise, params.noise);
    for (auto& p : scene.thermal.bytes()) p = clamp8(p + jitter(rng));
    for (auto& p : scene.visible.bytes()) p = clamp8(p + jitter(rng));
  }
  scene.annotations = AnnotationSet(std::move(image_id), w, h, std::move(objects));
  return scene;
}

SynthDomains generate_domains(const SynthParams& params, std::size_t count, int jobs) {
  params.validate();
  // Object counts are drawn from the per-scene RNG, so the running object
  // index for the polarity assignment needs a sequential pre-pass.
  std::vector<std::size_t> first_index(count, 0);
  std::size_t running = 0;
  for (std::size_t i = 0; i < count; ++i) {
    first_index[i] = running;
    std::mt19937_64 rng(params.seed + i);
    std::uniform_int_distribution<int> count_dist(params.min_objects, params.max_objects);
    running += static_cast<std::size_t>(count_dist(rng));
  }
  std::vector<std::optional<SynthScene>> scenes(count);
  parallel_for(count, jobs, [&](std::size_t i) {
    SynthParams p = params;
    p.seed = params.seed + i;
    scenes[i].emplace(generate_scene(p, fmt::format("scene_{:05d}", i), first_index[i]));
  });
  std::vector<DomainRecord> visible;
  std::vector<DomainRecord> thermal;
  for (auto& s : scenes) {
    visible.push_back(make_record(s->annotations, std::move(s->visible)));
    thermal.push_back(make_record(s->annotations, std::move(s->thermal)));
  }
  return {DomainDataset("visible", std::move(visible), true),
          DomainDataset("thermal", std::move(thermal), true)};
}

std::string_view to_string(Polarity p) {
  switch (p) {
    case Polarity::Bright: return "bright";
    case Polarity::Dark: return "dark";
    case Polarity::Both: return "both";
  }
  return "bright";
}

Polarity parse_polarity(std::string_view text) {
  if (text == "bright") return Polarity::Bright;
  if (text == "dark") return Polarity::Dark;
  if (text == "both") return Polarity::Both;
  throw Error(ErrorCode::InvalidParams, "unknown polarity '" + std::string(text) + "'");
}

void DetectorParams::validate() const {
  if (!(threshold >= 0.0 && threshold <= 255.0)) {
    throw Error(ErrorCode::InvalidParams, "detector threshold must lie in [0,255]");
  }
  if (min_area < 1) throw Error(ErrorCode::InvalidParams, "minimum blob area must be >= 1");
  if (background && !(*background >= 0.0 && *background <= 255.0)) {
    throw Error(ErrorCode::InvalidParams, "background level must lie in [0,255]");
  }
  if (class_label.empty()) throw Error(ErrorCode::InvalidParams, "empty detector class label");
}

json to_json(const DetectorParams& p) {
  return json{{"threshold", p.threshold},
              {"polarity", std::string(to_string(p.polarity))},
              {"min_area", p.min_area},
              {"background", p.background ? json(*p.background) : json(nullptr)},
              {"class_label", p.class_label}};
}

DetectorParams detector_params_from_json(const json& j) {
  DetectorParams p;
  try {
    p.threshold = j.value("threshold", p.threshold);
    p.polarity = parse_polarity(j.value("polarity", std::string("bright")));
    p.min_area = j.value("min_area", p.min_area);
    if (j.contains("background") && !j.at("background").is_null()) {
      p.background = j.at("background").get<double>();
    }
    p.class_label = j.value("class_label", p.class_label);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("detector params: ") + e.what());
  }
  p.validate();
  return p;
}

double median_level(const GrayImage& img) {
  if (img.empty()) return 0.0;
  const Histogram h = histogram(img);
  const std::uint64_t n = img.pixel_count();
  const std::uint64_t lo_rank = (n - 1) / 2;
  const std::uint64_t hi_rank = n / 2;
  int lo = -1, hi = -1;
  std::uint64_t seen = 0;
  for (int k = 0; k < 256; ++k) {
    seen += h[k];
    if (lo < 0 && seen > lo_rank) lo = k;
    if (hi < 0 && seen > hi_rank) {
      hi = k;
      break;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<Detection> threshold_detect(const GrayImage& img, const DetectorParams& params,
                                        const std::string& image_id) {
  params.validate();
  std::vector<Detection> out;
  if (img.empty()) return out;
  const double background = params.background.value_or(median_level(img));
  std::vector<std::uint8_t> mask(img.pixel_count());

  auto emit = [&] {
    for (const Component& c : label_components(mask, img, background)) {
      if (c.area < static_cast<std::size_t>(params.min_area)) continue;
      const double score =
          std::clamp(c.contrast_sum / static_cast<double>(c.area) / 255.0, 0.0, 1.0);
      out.emplace_back(image_id, params.class_label, score, BoundingBox(c.x0, c.y0, c.x1, c.y1));
    }
  };

  if (params.polarity != Polarity::Dark) {
    // p > background + threshold
    const double cut = std::floor(background + params.threshold);
    if (cut < 255.0) {
      simd::mask_greater(img.bytes(), mask, static_cast<std::uint8_t>(cut));
      emit();
    }
  }
  if (params.polarity != Polarity::Bright) {
    // p < background - threshold
    const double cut = std::ceil(background - params.threshold);
    if (cut > 0.0) {
      simd::mask_less(img.bytes(), mask, static_cast<std::uint8_t>(cut));
      emit();
    }
  }
  return out;
}

std::vector<Detection> detect_domain(const DomainDataset& domain, const DetectorParams& params,
                                     int jobs) {
  const auto& records = domain.records();
  std::vector<std::vector<Detection>> per_image(records.size());
  parallel_for(records.size(), jobs, [&](std::size_t i) {
    per_image[i] = threshold_detect(gray_of(records[i]), params, records[i].image_id);
  });
  std::vector<Detection> out;
  for (auto& v : per_image) out.insert(out.end(), v.begin(), v.end());
  return out;
}

DetectorParams calibrate_detector(const DomainDataset& source, const DomainDataset* target,
                                  int jobs) {
  if (!source.labelled()) {
    throw Error(ErrorCode::InvalidParams, "detector calibration needs a labelled source domain");
  }
  constexpr double kMinContrast = 4.0;
  struct Stats {
    std::vector<double> contrasts;
    std::vector<double> areas;
    std::map<std::string, std::size_t> labels;
    double mad = 0.0;
  };
  const auto& records = source.records();
  std::vector<Stats> stats(records.size());
  parallel_for(records.size(), jobs, [&](std::size_t i) {
    const GrayImage img = gray_of(records[i]);
    const double bg = median_level(img);
    Stats& s = stats[i];
    s.mad = median_abs_deviation(img);
    for (const ObjectInstance& obj : records[i].annotations.objects()) {
      if (obj.difficult) continue;
      const int x0 = static_cast<int>(std::floor(obj.box.xmin()));
      const int y0 = static_cast<int>(std::floor(obj.box.ymin()));
      const int x1 = std::min(img.width(), static_cast<int>(std::ceil(obj.box.xmax())));
      const int y1 = std::min(img.height(), static_cast<int>(std::ceil(obj.box.ymax())));
      double sum = 0.0;
      std::size_t n = 0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x, ++n) sum += img.at(x, y);
      }
      if (n == 0) continue;
      s.contrasts.push_back(sum / static_cast<double>(n) - bg);
      s.areas.push_back(obj.box.area());
      ++s.labels[obj.class_label];
    }
  });

  std::vector<double> contrasts, areas, mads;
  std::map<std::string, std::size_t> labels;
  for (const Stats& s : stats) {
    contrasts.insert(contrasts.end(), s.contrasts.begin(), s.contrasts.end());
    areas.insert(areas.end(), s.areas.begin(), s.areas.end());
    mads.push_back(s.mad);
    for (const auto& [l, n] : s.labels) labels[l] += n;
  }

  DetectorParams p;
  const auto bright = std::count_if(contrasts.begin(), contrasts.end(),
                                    [&](double c) { return c > kMinContrast; });
  const auto dark = std::count_if(contrasts.begin(), contrasts.end(),
                                  [&](double c) { return c < -kMinContrast; });
  const double total = static_cast<double>(std::max<std::size_t>(contrasts.size(), 1));
  const bool has_bright = static_cast<double>(bright) / total >= 0.05;
  const bool has_dark = static_cast<double>(dark) / total >= 0.05;
  p.polarity = has_bright && has_dark ? Polarity::Both
               : has_dark             ? Polarity::Dark
                                      : Polarity::Bright;

  std::vector<double> magnitudes;
  for (double c : contrasts) {
    if (std::abs(c) > kMinContrast) magnitudes.push_back(std::abs(c));
  }
  double threshold = magnitudes.empty() ? DetectorParams{}.threshold : 0.5 * median_of(magnitudes);
  threshold = std::max(threshold, 3.0 * median_of(mads));

  if (target != nullptr && !target->empty()) {
    const auto& trecs = target->records();
    std::vector<double> target_mads(trecs.size());
    parallel_for(trecs.size(), jobs, [&](std::size_t i) {
      target_mads[i] = median_abs_deviation(gray_of(trecs[i]));
    });
    threshold = std::max(threshold, 3.0 * median_of(target_mads));
  }
  p.threshold = std::clamp(threshold, 0.0, 255.0);

  if (!areas.empty()) {
    const double smallest = *std::min_element(areas.begin(), areas.end());
    p.min_area = std::max(1, static_cast<int>(std::floor(0.25 * smallest)));
  }
  if (!labels.empty()) {
    p.class_label = std::max_element(labels.begin(), labels.end(), [](const auto& a, const auto& b) {
                      return a.second < b.second;
                    })->first;
  }
  return p;
}

}  // namespace thermadapt
