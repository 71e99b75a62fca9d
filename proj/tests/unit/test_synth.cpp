#include <gtest/gtest.h>

#include <random>

#include "thermadapt/error.hpp"
#include "thermadapt/imagegen.hpp"
#include "thermadapt/synth.hpp"

using namespace thermadapt;

namespace {

SynthParams params(std::uint64_t seed) {
  SynthParams p;
  p.seed = seed;
  return p;
}

TEST(Synth, ZeroObjectsGivesBlankScene) {
  SynthParams p = params(1);
  p.min_objects = p.max_objects = 0;
  const SynthScene s = generate_scene(p, "blank");
  EXPECT_TRUE(s.annotations.objects().empty());
  EXPECT_EQ(s.thermal, GrayImage(p.width, p.height, static_cast<std::uint8_t>(p.background)));
  EXPECT_EQ(to_grayscale(s.visible), s.thermal);
}

TEST(Synth, Deterministic) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthParams p = params(seed);
    p.noise = 5;
    const SynthScene a = generate_scene(p, "x");
    const SynthScene b = generate_scene(p, "x");
    EXPECT_EQ(a.visible, b.visible);
    EXPECT_EQ(a.thermal, b.thermal);
    EXPECT_EQ(a.annotations, b.annotations);
  }
  const auto d1 = generate_domains(params(3), 12, 1);
  const auto d2 = generate_domains(params(3), 12, 4);
  EXPECT_EQ(d1.visible, d2.visible);
  EXPECT_EQ(d1.thermal, d2.thermal);
}

TEST(Synth, BoxesExactlyBoundDrawnPixels) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    SynthParams p = params(seed);
    p.thermal_bright_fraction = 0.5;
    const SynthScene s = generate_scene(p, "x");
    const auto& objs = s.annotations.objects();
    ASSERT_EQ(objs.size(), s.thermal_bright.size());
    // Every non-background thermal pixel lies in exactly one box, and every
    // box edge row/column holds at least one object pixel.
    for (int y = 0; y < p.height; ++y) {
      for (int x = 0; x < p.width; ++x) {
        if (s.thermal.at(x, y) == p.background) continue;
        int inside = 0;
        for (const auto& o : objs) {
          inside += x >= o.box.xmin() && x < o.box.xmax() && y >= o.box.ymin() && y < o.box.ymax();
        }
        ASSERT_EQ(inside, 1) << "seed " << seed << " pixel " << x << "," << y;
      }
    }
    for (std::size_t k = 0; k < objs.size(); ++k) {
      const auto& b = objs[k].box;
      const int x0 = static_cast<int>(b.xmin()), x1 = static_cast<int>(b.xmax()) - 1;
      const int y0 = static_cast<int>(b.ymin()), y1 = static_cast<int>(b.ymax()) - 1;
      auto column_hit = [&](int x) {
        for (int y = y0; y <= y1; ++y) if (s.thermal.at(x, y) != p.background) return true;
        return false;
      };
      auto row_hit = [&](int y) {
        for (int x = x0; x <= x1; ++x) if (s.thermal.at(x, y) != p.background) return true;
        return false;
      };
      EXPECT_TRUE(column_hit(x0) && column_hit(x1) && row_hit(y0) && row_hit(y1));
      EXPECT_LE(b.xmax(), p.width);
      EXPECT_LE(b.ymax(), p.height);
      const int level = s.thermal.at((x0 + x1) / 2, (y0 + y1) / 2);
      EXPECT_EQ(level, p.background + (s.thermal_bright[k] ? p.contrast : -p.contrast));
    }
  }
}

TEST(Synth, PolarityMixIsExactOverADomain) {
  SynthParams p = params(9);
  p.thermal_bright_fraction = 0.5;
  p.visible_bright_fraction = 1.0;
  const auto d = generate_domains(p, 50);
  std::size_t total = 0, bright = 0;
  for (const auto& r : d.thermal.records()) {
    const GrayImage& g = std::get<GrayImage>(*r.pixels);
    for (const auto& o : r.annotations.objects()) {
      const int cx = static_cast<int>(0.5 * (o.box.xmin() + o.box.xmax()));
      const int cy = static_cast<int>(0.5 * (o.box.ymin() + o.box.ymax()));
      ++total;
      bright += g.at(cx, cy) > p.background;
    }
  }
  EXPECT_EQ(bright, total / 2);
}

TEST(Synth, FullBrightMix) {
  const SynthScene s = generate_scene(params(4), "x");
  for (bool b : s.thermal_bright) EXPECT_TRUE(b);
}

TEST(Synth, PlacementFailure) {
  SynthParams p = params(1);
  p.width = p.height = 10;
  p.min_objects = p.max_objects = 10;
  p.min_size = p.max_size = 8;
  try {
    generate_scene(p, "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PlacementFailure);
  }
}

TEST(Synth, ParamsValidated) {
  SynthParams p = params(1);
  p.thermal_bright_fraction = 1.5;
  EXPECT_THROW(generate_scene(p, "x"), Error);
  p = params(1);
  p.background = 200;
  p.contrast = 80;
  EXPECT_THROW(generate_scene(p, "x"), Error);
  p = params(1);
  p.min_objects = -1;
  EXPECT_THROW(generate_scene(p, "x"), Error);
}

GrayImage square_scene(std::uint8_t bg, std::uint8_t fg) {
  GrayImage g(32, 32, bg);
  for (int y = 8; y < 20; ++y) {
    for (int x = 4; x < 14; ++x) g.at(x, y) = fg;
  }
  return g;
}

TEST(Detector, BlankImage) {
  EXPECT_TRUE(threshold_detect(GrayImage(16, 16, 90), {}).empty());
}

TEST(Detector, BrightSquare) {
  const auto d = threshold_detect(square_scene(20, 200), {}, "img");
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].box, BoundingBox(4, 8, 14, 20));
  EXPECT_EQ(d[0].image_id, "img");
  EXPECT_DOUBLE_EQ(d[0].score, 180.0 / 255.0);
}

TEST(Detector, PolarityMismatchMisses) {
  DetectorParams dark;
  dark.polarity = Polarity::Dark;
  EXPECT_TRUE(threshold_detect(square_scene(20, 200), dark).empty());
}

TEST(Detector, MinAreaFilters) {
  DetectorParams p;
  p.min_area = 121;
  EXPECT_TRUE(threshold_detect(square_scene(20, 200), p).empty());
  p.min_area = 120;
  EXPECT_EQ(threshold_detect(square_scene(20, 200), p).size(), 1u);
}

TEST(Detector, FixedBackground) {
  DetectorParams p;
  p.background = 100.0;
  p.threshold = 50;
  EXPECT_TRUE(threshold_detect(square_scene(20, 140), p).empty());
  p.threshold = 30;
  EXPECT_EQ(threshold_detect(square_scene(20, 140), p).size(), 1u);
}

TEST(Detector, ParamsValidated) {
  DetectorParams p;
  p.threshold = 300;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.min_area = 0;
  EXPECT_THROW(p.validate(), Error);
  EXPECT_EQ(detector_params_from_json(to_json(DetectorParams{})).threshold, 32.0);
}

std::vector<BoundingBox> boxes_of(const std::vector<Detection>& d) {
  std::vector<BoundingBox> b;
  for (const auto& x : d) b.push_back(x.box);
  return b;
}

TEST(Detector, SoundOnNoiseFreeScenes) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SynthParams p = params(seed);
    p.thermal_bright_fraction = seed % 2 ? 1.0 : 0.0;
    const SynthScene s = generate_scene(p, "x");
    DetectorParams dp;
    dp.polarity = seed % 2 ? Polarity::Bright : Polarity::Dark;
    dp.threshold = p.contrast / 2.0;
    const auto dets = threshold_detect(s.thermal, dp);
    ASSERT_EQ(dets.size(), s.annotations.objects().size()) << seed;
    for (const auto& o : s.annotations.objects()) {
      bool hit = false;
      for (const auto& d : dets) hit = hit || iou(d.box, o.box) == 1.0;
      EXPECT_TRUE(hit);
    }
    // Polarity blindness.
    DetectorParams wrong = dp;
    wrong.polarity = seed % 2 ? Polarity::Dark : Polarity::Bright;
    EXPECT_TRUE(threshold_detect(s.thermal, wrong).empty());
  }
}

TEST(Detector, InversionBridge) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SynthParams p = params(seed);
    p.thermal_bright_fraction = 0.0;
    p.noise = static_cast<int>(seed % 4);
    const SynthScene s = generate_scene(p, "x");
    DetectorParams bright;
    bright.threshold = 20 + static_cast<double>(seed % 7);
    DetectorParams dark = bright;
    dark.polarity = Polarity::Dark;
    EXPECT_EQ(boxes_of(threshold_detect(intensity_invert(s.thermal), bright)),
              boxes_of(threshold_detect(s.thermal, dark)));
  }
}

TEST(Detector, BothPolaritiesFindMixedScene) {
  SynthParams p = params(12);
  p.thermal_bright_fraction = 0.5;
  p.min_objects = p.max_objects = 4;
  const SynthScene s = generate_scene(p, "x");
  DetectorParams both;
  both.polarity = Polarity::Both;
  EXPECT_EQ(threshold_detect(s.thermal, both).size(), 4u);
}

TEST(Detector, DomainParallelEqualsSerial) {
  const auto d = generate_domains(params(2), 10);
  EXPECT_EQ(detect_domain(d.thermal, {}, 1), detect_domain(d.thermal, {}, 3));
}

TEST(Median, EvenCountAveragesMiddle) {
  EXPECT_DOUBLE_EQ(median_level(GrayImage(2, 1, std::vector<std::uint8_t>{10, 21})), 15.5);
  EXPECT_DOUBLE_EQ(median_level(GrayImage(3, 1, std::vector<std::uint8_t>{9, 1, 5})), 5.0);
}

TEST(Calibrate, LearnsPolarityFromSource) {
  SynthParams p = params(5);
  p.thermal_bright_fraction = 0.0;
  const auto d = generate_domains(p, 10);
  const DetectorParams dark = calibrate_detector(d.thermal);
  EXPECT_EQ(dark.polarity, Polarity::Dark);
  EXPECT_EQ(dark.class_label, "person");
  EXPECT_GT(dark.threshold, 0.0);
  EXPECT_LT(dark.threshold, p.contrast);

  const DetectorParams both = calibrate_detector(build_renewed_source(d.thermal));
  EXPECT_EQ(both.polarity, Polarity::Both);
}

TEST(Calibrate, TargetRaisesThresholdAboveNoise) {
  SynthParams p = params(6);
  const auto clean = generate_domains(p, 6);
  p.noise = 20;
  const auto noisy = generate_domains(p, 6);
  const DetectorParams plain = calibrate_detector(clean.thermal);
  const DetectorParams adapted = calibrate_detector(clean.thermal, &noisy.thermal);
  EXPECT_GE(adapted.threshold, plain.threshold);
}

}  // namespace
