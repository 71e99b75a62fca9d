#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "test_util.hpp"
#include "thermadapt/error.hpp"
#include "thermadapt/imagegen.hpp"
#include "thermadapt/synth.hpp"

using namespace thermadapt;
using thermadapt::testing::TempDir;
namespace fs = std::filesystem;

namespace {

GrayImage random_gray(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GrayImage img(w, h);
  for (auto& p : img.bytes()) p = static_cast<std::uint8_t>(rng());
  return img;
}

RgbImage random_rgb(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RgbImage img(w, h);
  for (auto& p : img.bytes()) p = static_cast<std::uint8_t>(rng());
  return img;
}

TEST(Invert, Endpoints) {
  GrayImage g(3, 1, std::vector<std::uint8_t>{0, 100, 255});
  const GrayImage inv = intensity_invert(g);
  EXPECT_EQ(inv.at(0, 0), 255);
  EXPECT_EQ(inv.at(1, 0), 155);
  EXPECT_EQ(inv.at(2, 0), 0);
}

TEST(Invert, InvolutionAndHistogramReversal) {
  for (int s = 0; s < 50; ++s) {
    const GrayImage g = random_gray(1 + s, 1 + (s * 7) % 40, s);
    const GrayImage inv = intensity_invert(g);
    EXPECT_EQ(intensity_invert(inv), g);
    const Histogram h = histogram(g);
    const Histogram hi = histogram(inv);
    for (int k = 0; k < 256; ++k) ASSERT_EQ(hi[k], h[255 - k]);
  }
}

TEST(Grayscale, Examples) {
  RgbImage rgb(4, 1, std::vector<std::uint8_t>{255, 0, 0, 0, 0, 0, 7, 7, 7, 0, 255, 0});
  const GrayImage g = to_grayscale(rgb);
  EXPECT_EQ(g.at(0, 0), 76);  // 0.299 * 255 = 76.245
  EXPECT_EQ(g.at(1, 0), 0);
  EXPECT_EQ(g.at(2, 0), 7);
  EXPECT_EQ(g.at(3, 0), 150);  // 0.587 * 255 = 149.685
}

TEST(Grayscale, NeutralGrayIsFixed) {
  RgbImage rgb(256, 1);
  for (int v = 0; v < 256; ++v) {
    for (int c = 0; c < 3; ++c) rgb.bytes()[3 * v + c] = static_cast<std::uint8_t>(v);
  }
  const GrayImage g = to_grayscale(rgb);
  for (int v = 0; v < 256; ++v) EXPECT_EQ(g.at(v, 0), v);
}

TEST(Grayscale, IdempotentThroughReplication) {
  for (int s = 0; s < 20; ++s) {
    const GrayImage g = to_grayscale(random_rgb(17, 9, s));
    EXPECT_EQ(to_grayscale(replicate3(g)), g);
  }
}

// Brute force: level k goes to the smallest j with Fref(j) >= Fsrc(k), using
// exact rational comparison of cumulative counts.
std::array<std::uint8_t, 256> oracle_lut(const Histogram& src, const Histogram& ref) {
  std::uint64_t ns = 0, nr = 0;
  for (int k = 0; k < 256; ++k) { ns += src[k]; nr += ref[k]; }
  std::array<std::uint8_t, 256> lut{};
  for (int k = 0; k < 256; ++k) {
    std::uint64_t cs = 0;
    for (int i = 0; i <= k; ++i) cs += src[i];
    int best = 255;
    for (int j = 0; j < 256; ++j) {
      std::uint64_t cr = 0;
      for (int i = 0; i <= j; ++i) cr += ref[i];
      if (cr * ns >= cs * nr) { best = j; break; }
    }
    lut[k] = static_cast<std::uint8_t>(best);
  }
  return lut;
}

TEST(HistogramMatch, TwoLevelExample) {
  GrayImage img(4, 1, std::vector<std::uint8_t>{0, 0, 255, 255});
  GrayImage ref(4, 1, std::vector<std::uint8_t>{100, 200, 100, 200});
  const auto r = histogram_match(img, ref);
  EXPECT_EQ(r.image, GrayImage(4, 1, std::vector<std::uint8_t>{100, 100, 200, 200}));
  EXPECT_FALSE(r.constant_reference);
}

TEST(HistogramMatch, ConstantReferenceFlagged) {
  const auto r = histogram_match(GrayImage(5, 5, 10), GrayImage(3, 3, 200));
  EXPECT_EQ(r.image, GrayImage(5, 5, 200));
  EXPECT_TRUE(r.constant_reference);
}

TEST(HistogramMatch, SelfMatchIsIdentityOnAttainedLevels) {
  for (int s = 0; s < 20; ++s) {
    GrayImage g = random_gray(13, 11, 100 + s);
    for (auto& p : g.bytes()) p = static_cast<std::uint8_t>(p & 0xF0);  // sparse levels
    EXPECT_EQ(histogram_match(g, g).image, g);
  }
}

TEST(HistogramMatch, AgreesWithOracleAndIsMonotone) {
  std::mt19937_64 rng(11);
  for (int s = 0; s < 30; ++s) {
    const GrayImage src = random_gray(1 + rng() % 40, 1 + rng() % 40, rng());
    GrayImage ref = random_gray(1 + rng() % 40, 1 + rng() % 40, rng());
    const int shift = static_cast<int>(rng() % 4);
    for (auto& p : ref.bytes()) p = static_cast<std::uint8_t>(p >> shift);
    const auto lut = histogram_match_lut(histogram(src), histogram(ref));
    EXPECT_EQ(lut, oracle_lut(histogram(src), histogram(ref)));
    for (int k = 1; k < 256; ++k) EXPECT_LE(lut[k - 1], lut[k]);
    const GrayImage out = histogram_match(src, ref).image;
    for (std::size_t i = 0; i < src.bytes().size(); ++i) {
      ASSERT_EQ(out.bytes()[i], lut[src.bytes()[i]]);
    }
  }
}

DomainDataset small_visible(std::size_t n, std::uint64_t seed) {
  SynthParams p;
  p.width = 40;
  p.height = 30;
  p.min_size = 4;
  p.max_size = 8;
  p.seed = seed;
  return generate_domains(p, n).visible;
}

TEST(TranslateGray, KeepsAnnotationsAndConvertsPixels) {
  const DomainDataset v = small_visible(4, 1);
  const DomainDataset g = translate_gray(v);
  ASSERT_EQ(g.size(), v.size());
  EXPECT_EQ(g.name(), v.name() + "_gray");
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_EQ(g.records()[i].annotations, v.records()[i].annotations);
    EXPECT_EQ(std::get<GrayImage>(g.records()[i].image()),
              to_grayscale(std::get<RgbImage>(v.records()[i].image())));
  }
}

TEST(TranslateHistmatch, PooledAndPerImage) {
  const DomainDataset v = small_visible(3, 2);
  std::vector<DomainRecord> trecs;
  for (int i = 0; i < 2; ++i) {
    trecs.push_back(make_record(AnnotationSet("t" + std::to_string(i), 40, 30),
                                random_gray(40, 30, 50 + i)));
  }
  const DomainDataset t("thermal", trecs, false);
  const DomainDataset pooled = translate_histmatch(v, pooled_histogram(t), 2);
  const DomainDataset single = translate_histmatch_per_image(v, t, 2);
  ASSERT_EQ(pooled.size(), 3u);
  ASSERT_EQ(single.size(), 3u);
  Histogram ref{};
  for (const auto& r : trecs) accumulate_histogram(ref, std::get<GrayImage>(r.image()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const GrayImage gray = to_grayscale(v.records()[i].image());
    EXPECT_EQ(std::get<GrayImage>(pooled.records()[i].image()),
              histogram_match(gray, ref).image);
    EXPECT_EQ(std::get<GrayImage>(single.records()[i].image()),
              histogram_match(gray, std::get<GrayImage>(trecs[i % 2].image())).image);
    EXPECT_EQ(pooled.records()[i].annotations, v.records()[i].annotations);
  }
}

TEST(IngestTranslated, TransfersAnnotations) {
  TempDir tmp;
  const DomainDataset v = small_visible(3, 3);
  for (const auto& r : v.records()) {
    write_png(tmp / (r.image_id + ".png"), to_grayscale(r.image()));
  }
  const DomainDataset ft = ingest_translated(tmp.path(), v);
  EXPECT_EQ(ft.name(), v.name() + "_ft");
  ASSERT_EQ(ft.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(ft.records()[i].annotations, v.records()[i].annotations);
    EXPECT_EQ(std::get<GrayImage>(ft.records()[i].image()), to_grayscale(v.records()[i].image()));
  }
}

TEST(IngestTranslated, MissingFileNamesStem) {
  TempDir tmp;
  const DomainDataset v = small_visible(3, 4);
  for (std::size_t i = 0; i < 2; ++i) {
    write_png(tmp / (v.records()[i].image_id + ".png"), to_grayscale(v.records()[i].image()));
  }
  try {
    ingest_translated(tmp.path(), v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingTranslation);
    EXPECT_NE(std::string(e.what()).find(v.records()[2].image_id), std::string::npos);
  }
}

TEST(IngestTranslated, DimensionMismatch) {
  TempDir tmp;
  const DomainDataset v = small_visible(1, 5);
  write_png(tmp / (v.records()[0].image_id + ".png"), GrayImage(20, 15));
  try {
    ingest_translated(tmp.path(), v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(RenewedSource, DoublesAndCopiesAnnotations) {
  for (std::size_t n : {0u, 1u, 5u}) {
    const DomainDataset ft = translate_gray(small_visible(n, 10 + n));
    const DomainDataset renewed = build_renewed_source(ft);
    ASSERT_EQ(renewed.size(), 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& x = renewed.records()[2 * i];
      const auto& xi = renewed.records()[2 * i + 1];
      EXPECT_EQ(x, ft.records()[i]);
      EXPECT_EQ(xi.image_id, x.image_id + "_inv");
      EXPECT_EQ(xi.annotations.objects(), x.annotations.objects());
      EXPECT_EQ(xi.annotations.width(), x.annotations.width());
      EXPECT_EQ(std::get<GrayImage>(xi.image()), intensity_invert(std::get<GrayImage>(x.image())));
    }
  }
}

TEST(RenewedSource, IdCollision) {
  std::vector<DomainRecord> recs{make_record(AnnotationSet("a", 2, 2), GrayImage(2, 2)),
                                 make_record(AnnotationSet("a_inv", 2, 2), GrayImage(2, 2))};
  try {
    build_renewed_source(DomainDataset("d", recs, true));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IdCollision);
  }
}

TEST(RenewedSource, RejectsColourInput) {
  try {
    build_renewed_source(small_visible(1, 6));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedImage);
  }
}

TEST(RenewedSource, ParallelEqualsSerial) {
  const DomainDataset ft = translate_gray(small_visible(9, 7), 3);
  EXPECT_EQ(build_renewed_source(ft, 1), build_renewed_source(ft, 4));
  EXPECT_EQ(translate_gray(small_visible(9, 7), 1), ft);
}

}  // namespace
