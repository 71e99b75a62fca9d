#pragma once

// Fake-thermal source imagery: gray translation, histogram matching as a
// classical stylizer, ingestion of externally translated images, intensity
// inversion and the renewed (fake + inverted) source domain.

#include <array>
#include <cstdint>
#include <filesystem>

#include "thermadapt/dataset.hpp"
#include "thermadapt/image.hpp"

namespace thermadapt {

inline constexpr std::string_view kInvertedSuffix = "_inv";

using Histogram = std::array<std::uint64_t, 256>;

// 255 - p for every pixel.
GrayImage intensity_invert(const GrayImage& img);

// BT.601 luma, round half up.
GrayImage to_grayscale(const RgbImage& img);
// Gray images pass through unchanged.
GrayImage to_grayscale(AnyImage img);

// Gray replicated into three channels.
RgbImage replicate3(const GrayImage& img);

Histogram histogram(const GrayImage& img);
void accumulate_histogram(Histogram& into, const GrayImage& img);

struct HistogramMatchResult {
  GrayImage image;
  // Set when the reference has a single intensity level: every pixel maps to
  // that level. A warning, not a failure.
  bool constant_reference = false;
};

// Monotone CDF matching: level k maps to the smallest level j whose
// reference CDF reaches the input CDF at k. All comparisons are exact
// integer cross-multiplications.
HistogramMatchResult histogram_match(const GrayImage& img, const Histogram& reference);
HistogramMatchResult histogram_match(const GrayImage& img, const GrayImage& reference);

// The lookup table histogram_match applies; exposed for inspection.
std::array<std::uint8_t, 256> histogram_match_lut(const Histogram& source,
                                                  const Histogram& reference);

// Images of a labelled source domain converted to gray, annotations copied.
DomainDataset translate_gray(const DomainDataset& source, int jobs = 1);

// Gray translation followed by histogram matching against `reference`
// (typically the pooled histogram of the target domain).
DomainDataset translate_histmatch(const DomainDataset& source, const Histogram& reference,
                                  int jobs = 1);

// Same, but each image is matched against the target image with the same
// index (modulo the target size) instead of a pooled reference.
DomainDataset translate_histmatch_per_image(const DomainDataset& source,
                                            const DomainDataset& target, int jobs = 1);

Histogram pooled_histogram(const DomainDataset& domain, int jobs = 1);

// Reads <dir>/<image_id>.png (8-bit gray) for every source record and pairs
// it with a copy of the source annotations. The result is named
// "<source>_ft". Throws MissingTranslation or DimensionMismatch.
DomainDataset ingest_translated(const std::filesystem::path& dir, const DomainDataset& source,
                                int jobs = 1);

// Every input record plus an intensity-inverted copy with id "<id>_inv" and
// identical annotations; twice the input size. Each "<id>_inv" directly
// follows "<id>". Throws IdCollision if an inverted id already exists.
DomainDataset build_renewed_source(const DomainDataset& fake_thermal, int jobs = 1);

}  // namespace thermadapt
