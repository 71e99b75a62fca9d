#include <set>

#include "thermadapt/imagegen.hpp"
#include "thermadapt/parallel.hpp"
#include "thermadapt/simd/kernels.hpp"

namespace thermadapt {
namespace fs = std::filesystem;

namespace {

GrayImage gray_of(const DomainRecord& r) { return to_grayscale(r.image()); }

template <typename Fn>
DomainDataset map_records(const DomainDataset& source, std::string name, int jobs, Fn&& fn) {
  const auto& in = source.records();
  std::vector<std::optional<DomainRecord>> out(in.size());
  parallel_for(in.size(), jobs, [&](std::size_t i) { out[i].emplace(fn(in[i])); });
  std::vector<DomainRecord> records;
  records.reserve(out.size());
  for (auto& r : out) records.push_back(std::move(*r));
  return DomainDataset(std::move(name), std::move(records), source.labelled());
}

void require_labelled(const DomainDataset& d, const char* what) {
  if (!d.labelled()) {
    throw Error(ErrorCode::InvalidParams,
                std::string(what) + " needs a labelled source domain, '" + d.name() + "' is not");
  }
}

}  // namespace

GrayImage intensity_invert(const GrayImage& img) {
  GrayImage out(img.width(), img.height());
  simd::invert(img.bytes(), out.bytes());
  return out;
}

GrayImage to_grayscale(const RgbImage& img) {
  GrayImage out(img.width(), img.height());
  simd::rgb_to_gray(img.bytes(), out.bytes());
  return out;
}

GrayImage to_grayscale(AnyImage img) {
  if (auto* rgb = std::get_if<RgbImage>(&img)) return to_grayscale(*rgb);
  return std::get<GrayImage>(std::move(img));
}

RgbImage replicate3(const GrayImage& img) {
  RgbImage out(img.width(), img.height());
  auto src = img.bytes();
  auto dst = out.bytes();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[3 * i] = dst[3 * i + 1] = dst[3 * i + 2] = src[i];
  }
  return out;
}

Histogram histogram(const GrayImage& img) {
  Histogram h{};
  accumulate_histogram(h, img);
  return h;
}

void accumulate_histogram(Histogram& into, const GrayImage& img) {
  for (std::uint8_t p : img.bytes()) ++into[p];
}

std::array<std::uint8_t, 256> histogram_match_lut(const Histogram& source,
                                                  const Histogram& reference) {
  std::array<std::uint64_t, 256> src_cdf{};
  std::array<std::uint64_t, 256> ref_cdf{};
  std::uint64_t src_total = 0;
  std::uint64_t ref_total = 0;
  for (int k = 0; k < 256; ++k) {
    src_total += source[k];
    ref_total += reference[k];
    src_cdf[k] = src_total;
    ref_cdf[k] = ref_total;
  }
  std::array<std::uint8_t, 256> lut{};
  if (ref_total == 0 || src_total == 0) {
    for (int k = 0; k < 256; ++k) lut[k] = static_cast<std::uint8_t>(k);
    return lut;
  }
  // src_cdf[k] / src_total <= ref_cdf[j] / ref_total, cross-multiplied.
  // Counts are pixel totals, far below 2^32, so the products fit in 64 bits.
  int j = 0;
  for (int k = 0; k < 256; ++k) {
    while (j < 255 && ref_cdf[j] * src_total < src_cdf[k] * ref_total) ++j;
    lut[k] = static_cast<std::uint8_t>(j);
  }
  return lut;
}

HistogramMatchResult histogram_match(const GrayImage& img, const Histogram& reference) {
  const auto lut = histogram_match_lut(histogram(img), reference);
  HistogramMatchResult result{GrayImage(img.width(), img.height()), false};
  simd::remap(img.bytes(), result.image.bytes(), lut);
  int levels = 0;
  for (std::uint64_t c : reference) levels += c != 0 ? 1 : 0;
  result.constant_reference = levels == 1;
  return result;
}

HistogramMatchResult histogram_match(const GrayImage& img, const GrayImage& reference) {
  return histogram_match(img, histogram(reference));
}

Histogram pooled_histogram(const DomainDataset& domain, int jobs) {
  const auto& records = domain.records();
  std::vector<Histogram> partial(records.size());
  parallel_for(records.size(), jobs,
               [&](std::size_t i) { partial[i] = histogram(gray_of(records[i])); });
  Histogram total{};
  for (const Histogram& h : partial) {
    for (int k = 0; k < 256; ++k) total[k] += h[k];
  }
  return total;
}

DomainDataset translate_gray(const DomainDataset& source, int jobs) {
  require_labelled(source, "gray translation");
  return map_records(source, source.name() + "_gray", jobs, [](const DomainRecord& r) {
    return make_record(r.annotations, gray_of(r));
  });
}

DomainDataset translate_histmatch(const DomainDataset& source, const Histogram& reference,
                                  int jobs) {
  require_labelled(source, "histogram-matching translation");
  return map_records(source, source.name() + "_hm", jobs, [&](const DomainRecord& r) {
    return make_record(r.annotations, histogram_match(gray_of(r), reference).image);
  });
}

DomainDataset translate_histmatch_per_image(const DomainDataset& source,
                                            const DomainDataset& target, int jobs) {
  require_labelled(source, "histogram-matching translation");
  if (target.empty()) {
    throw Error(ErrorCode::InvalidParams, "per-image histogram matching needs target images");
  }
  const auto& refs = target.records();
  const auto& in = source.records();
  std::vector<std::optional<DomainRecord>> out(in.size());
  parallel_for(in.size(), jobs, [&](std::size_t i) {
    const GrayImage ref = gray_of(refs[i % refs.size()]);
    out[i].emplace(make_record(in[i].annotations, histogram_match(gray_of(in[i]), ref).image));
  });
  std::vector<DomainRecord> records;
  for (auto& r : out) records.push_back(std::move(*r));
  return DomainDataset(source.name() + "_hm", std::move(records), true);
}

DomainDataset ingest_translated(const fs::path& dir, const DomainDataset& source, int jobs) {
  require_labelled(source, "translated-image ingestion");
  for (const DomainRecord& r : source.records()) {
    if (!fs::is_regular_file(dir / (r.image_id + ".png"))) {
      throw Error(ErrorCode::MissingTranslation,
                  "no translated image for '" + r.image_id + "' in " + dir.string());
    }
  }
  return map_records(source, source.name() + "_ft", jobs, [&](const DomainRecord& r) {
    const fs::path path = dir / (r.image_id + ".png");
    const PngInfo info = read_png_info(path);
    if (info.width != r.annotations.width() || info.height != r.annotations.height()) {
      throw Error(ErrorCode::DimensionMismatch,
                  r.image_id + ": translated image is " + std::to_string(info.width) + "x" +
                      std::to_string(info.height) + ", annotation frame is " +
                      std::to_string(r.annotations.width()) + "x" +
                      std::to_string(r.annotations.height()));
    }
    if (info.channels != 1 || info.bit_depth != 8) {
      throw Error(ErrorCode::UnsupportedImage,
                  path.string() + ": translated images must be 8-bit single-channel");
    }
    return DomainRecord{r.image_id, path, nullptr, r.annotations};
  });
}

DomainDataset build_renewed_source(const DomainDataset& fake_thermal, int jobs) {
  require_labelled(fake_thermal, "the renewed source domain");
  const auto& in = fake_thermal.records();
  std::set<std::string> ids;
  for (const DomainRecord& r : in) ids.insert(r.image_id);
  for (const DomainRecord& r : in) {
    const std::string inv = r.image_id + std::string(kInvertedSuffix);
    if (ids.count(inv) != 0) {
      throw Error(ErrorCode::IdCollision,
                  "inverted id '" + inv + "' already exists in '" + fake_thermal.name() + "'");
    }
  }

  std::vector<std::optional<DomainRecord>> inverted(in.size());
  parallel_for(in.size(), jobs, [&](std::size_t i) {
    AnyImage img = in[i].image();
    const GrayImage* gray = std::get_if<GrayImage>(&img);
    if (gray == nullptr) {
      throw Error(ErrorCode::UnsupportedImage,
                  in[i].image_id + ": renewed source needs single-channel fake-thermal images");
    }
    const std::string id = in[i].image_id + std::string(kInvertedSuffix);
    inverted[i].emplace(make_record(in[i].annotations.with_image_id(id), intensity_invert(*gray)));
  });

  std::vector<DomainRecord> records;
  records.reserve(2 * in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    records.push_back(in[i]);
    records.push_back(std::move(*inverted[i]));
  }
  return DomainDataset(fake_thermal.name() + "_renewed", std::move(records), true);
}

}  // namespace thermadapt
