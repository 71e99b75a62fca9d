#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "thermadapt/error.hpp"

namespace thermadapt {

// Row-major interleaved 8-bit image. Channels is 1 (gray/thermal) or 3 (RGB).
template <int Channels>
class Image8 {
  static_assert(Channels == 1 || Channels == 3);

 public:
  static constexpr int kChannels = Channels;

  Image8() = default;

  Image8(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw Error(ErrorCode::InvalidParams, "negative image dimensions");
    }
    data_.assign(static_cast<std::size_t>(width) * height * Channels, fill);
  }

  Image8(int width, int height, std::vector<std::uint8_t> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 0 || height < 0 ||
        data_.size() != static_cast<std::size_t>(width) * height * Channels) {
      throw Error(ErrorCode::InvalidParams,
                  "pixel buffer size does not match dimensions");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * height_;
  }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const std::uint8_t> bytes() const noexcept { return data_; }
  std::span<std::uint8_t> bytes() noexcept { return data_; }

  std::uint8_t at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * Channels + c];
  }
  std::uint8_t& at(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * Channels + c];
  }

  friend bool operator==(const Image8&, const Image8&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

using GrayImage = Image8<1>;
using RgbImage = Image8<3>;
using AnyImage = std::variant<GrayImage, RgbImage>;

int image_width(const AnyImage& img);
int image_height(const AnyImage& img);

// Header facts available without decoding pixels.
struct PngInfo {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
};

// PNG codec. Only 8-bit gray and 8-bit RGB are accepted; anything else is
// UnsupportedImage. Encoding is deterministic (fixed compression settings,
// no timestamps), so identical pixels always produce identical bytes.
PngInfo read_png_info(const std::filesystem::path& path);
AnyImage read_png(const std::filesystem::path& path);
GrayImage read_png_gray(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const GrayImage& img);
void write_png(const std::filesystem::path& path, const RgbImage& img);
void write_png(const std::filesystem::path& path, const AnyImage& img);

}  // namespace thermadapt
