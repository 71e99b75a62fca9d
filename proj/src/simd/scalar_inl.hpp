#pragma once

// Scalar reference kernels. The vector backends call these for tails.

#include <cstddef>
#include <cstdint>

namespace thermadapt::simd::scalar {

inline void invert(const std::uint8_t* in, std::uint8_t* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::uint8_t>(255 - in[i]);
}

inline std::uint8_t luma(std::uint32_t r, std::uint32_t g, std::uint32_t b) {
  return static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
}

inline void rgb_to_gray(const std::uint8_t* rgb, std::uint8_t* gray, std::size_t pixels) {
  for (std::size_t i = 0; i < pixels; ++i) {
    gray[i] = luma(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
  }
}

inline void mask_greater(const std::uint8_t* in, std::uint8_t* mask, std::size_t n,
                         std::uint8_t cut) {
  for (std::size_t i = 0; i < n; ++i) mask[i] = in[i] > cut ? 1 : 0;
}

inline void mask_less(const std::uint8_t* in, std::uint8_t* mask, std::size_t n,
                      std::uint8_t cut) {
  for (std::size_t i = 0; i < n; ++i) mask[i] = in[i] < cut ? 1 : 0;
}

inline void remap(const std::uint8_t* in, std::uint8_t* out, std::size_t n,
                  const std::uint8_t* lut) {
  for (std::size_t i = 0; i < n; ++i) out[i] = lut[in[i]];
}

}  // namespace thermadapt::simd::scalar
