#include <arm_neon.h>

#include "thermadapt/simd/kernels.hpp"
#include "scalar_inl.hpp"

namespace thermadapt::simd::detail {
namespace {

void invert_neon(const std::uint8_t* in, std::uint8_t* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) vst1q_u8(out + i, vmvnq_u8(vld1q_u8(in + i)));
  scalar::invert(in + i, out + i, n - i);
}

uint16x4_t luma4(uint16x4_t r, uint16x4_t g, uint16x4_t b) {
  uint32x4_t sum = vmull_n_u16(r, 299);
  sum = vmlal_n_u16(sum, g, 587);
  sum = vmlal_n_u16(sum, b, 114);
  sum = vaddq_u32(sum, vdupq_n_u32(500));
  // Exact divide by 1000, see the AVX2 variant.
  uint32x4_t y = vshrq_n_u32(vmulq_n_u32(vshrq_n_u32(sum, 3), 33555), 22);
  return vmovn_u32(y);
}

void rgb_to_gray_neon(const std::uint8_t* rgb, std::uint8_t* gray, std::size_t pixels) {
  std::size_t i = 0;
  for (; i + 8 <= pixels; i += 8) {
    uint8x8x3_t px = vld3_u8(rgb + 3 * i);
    uint16x8_t r = vmovl_u8(px.val[0]);
    uint16x8_t g = vmovl_u8(px.val[1]);
    uint16x8_t b = vmovl_u8(px.val[2]);
    uint16x4_t lo = luma4(vget_low_u16(r), vget_low_u16(g), vget_low_u16(b));
    uint16x4_t hi = luma4(vget_high_u16(r), vget_high_u16(g), vget_high_u16(b));
    vst1_u8(gray + i, vmovn_u16(vcombine_u16(lo, hi)));
  }
  scalar::rgb_to_gray(rgb + 3 * i, gray + i, pixels - i);
}

void mask_greater_neon(const std::uint8_t* in, std::uint8_t* mask, std::size_t n,
                       std::uint8_t cut) {
  const uint8x16_t c = vdupq_n_u8(cut);
  const uint8x16_t one = vdupq_n_u8(1);
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    vst1q_u8(mask + i, vandq_u8(vcgtq_u8(vld1q_u8(in + i), c), one));
  }
  scalar::mask_greater(in + i, mask + i, n - i, cut);
}

void mask_less_neon(const std::uint8_t* in, std::uint8_t* mask, std::size_t n,
                    std::uint8_t cut) {
  const uint8x16_t c = vdupq_n_u8(cut);
  const uint8x16_t one = vdupq_n_u8(1);
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    vst1q_u8(mask + i, vandq_u8(vcltq_u8(vld1q_u8(in + i), c), one));
  }
  scalar::mask_less(in + i, mask + i, n - i, cut);
}

}  // namespace

// No profitable NEON table lookup for a 256-entry LUT; remap stays scalar.
const KernelTable kNeonTable{
    Backend::Neon, invert_neon, rgb_to_gray_neon,
    mask_greater_neon, mask_less_neon, scalar::remap,
};

}  // namespace thermadapt::simd::detail
