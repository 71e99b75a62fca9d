// Compiled with -mavx2; only reached after a runtime CPU check.

#include <immintrin.h>

#include <array>
#include <cstring>

#include "thermadapt/simd/kernels.hpp"
#include "scalar_inl.hpp"

namespace thermadapt::simd::detail {
namespace {

void invert_avx2(const std::uint8_t* in, std::uint8_t* out, std::size_t n) {
  // 255 - p == ~p for 8-bit p.
  const __m256i ones = _mm256_set1_epi8(static_cast<char>(0xFF));
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(in + i));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), _mm256_xor_si256(v, ones));
  }
  scalar::invert(in + i, out + i, n - i);
}

void rgb_to_gray_avx2(const std::uint8_t* rgb, std::uint8_t* gray, std::size_t pixels) {
  const __m256i offsets = _mm256_setr_epi32(0, 3, 6, 9, 12, 15, 18, 21);
  const __m256i byte_mask = _mm256_set1_epi32(0xFF);
  const __m256i wr = _mm256_set1_epi32(299);
  const __m256i wg = _mm256_set1_epi32(587);
  const __m256i wb = _mm256_set1_epi32(114);
  const __m256i half = _mm256_set1_epi32(500);
  // floor(m / 125) == (m * 33555) >> 22 for every m < 32000; with the >> 3
  // this is an exact divide by 1000 over the full 8-bit input range.
  const __m256i magic = _mm256_set1_epi32(33555);
  const __m256i order = _mm256_setr_epi32(0, 4, 1, 5, 2, 6, 3, 7);

  std::size_t i = 0;
  // Each gather reads 4 bytes at 3*k, one past the 8th pixel; keep one pixel
  // of slack so the block never touches memory beyond the buffer.
  for (; i + 9 <= pixels; i += 8) {
    const __m256i v =
        _mm256_i32gather_epi32(reinterpret_cast<const int*>(rgb + 3 * i), offsets, 1);
    const __m256i r = _mm256_and_si256(v, byte_mask);
    const __m256i g = _mm256_and_si256(_mm256_srli_epi32(v, 8), byte_mask);
    const __m256i b = _mm256_and_si256(_mm256_srli_epi32(v, 16), byte_mask);
    __m256i sum = _mm256_add_epi32(_mm256_mullo_epi32(r, wr), _mm256_mullo_epi32(g, wg));
    sum = _mm256_add_epi32(sum, _mm256_mullo_epi32(b, wb));
    sum = _mm256_add_epi32(sum, half);
    const __m256i y =
        _mm256_srli_epi32(_mm256_mullo_epi32(_mm256_srli_epi32(sum, 3), magic), 22);
    __m256i packed = _mm256_packus_epi32(y, y);
    packed = _mm256_packus_epi16(packed, packed);
    packed = _mm256_permutevar8x32_epi32(packed, order);
    _mm_storel_epi64(reinterpret_cast<__m128i*>(gray + i), _mm256_castsi256_si128(packed));
  }
  scalar::rgb_to_gray(rgb + 3 * i, gray + i, pixels - i);
}

void mask_greater_avx2(const std::uint8_t* in, std::uint8_t* mask, std::size_t n,
                       std::uint8_t cut) {
  if (cut == 255) {
    std::memset(mask, 0, n);
    return;
  }
  const __m256i lo = _mm256_set1_epi8(static_cast<char>(cut + 1));
  const __m256i one = _mm256_set1_epi8(1);
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(in + i));
    // v >= cut + 1  <=>  max(v, cut + 1) == v
    __m256i ge = _mm256_cmpeq_epi8(_mm256_max_epu8(v, lo), v);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(mask + i), _mm256_and_si256(ge, one));
  }
  scalar::mask_greater(in + i, mask + i, n - i, cut);
}

void mask_less_avx2(const std::uint8_t* in, std::uint8_t* mask, std::size_t n,
                    std::uint8_t cut) {
  if (cut == 0) {
    std::memset(mask, 0, n);
    return;
  }
  const __m256i hi = _mm256_set1_epi8(static_cast<char>(cut - 1));
  const __m256i one = _mm256_set1_epi8(1);
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(in + i));
    __m256i le = _mm256_cmpeq_epi8(_mm256_min_epu8(v, hi), v);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(mask + i), _mm256_and_si256(le, one));
  }
  scalar::mask_less(in + i, mask + i, n - i, cut);
}

void remap_avx2(const std::uint8_t* in, std::uint8_t* out, std::size_t n,
                const std::uint8_t* lut) {
  alignas(32) std::array<int, 256> wide{};
  for (int k = 0; k < 256; ++k) wide[k] = lut[k];
  const __m256i order = _mm256_setr_epi32(0, 4, 1, 5, 2, 6, 3, 7);
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    __m256i g[4];
    for (int q = 0; q < 4; ++q) {
      __m128i bytes = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(in + i + 8 * q));
      g[q] = _mm256_i32gather_epi32(wide.data(), _mm256_cvtepu8_epi32(bytes), 4);
    }
    __m256i p01 = _mm256_packus_epi32(g[0], g[1]);
    __m256i p23 = _mm256_packus_epi32(g[2], g[3]);
    __m256i b = _mm256_permutevar8x32_epi32(_mm256_packus_epi16(p01, p23), order);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), b);
  }
  scalar::remap(in + i, out + i, n - i, lut);
}

}  // namespace

const KernelTable kAvx2Table{
    Backend::Avx2, invert_avx2, rgb_to_gray_avx2,
    mask_greater_avx2, mask_less_avx2, remap_avx2,
};

}  // namespace thermadapt::simd::detail
