#pragma once

// Per-pixel 8-bit kernels behind a runtime-selected dispatch table.
//
// Each kernel has a scalar reference implementation; AVX2 (x86-64) and NEON
// (AArch64) variants are bit-exact equivalents and are chosen at first use
// when the CPU supports them. THERMADAPT_SIMD=scalar|avx2|neon in the
// environment pins the choice.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace thermadapt::simd {

enum class Backend { Scalar, Avx2, Neon };

std::string_view to_string(Backend backend);

struct KernelTable {
  Backend backend;
  // out[i] = 255 - in[i]
  void (*invert)(const std::uint8_t* in, std::uint8_t* out, std::size_t n);
  // Interleaved RGB to luma, round(0.299 R + 0.587 G + 0.114 B) with ties up,
  // computed exactly as (299 R + 587 G + 114 B + 500) / 1000.
  void (*rgb_to_gray)(const std::uint8_t* rgb, std::uint8_t* gray, std::size_t pixels);
  // mask[i] = in[i] > cut ? 1 : 0
  void (*mask_greater)(const std::uint8_t* in, std::uint8_t* mask, std::size_t n,
                       std::uint8_t cut);
  // mask[i] = in[i] < cut ? 1 : 0
  void (*mask_less)(const std::uint8_t* in, std::uint8_t* mask, std::size_t n,
                    std::uint8_t cut);
  // out[i] = lut[in[i]]
  void (*remap)(const std::uint8_t* in, std::uint8_t* out, std::size_t n,
                const std::uint8_t* lut);
};

// Table for a specific backend, or nullptr if this build/CPU cannot run it.
const KernelTable* kernels_for(Backend backend);

// The active table.
const KernelTable& kernels();

std::vector<Backend> available_backends();

// Pin the active backend; throws Error(InvalidParams) if unavailable.
void set_backend(Backend backend);

// Span front-ends over the active table. Output spans must be at least as
// long as the input (three times shorter for rgb_to_gray).
void invert(std::span<const std::uint8_t> in, std::span<std::uint8_t> out);
void rgb_to_gray(std::span<const std::uint8_t> rgb, std::span<std::uint8_t> gray);
void mask_greater(std::span<const std::uint8_t> in, std::span<std::uint8_t> mask,
                  std::uint8_t cut);
void mask_less(std::span<const std::uint8_t> in, std::span<std::uint8_t> mask,
               std::uint8_t cut);
void remap(std::span<const std::uint8_t> in, std::span<std::uint8_t> out,
           std::span<const std::uint8_t, 256> lut);

namespace detail {
extern const KernelTable kScalarTable;
#if defined(THERMADAPT_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(THERMADAPT_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace thermadapt::simd
