#include <atomic>
#include <cstdlib>
#include <string>

#include "thermadapt/error.hpp"
#include "thermadapt/simd/kernels.hpp"

namespace thermadapt::simd {
namespace {

bool cpu_has(Backend backend) {
  switch (backend) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(THERMADAPT_HAVE_AVX2)
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2") != 0;
#else
      return false;
#endif
    case Backend::Neon:
#if defined(THERMADAPT_HAVE_NEON)
      return true;  // mandatory on AArch64
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* pick_default() {
  if (const char* env = std::getenv("THERMADAPT_SIMD")) {
    const std::string want(env);
    for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
      if (want == to_string(b)) {
        if (const KernelTable* t = kernels_for(b)) return t;
      }
    }
  }
  if (const KernelTable* t = kernels_for(Backend::Avx2)) return t;
  if (const KernelTable* t = kernels_for(Backend::Neon)) return t;
  return &detail::kScalarTable;
}

std::atomic<const KernelTable*> g_active{nullptr};

void check_out(std::size_t in, std::size_t out) {
  if (out < in) throw Error(ErrorCode::InvalidParams, "kernel output span too short");
}

}  // namespace

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    case Backend::Neon:
      return "neon";
  }
  return "unknown";
}

const KernelTable* kernels_for(Backend backend) {
  if (!cpu_has(backend)) return nullptr;
  switch (backend) {
    case Backend::Scalar:
      return &detail::kScalarTable;
    case Backend::Avx2:
#if defined(THERMADAPT_HAVE_AVX2)
      return &detail::kAvx2Table;
#else
      return nullptr;
#endif
    case Backend::Neon:
#if defined(THERMADAPT_HAVE_NEON)
      return &detail::kNeonTable;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const KernelTable& kernels() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    const KernelTable* chosen = pick_default();
    g_active.compare_exchange_strong(t, chosen, std::memory_order_acq_rel);
    t = g_active.load(std::memory_order_acquire);
  }
  return *t;
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
    if (kernels_for(b) != nullptr) out.push_back(b);
  }
  return out;
}

void set_backend(Backend backend) {
  const KernelTable* t = kernels_for(backend);
  if (t == nullptr) {
    throw Error(ErrorCode::InvalidParams,
                "SIMD backend " + std::string(to_string(backend)) + " is not available");
  }
  g_active.store(t, std::memory_order_release);
}

void invert(std::span<const std::uint8_t> in, std::span<std::uint8_t> out) {
  check_out(in.size(), out.size());
  kernels().invert(in.data(), out.data(), in.size());
}

void rgb_to_gray(std::span<const std::uint8_t> rgb, std::span<std::uint8_t> gray) {
  if (rgb.size() % 3 != 0) throw Error(ErrorCode::InvalidParams, "RGB buffer not a multiple of 3");
  check_out(rgb.size() / 3, gray.size());
  kernels().rgb_to_gray(rgb.data(), gray.data(), rgb.size() / 3);
}

void mask_greater(std::span<const std::uint8_t> in, std::span<std::uint8_t> mask,
                  std::uint8_t cut) {
  check_out(in.size(), mask.size());
  kernels().mask_greater(in.data(), mask.data(), in.size(), cut);
}

void mask_less(std::span<const std::uint8_t> in, std::span<std::uint8_t> mask,
               std::uint8_t cut) {
  check_out(in.size(), mask.size());
  kernels().mask_less(in.data(), mask.data(), in.size(), cut);
}

void remap(std::span<const std::uint8_t> in, std::span<std::uint8_t> out,
           std::span<const std::uint8_t, 256> lut) {
  check_out(in.size(), out.size());
  kernels().remap(in.data(), out.data(), in.size(), lut.data());
}

}  // namespace thermadapt::simd
