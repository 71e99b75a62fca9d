#include "thermadapt/simd/kernels.hpp"
#include "scalar_inl.hpp"

namespace thermadapt::simd::detail {

const KernelTable kScalarTable{
    Backend::Scalar, scalar::invert, scalar::rgb_to_gray,
    scalar::mask_greater, scalar::mask_less, scalar::remap,
};

}  // namespace thermadapt::simd::detail
