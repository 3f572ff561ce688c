// quant.hpp - symmetric per-tensor int8 quantization
#ifndef SDMASK_QUANT_HPP_
#define SDMASK_QUANT_HPP_

#include <cstdint>

#include "sdmask/tensor.hpp"

namespace sdmask
{

inline constexpr std::int32_t kInt8Max = 127;

struct QuantParams
{
    double scale{1.0};
    // zero point is always 0
};

// Round to nearest, ties to even.
double round_half_even(double x);

std::int8_t quantize_value(double x, const QuantParams &q);
TensorI8 quantize(const TensorF &x, const QuantParams &q);
TensorF dequantize(const TensorI8 &x, const QuantParams &q);

// Per-tensor scale that maps max|x| onto 127; 1.0 for an all-zero tensor.
QuantParams fit_symmetric(const TensorF &x);

// Largest magnitude of a signed activation with the given bit width.
std::int32_t activation_limit(int bits);

// Rescales an i32 accumulator (scale s_in*s_w) to an activation of scale
// s_out: round_half_even(acc * multiplier), clamped to [-limit, limit].
struct Requantizer
{
    double multiplier{1.0};
    std::int32_t limit{kInt8Max};

    [[nodiscard]] std::int32_t operator()(std::int64_t acc) const;
};

} // namespace sdmask

#endif
