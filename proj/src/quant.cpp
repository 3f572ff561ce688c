#include "sdmask/quant.hpp"

#include <algorithm>
#include <cmath>

namespace sdmask
{

double round_half_even(double x)
{
    const double fl = std::floor(x);
    const double diff = x - fl;
    if (diff > 0.5)
    {
        return fl + 1.0;
    }
    if (diff < 0.5)
    {
        return fl;
    }
    return std::fmod(fl, 2.0) == 0.0 ? fl : fl + 1.0;
}

std::int8_t quantize_value(double x, const QuantParams &q)
{
    const double r = round_half_even(x / q.scale);
    return static_cast<std::int8_t>(std::clamp(r, -static_cast<double>(kInt8Max), static_cast<double>(kInt8Max)));
}

TensorI8 quantize(const TensorF &x, const QuantParams &q)
{
    if (!(q.scale > 0.0))
    {
        throw ConfigError("quantization scale must be positive");
    }
    TensorI8 out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        out[i] = quantize_value(x[i], q);
    }
    return out;
}

TensorF dequantize(const TensorI8 &x, const QuantParams &q)
{
    TensorF out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        out[i] = static_cast<float>(static_cast<double>(x[i]) * q.scale);
    }
    return out;
}

QuantParams fit_symmetric(const TensorF &x)
{
    float max_abs = 0.0F;
    for (const float v : x.data())
    {
        max_abs = std::max(max_abs, std::fabs(v));
    }
    return QuantParams{max_abs > 0.0F ? static_cast<double>(max_abs) / kInt8Max : 1.0};
}

std::int32_t activation_limit(int bits)
{
    if (bits < 2 || bits > 16)
    {
        throw ConfigError("activation bit width must be in [2, 16]");
    }
    return (std::int32_t{1} << (bits - 1)) - 1;
}

std::int32_t Requantizer::operator()(std::int64_t acc) const
{
    const double r = round_half_even(static_cast<double>(acc) * multiplier);
    return static_cast<std::int32_t>(std::clamp(r, -static_cast<double>(limit), static_cast<double>(limit)));
}

} // namespace sdmask
