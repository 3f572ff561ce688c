#include "sdmask/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "sdmask/quant.hpp"

namespace sdmask
{

Conv2dGeometry conv2d_geometry(const Shape &input, const Shape &weights, const Shape &bias, std::size_t stride,
                               std::size_t padding)
{
    if (input.size() != 3 || weights.size() != 4 || bias.size() != 1)
    {
        throw ConfigError("conv2d expects input [C,H,W], weights [O,C,k,k], bias [O]; got " + shape_to_string(input) +
                          ", " + shape_to_string(weights) + ", " + shape_to_string(bias));
    }
    if (weights[1] != input[0] || weights[2] != weights[3] || bias[0] != weights[0])
    {
        throw ConfigError("conv2d shape mismatch: input " + shape_to_string(input) + ", weights " +
                          shape_to_string(weights) + ", bias " + shape_to_string(bias));
    }
    if (weights[2] % 2 == 0)
    {
        throw ConfigError("conv2d kernel must be odd");
    }
    if (stride == 0)
    {
        throw ConfigError("conv2d stride must be positive");
    }
    Conv2dGeometry g{input[0], weights[0], weights[2], stride, padding, input[1], input[2]};
    if (g.in_height + 2 * padding < g.kernel || g.in_width + 2 * padding < g.kernel)
    {
        throw ConfigError("conv2d kernel larger than padded input");
    }
    return g;
}

namespace
{

// Shared loop nest. Acc is the accumulator type, Check validates each
// partial sum.
template <typename In, typename W, typename Acc, typename Out, typename Check>
void conv2d_loop(const Conv2dGeometry &g, std::span<const In> in, std::span<const W> w, std::span<const Out> bias,
                 std::span<Out> out, Check check)
{
    const std::size_t oh = g.out_height();
    const std::size_t ow = g.out_width();
    const auto k = g.kernel;
    const auto ih = static_cast<std::ptrdiff_t>(g.in_height);
    const auto iw = static_cast<std::ptrdiff_t>(g.in_width);
    for (std::size_t o = 0; o < g.out_channels; ++o)
    {
        for (std::size_t y = 0; y < oh; ++y)
        {
            for (std::size_t x = 0; x < ow; ++x)
            {
                Acc acc = static_cast<Acc>(bias[o]);
                const auto y0 = static_cast<std::ptrdiff_t>(y * g.stride) - static_cast<std::ptrdiff_t>(g.padding);
                const auto x0 = static_cast<std::ptrdiff_t>(x * g.stride) - static_cast<std::ptrdiff_t>(g.padding);
                for (std::size_t c = 0; c < g.in_channels; ++c)
                {
                    const In *plane = in.data() + c * g.in_height * g.in_width;
                    const W *kw = w.data() + (o * g.in_channels + c) * k * k;
                    for (std::size_t ky = 0; ky < k; ++ky)
                    {
                        const auto iy = y0 + static_cast<std::ptrdiff_t>(ky);
                        if (iy < 0 || iy >= ih)
                        {
                            continue;
                        }
                        for (std::size_t kx = 0; kx < k; ++kx)
                        {
                            const auto ix = x0 + static_cast<std::ptrdiff_t>(kx);
                            if (ix < 0 || ix >= iw)
                            {
                                continue;
                            }
                            acc += static_cast<Acc>(plane[iy * iw + ix]) * static_cast<Acc>(kw[ky * k + kx]);
                            check(acc);
                        }
                    }
                }
                out[(o * oh + y) * ow + x] = static_cast<Out>(acc);
            }
        }
    }
}

} // namespace

TensorF conv2d(const TensorF &input, const TensorF &weights, const TensorF &bias, std::size_t stride,
               std::size_t padding)
{
    const auto g = conv2d_geometry(input.shape(), weights.shape(), bias.shape(), stride, padding);
    TensorF out({g.out_channels, g.out_height(), g.out_width()});
    conv2d_loop<float, float, float, float>(g, input.data(), weights.data(), bias.data(), out.data(),
                                            [](float) {});
    return out;
}

TensorI32 conv2d(const TensorI8 &input, const TensorI8 &weights, const TensorI32 &bias, std::size_t stride,
                 std::size_t padding)
{
    const auto g = conv2d_geometry(input.shape(), weights.shape(), bias.shape(), stride, padding);
    TensorI32 out({g.out_channels, g.out_height(), g.out_width()});
    conv2d_loop<std::int8_t, std::int8_t, std::int64_t, std::int32_t>(
        g, input.data(), weights.data(), bias.data(), out.data(), [](std::int64_t acc) {
            if (acc > std::numeric_limits<std::int32_t>::max() || acc < std::numeric_limits<std::int32_t>::min())
            {
                throw OverflowError("conv2d: i32 accumulator overflow");
            }
        });
    return out;
}

TensorF matmul(const TensorF &a, const TensorF &b)
{
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    {
        throw ConfigError("matmul shape mismatch: " + shape_to_string(a.shape()) + " x " + shape_to_string(b.shape()));
    }
    const std::size_t m = a.dim(0);
    const std::size_t k = a.dim(1);
    const std::size_t n = b.dim(1);
    TensorF out({m, n});
    for (std::size_t i = 0; i < m; ++i)
    {
        for (std::size_t j = 0; j < n; ++j)
        {
            float acc = 0.0F;
            for (std::size_t p = 0; p < k; ++p)
            {
                acc += a[i * k + p] * b[p * n + j];
            }
            out[i * n + j] = acc;
        }
    }
    return out;
}

TensorF linear(const TensorF &x, const TensorF &weight, const TensorF &bias)
{
    if (x.rank() != 2 || weight.rank() != 2 || bias.rank() != 1 || x.dim(1) != weight.dim(1) ||
        bias.dim(0) != weight.dim(0))
    {
        throw ConfigError("linear shape mismatch: x " + shape_to_string(x.shape()) + ", weight " +
                          shape_to_string(weight.shape()) + ", bias " + shape_to_string(bias.shape()));
    }
    const std::size_t rows = x.dim(0);
    const std::size_t in = x.dim(1);
    const std::size_t out_features = weight.dim(0);
    TensorF out({rows, out_features});
    for (std::size_t r = 0; r < rows; ++r)
    {
        const float *xr = x.data().data() + r * in;
        for (std::size_t o = 0; o < out_features; ++o)
        {
            const float *wr = weight.data().data() + o * in;
            float acc = 0.0F;
            for (std::size_t i = 0; i < in; ++i)
            {
                acc += xr[i] * wr[i];
            }
            out[r * out_features + o] = acc + bias[o];
        }
    }
    return out;
}

TensorF avg_downsample2x(const TensorF &x)
{
    if (x.rank() != 3 || x.dim(1) % 2 != 0 || x.dim(2) % 2 != 0)
    {
        throw ConfigError("avg_downsample2x expects [C,H,W] with even H and W, got " + shape_to_string(x.shape()));
    }
    const std::size_t c = x.dim(0);
    const std::size_t h = x.dim(1) / 2;
    const std::size_t w = x.dim(2) / 2;
    TensorF out({c, h, w});
    for (std::size_t ch = 0; ch < c; ++ch)
    {
        for (std::size_t y = 0; y < h; ++y)
        {
            for (std::size_t xx = 0; xx < w; ++xx)
            {
                const float s = x(ch, 2 * y, 2 * xx) + x(ch, 2 * y, 2 * xx + 1) + x(ch, 2 * y + 1, 2 * xx) +
                                x(ch, 2 * y + 1, 2 * xx + 1);
                out(ch, y, xx) = s * 0.25F;
            }
        }
    }
    return out;
}

LetterboxTransform letterbox_transform(std::size_t width, std::size_t height, std::size_t target)
{
    if (width == 0 || height == 0 || target == 0)
    {
        throw ConfigError("letterbox needs positive extents");
    }
    LetterboxTransform t;
    t.target = target;
    t.scale = static_cast<double>(target) / static_cast<double>(std::max(width, height));
    const auto fit = [&](std::size_t extent) {
        const double v = round_half_even(static_cast<double>(extent) * t.scale);
        return std::clamp<std::size_t>(static_cast<std::size_t>(v), 1, target);
    };
    t.content_width = width >= height ? target : fit(width);
    t.content_height = height >= width ? target : fit(height);
    t.pad_x = (target - t.content_width) / 2;
    t.pad_y = (target - t.content_height) / 2;
    return t;
}

LetterboxResult letterbox(const TensorF &frame, std::size_t target, float pad_value)
{
    if (frame.rank() != 3)
    {
        throw ConfigError("letterbox expects [C,H,W], got " + shape_to_string(frame.shape()));
    }
    const std::size_t channels = frame.dim(0);
    const std::size_t src_h = frame.dim(1);
    const std::size_t src_w = frame.dim(2);
    LetterboxResult result{TensorF({channels, target, target}, pad_value), letterbox_transform(src_w, src_h, target)};
    const auto &t = result.transform;

    // Half-pixel-centre bilinear sampling, edge clamped.
    const double ratio_x = static_cast<double>(src_w) / static_cast<double>(t.content_width);
    const double ratio_y = static_cast<double>(src_h) / static_cast<double>(t.content_height);
    const auto sample_axis = [](std::size_t out, double ratio, std::size_t extent) {
        double s = (static_cast<double>(out) + 0.5) * ratio - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(extent - 1));
        const auto i0 = static_cast<std::size_t>(std::floor(s));
        const std::size_t i1 = std::min(i0 + 1, extent - 1);
        return std::tuple{i0, i1, s - static_cast<double>(i0)};
    };
    for (std::size_t y = 0; y < t.content_height; ++y)
    {
        const auto [y0, y1, fy] = sample_axis(y, ratio_y, src_h);
        for (std::size_t x = 0; x < t.content_width; ++x)
        {
            const auto [x0, x1, fx] = sample_axis(x, ratio_x, src_w);
            for (std::size_t c = 0; c < channels; ++c)
            {
                const double top = static_cast<double>(frame(c, y0, x0)) * (1.0 - fx) +
                                   static_cast<double>(frame(c, y0, x1)) * fx;
                const double bottom = static_cast<double>(frame(c, y1, x0)) * (1.0 - fx) +
                                      static_cast<double>(frame(c, y1, x1)) * fx;
                result.image(c, y + t.pad_y, x + t.pad_x) = static_cast<float>(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    return result;
}

} // namespace sdmask
