// tensor_ops.hpp - deterministic dense kernels
//
// Summation order is fixed everywhere so results are bit-reproducible:
//   conv2d: output channel -> output row -> output column -> input channel
//           -> kernel row -> kernel column, accumulator seeded with the bias.
//   matmul: row -> column -> inner index, accumulator seeded with zero.
#ifndef SDMASK_TENSOR_OPS_HPP_
#define SDMASK_TENSOR_OPS_HPP_

#include <cstddef>

#include "sdmask/tensor.hpp"

namespace sdmask
{

struct Conv2dGeometry
{
    std::size_t in_channels{0};
    std::size_t out_channels{0};
    std::size_t kernel{1};
    std::size_t stride{1};
    std::size_t padding{0};
    std::size_t in_height{0};
    std::size_t in_width{0};

    [[nodiscard]] std::size_t out_height() const { return (in_height + 2 * padding - kernel) / stride + 1; }
    [[nodiscard]] std::size_t out_width() const { return (in_width + 2 * padding - kernel) / stride + 1; }
};

// Validates input [C_in,H,W], weights [C_out,C_in,k,k], bias [C_out].
Conv2dGeometry conv2d_geometry(const Shape &input, const Shape &weights, const Shape &bias, std::size_t stride,
                               std::size_t padding);

TensorF conv2d(const TensorF &input, const TensorF &weights, const TensorF &bias, std::size_t stride,
               std::size_t padding);

// Integer path: i8 x i8 products accumulated in 64 bits and range checked;
// any partial sum outside i32 raises OverflowError.
TensorI32 conv2d(const TensorI8 &input, const TensorI8 &weights, const TensorI32 &bias, std::size_t stride,
                 std::size_t padding);

template <typename T> Tensor<T> relu(Tensor<T> x)
{
    for (T &v : x.data())
    {
        v = v > T{} ? v : T{};
    }
    return x;
}

TensorF matmul(const TensorF &a, const TensorF &b);

// y[n, out] = x[n, in] * W[out, in]^T + b[out]
TensorF linear(const TensorF &x, const TensorF &weight, const TensorF &bias);

// Mean of each 2x2 block of a [C,H,W] tensor.
TensorF avg_downsample2x(const TensorF &x);

// Maps between original image pixels and the square network canvas.
struct LetterboxTransform
{
    double scale{1.0};
    std::size_t pad_x{0};
    std::size_t pad_y{0};
    std::size_t content_width{0};
    std::size_t content_height{0};
    std::size_t target{448};

    [[nodiscard]] double to_canvas_x(double x) const { return x * scale + static_cast<double>(pad_x); }
    [[nodiscard]] double to_canvas_y(double y) const { return y * scale + static_cast<double>(pad_y); }
    [[nodiscard]] double from_canvas_x(double x) const { return (x - static_cast<double>(pad_x)) / scale; }
    [[nodiscard]] double from_canvas_y(double y) const { return (y - static_cast<double>(pad_y)) / scale; }
};

// Pure geometry of the resize rule, no pixel work.
LetterboxTransform letterbox_transform(std::size_t width, std::size_t height, std::size_t target = 448);

struct LetterboxResult
{
    TensorF image;
    LetterboxTransform transform;
};

// Aspect-preserving bilinear resize onto a target x target canvas, content
// centered, padding filled with pad_value.
LetterboxResult letterbox(const TensorF &frame, std::size_t target = 448, float pad_value = 0.0F);

} // namespace sdmask

#endif
