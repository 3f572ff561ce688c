// tensor.hpp - dense row-major tensors
//
// Tensor<T> is the carrier for frames, activations, weights and event maps.
// The element type doubles as the dtype; only float, int8_t and int32_t are
// instantiated.
#ifndef SDMASK_TENSOR_HPP_
#define SDMASK_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sdmask/error.hpp"

namespace sdmask
{

enum class DType : std::uint8_t
{
    f32 = 0,
    i8 = 1,
    i32 = 2,
};

template <typename T> struct dtype_of;
template <> struct dtype_of<float>
{
    static constexpr DType value = DType::f32;
};
template <> struct dtype_of<std::int8_t>
{
    static constexpr DType value = DType::i8;
};
template <> struct dtype_of<std::int32_t>
{
    static constexpr DType value = DType::i32;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape &shape);
std::string shape_to_string(const Shape &shape);

template <typename T> class Tensor
{
public:
    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T{});
    Tensor(Shape shape, std::vector<T> data);

    [[nodiscard]] const Shape &shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }
    [[nodiscard]] static constexpr DType dtype() noexcept { return dtype_of<T>::value; }

    [[nodiscard]] std::span<T> data() noexcept { return data_; }
    [[nodiscard]] std::span<const T> data() const noexcept { return data_; }
    [[nodiscard]] const std::vector<T> &values() const noexcept { return data_; }

    T &operator[](std::size_t i) noexcept { return data_[i]; }
    const T &operator[](std::size_t i) const noexcept { return data_[i]; }

    // Multi-index access, e.g. t(c, y, x) on a rank-3 tensor.
    template <typename... I> T &operator()(I... idx) { return data_[offset({static_cast<std::size_t>(idx)...})]; }
    template <typename... I> const T &operator()(I... idx) const
    {
        return data_[offset({static_cast<std::size_t>(idx)...})];
    }

    [[nodiscard]] std::size_t count_nonzero() const noexcept;
    [[nodiscard]] Tensor reshaped(Shape shape) const;
    void fill(T value);

    bool operator==(const Tensor &other) const = default;

private:
    [[nodiscard]] std::size_t offset(std::initializer_list<std::size_t> idx) const;

    Shape shape_;
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorI8 = Tensor<std::int8_t>;
using TensorI32 = Tensor<std::int32_t>;

// Type-erased tensor, used by the weights container.
using AnyTensor = std::variant<TensorF, TensorI8, TensorI32>;

DType dtype_of_any(const AnyTensor &t);
const Shape &shape_of_any(const AnyTensor &t);

// Throws ConfigError naming `what` when the shapes differ.
void require_same_shape(const Shape &a, const Shape &b, const char *what);

extern template class Tensor<float>;
extern template class Tensor<std::int8_t>;
extern template class Tensor<std::int32_t>;

} // namespace sdmask

#endif
