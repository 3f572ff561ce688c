#include "sdmask/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace sdmask
{

std::size_t shape_size(const Shape &shape)
{
    std::size_t n = 1;
    for (const std::size_t d : shape)
    {
        n *= d;
    }
    return n;
}

std::string shape_to_string(const Shape &shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i)
    {
        os << (i ? "," : "") << shape[i];
    }
    os << ']';
    return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill)
{
    for (const std::size_t d : shape_)
    {
        if (d == 0)
        {
            throw ConfigError("tensor extent must be positive: " + shape_to_string(shape_));
        }
    }
}

template <typename T> Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data))
{
    if (data_.size() != shape_size(shape_))
    {
        throw ConfigError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                          shape_to_string(shape_));
    }
}

template <typename T> std::size_t Tensor<T>::count_nonzero() const noexcept
{
    return static_cast<std::size_t>(std::count_if(data_.begin(), data_.end(), [](T v) { return v != T{}; }));
}

template <typename T> Tensor<T> Tensor<T>::reshaped(Shape shape) const
{
    if (shape_size(shape) != data_.size())
    {
        throw ConfigError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

template <typename T> void Tensor<T>::fill(T value)
{
    std::fill(data_.begin(), data_.end(), value);
}

template <typename T> std::size_t Tensor<T>::offset(std::initializer_list<std::size_t> idx) const
{
    std::size_t off = 0;
    std::size_t axis = 0;
    for (const std::size_t i : idx)
    {
        off = off * shape_[axis] + i;
        ++axis;
    }
    return off;
}

template class Tensor<float>;
template class Tensor<std::int8_t>;
template class Tensor<std::int32_t>;

DType dtype_of_any(const AnyTensor &t)
{
    return std::visit([](const auto &x) { return x.dtype(); }, t);
}

const Shape &shape_of_any(const AnyTensor &t)
{
    return std::visit([](const auto &x) -> const Shape & { return x.shape(); }, t);
}

void require_same_shape(const Shape &a, const Shape &b, const char *what)
{
    if (a != b)
    {
        throw ConfigError(std::string(what) + ": shape mismatch " + shape_to_string(a) + " vs " + shape_to_string(b));
    }
}

} // namespace sdmask
