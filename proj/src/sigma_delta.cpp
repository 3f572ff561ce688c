#include "sdmask/sigma_delta.hpp"

#include <cmath>
#include <limits>

namespace sdmask
{

template <typename T>
DeltaEncoder<T>::DeltaEncoder(Shape shape, double threshold) : ref_(std::move(shape)), threshold_(threshold)
{
    if (!(threshold >= 0.0))
    {
        throw ConfigError("delta threshold must be nonnegative");
    }
}

template <typename T> EventFrame<T> DeltaEncoder<T>::encode(const Tensor<T> &x)
{
    require_same_shape(x.shape(), ref_.shape(), "delta_encode");
    EventFrame<T> out{Tensor<T>(x.shape()), 0};
    auto ref = ref_.data();
    auto events = out.values.data();
    const auto in = x.data();
    for (std::size_t i = 0; i < in.size(); ++i)
    {
        if constexpr (std::is_floating_point_v<T>)
        {
            const T d = in[i] - ref[i];
            if (d != T{} && std::fabs(static_cast<double>(d)) >= threshold_)
            {
                events[i] = d;
                ref[i] = in[i];
                ++out.nonzero_count;
            }
        }
        else
        {
            const std::int64_t d = static_cast<std::int64_t>(in[i]) - static_cast<std::int64_t>(ref[i]);
            if (d != 0 && static_cast<double>(d < 0 ? -d : d) >= threshold_)
            {
                if (d > std::numeric_limits<T>::max() || d < std::numeric_limits<T>::min())
                {
                    throw OverflowError("delta_encode: event magnitude exceeds i32");
                }
                events[i] = static_cast<T>(d);
                ref[i] = in[i];
                ++out.nonzero_count;
            }
        }
    }
    return out;
}

template <typename T> void DeltaEncoder<T>::reset()
{
    ref_.fill(T{});
}

template <typename T> SigmaDecoder<T>::SigmaDecoder(Shape shape) : est_(std::move(shape)) {}

template <typename T> const Tensor<T> &SigmaDecoder<T>::decode(const EventFrame<T> &events)
{
    require_same_shape(events.values.shape(), est_.shape(), "sigma_decode");
    auto est = est_.data();
    const auto ev = events.values.data();
    for (std::size_t i = 0; i < est.size(); ++i)
    {
        if constexpr (std::is_floating_point_v<T>)
        {
            est[i] += ev[i];
        }
        else
        {
            const std::int64_t v = static_cast<std::int64_t>(est[i]) + ev[i];
            if (v > std::numeric_limits<T>::max() || v < std::numeric_limits<T>::min())
            {
                throw OverflowError("sigma_decode: estimate exceeds i32");
            }
            est[i] = static_cast<T>(v);
        }
    }
    return est_;
}

template <typename T> void SigmaDecoder<T>::reset()
{
    est_.fill(T{});
}

template <typename T> Shape SynapticLayer<T>::output_shape() const
{
    if (kind == LayerKind::linear)
    {
        return {weights.dim(0), 1, 1};
    }
    const auto g = conv2d_geometry(input_shape, weights.shape(), bias.shape(), stride, padding);
    return {g.out_channels, g.out_height(), g.out_width()};
}

template <typename T> std::uint64_t SynapticLayer<T>::dense_macs() const
{
    if (kind == LayerKind::linear)
    {
        return static_cast<std::uint64_t>(weights.dim(0)) * weights.dim(1);
    }
    const auto g = conv2d_geometry(input_shape, weights.shape(), bias.shape(), stride, padding);
    return static_cast<std::uint64_t>(g.kernel * g.kernel) * g.in_channels * g.out_channels * g.out_height() *
           g.out_width();
}

namespace
{

// Output positions along one axis reached from input coordinate `in`, as
// (kernel tap, output index) pairs.
template <typename F>
void for_each_target(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding,
                     std::size_t out_extent, F f)
{
    for (std::size_t k = 0; k < kernel; ++k)
    {
        const auto t = static_cast<std::ptrdiff_t>(in + padding) - static_cast<std::ptrdiff_t>(k);
        if (t < 0 || t % static_cast<std::ptrdiff_t>(stride) != 0)
        {
            continue;
        }
        const auto o = static_cast<std::size_t>(t) / stride;
        if (o < out_extent)
        {
            f(k, o);
        }
    }
}

} // namespace

template <typename T> std::uint64_t SynapticLayer<T>::fan_out(std::size_t input_index) const
{
    if (kind == LayerKind::linear)
    {
        return weights.dim(0);
    }
    const auto g = conv2d_geometry(input_shape, weights.shape(), bias.shape(), stride, padding);
    const std::size_t plane = g.in_height * g.in_width;
    const std::size_t iy = (input_index % plane) / g.in_width;
    const std::size_t ix = input_index % g.in_width;
    std::uint64_t ny = 0;
    std::uint64_t nx = 0;
    for_each_target(iy, g.kernel, g.stride, g.padding, g.out_height(), [&](std::size_t, std::size_t) { ++ny; });
    for_each_target(ix, g.kernel, g.stride, g.padding, g.out_width(), [&](std::size_t, std::size_t) { ++nx; });
    return ny * nx * g.out_channels;
}

template <typename T>
SigmaDeltaLayer<T>::SigmaDeltaLayer(SynapticLayer<T> layer, double threshold)
    : layer_(std::move(layer)), output_shape_(layer_.output_shape()), encoder_(output_shape_, threshold)
{
    const std::size_t outs = layer_.weights.dim(0);
    if (layer_.bias.rank() != 1 || layer_.bias.dim(0) != outs)
    {
        throw ConfigError(layer_.name + ": bias does not match output channels");
    }
    if (layer_.kind == LayerKind::linear)
    {
        const std::size_t ins = shape_size(layer_.input_shape);
        if (layer_.weights.rank() != 2 || layer_.weights.dim(1) != ins)
        {
            throw ConfigError(layer_.name + ": linear weights " + shape_to_string(layer_.weights.shape()) +
                              " do not match input " + shape_to_string(layer_.input_shape));
        }
        synapse_t_.resize(ins * outs);
        for (std::size_t i = 0; i < ins; ++i)
        {
            for (std::size_t o = 0; o < outs; ++o)
            {
                synapse_t_[i * outs + o] = static_cast<acc_type>(layer_.weights[o * ins + i]);
            }
        }
    }
    else
    {
        geometry_ = conv2d_geometry(layer_.input_shape, layer_.weights.shape(), layer_.bias.shape(), layer_.stride,
                                    layer_.padding);
        const std::size_t k = geometry_.kernel;
        const std::size_t taps = geometry_.in_channels * k * k;
        synapse_t_.resize(taps * outs);
        for (std::size_t o = 0; o < outs; ++o)
        {
            for (std::size_t t = 0; t < taps; ++t)
            {
                synapse_t_[t * outs + o] = static_cast<acc_type>(layer_.weights[o * taps + t]);
            }
        }
    }
    accum_.resize(shape_size(output_shape_));
    reset();
}

template <typename T> void SigmaDeltaLayer<T>::reset()
{
    const std::size_t outs = layer_.weights.dim(0);
    for (std::size_t i = 0; i < accum_.size(); ++i)
    {
        accum_[i] = static_cast<acc_type>(layer_.bias[i % outs]);
    }
    encoder_.reset();
}

template <typename T> void SigmaDeltaLayer<T>::scatter(std::size_t index, T value, std::uint64_t &synops)
{
    const std::size_t outs = layer_.weights.dim(0);
    const auto v = static_cast<acc_type>(value);
    if (layer_.kind == LayerKind::linear)
    {
        const acc_type *w = synapse_t_.data() + index * outs;
        for (std::size_t o = 0; o < outs; ++o)
        {
            accum_[o] += w[o] * v;
        }
        synops += outs;
        return;
    }
    const auto &g = geometry_;
    const std::size_t k = g.kernel;
    const std::size_t plane = g.in_height * g.in_width;
    const std::size_t c = index / plane;
    const std::size_t iy = (index % plane) / g.in_width;
    const std::size_t ix = index % g.in_width;
    const std::size_t ow = g.out_width();
    for_each_target(iy, k, g.stride, g.padding, g.out_height(), [&](std::size_t ky, std::size_t oy) {
        for_each_target(ix, k, g.stride, g.padding, ow, [&](std::size_t kx, std::size_t ox) {
            const acc_type *w = synapse_t_.data() + ((c * k + ky) * k + kx) * outs;
            acc_type *acc = accum_.data() + (oy * ow + ox) * outs;
            for (std::size_t o = 0; o < outs; ++o)
            {
                acc[o] += w[o] * v;
            }
            synops += outs;
        });
    });
}

template <typename T> T SigmaDeltaLayer<T>::activate(acc_type acc) const
{
    if constexpr (std::is_floating_point_v<T>)
    {
        return layer_.activation == Activation::relu && acc < 0 ? T{} : acc;
    }
    else
    {
        if (acc > std::numeric_limits<std::int32_t>::max() || acc < std::numeric_limits<std::int32_t>::min())
        {
            throw OverflowError(layer_.name + ": i32 accumulator overflow");
        }
        const acc_type a = layer_.activation == Activation::relu && acc < 0 ? 0 : acc;
        return layer_.requantizer ? (*layer_.requantizer)(a) : static_cast<T>(a);
    }
}

template <typename T> EventFrame<T> SigmaDeltaLayer<T>::step(const EventFrame<T> &input, LayerStats &stats)
{
    require_same_shape(input.values.shape(), layer_.input_shape, layer_.name.c_str());
    std::uint64_t synops = 0;
    if (input.nonzero_count > 0)
    {
        const auto ev = input.values.data();
        for (std::size_t i = 0; i < ev.size(); ++i)
        {
            if (ev[i] != T{})
            {
                scatter(i, ev[i], synops);
            }
        }
    }

    const std::size_t outs = output_shape_[0];
    const std::size_t plane = output_shape_[1] * output_shape_[2];
    Tensor<T> act(output_shape_);
    for (std::size_t o = 0; o < outs; ++o)
    {
        for (std::size_t p = 0; p < plane; ++p)
        {
            act[o * plane + p] = activate(accum_[p * outs + o]);
        }
    }
    EventFrame<T> out = encoder_.encode(act);

    stats.name = layer_.name;
    stats.neurons = shape_size(output_shape_);
    stats.events_in = input.nonzero_count;
    stats.events_out = out.nonzero_count;
    stats.synops = synops;
    stats.dense_macs = layer_.dense_macs();
    return out;
}

template class DeltaEncoder<float>;
template class DeltaEncoder<std::int32_t>;
template class SigmaDecoder<float>;
template class SigmaDecoder<std::int32_t>;
template struct SynapticLayer<float>;
template struct SynapticLayer<std::int32_t>;
template class SigmaDeltaLayer<float>;
template class SigmaDeltaLayer<std::int32_t>;

} // namespace sdmask
