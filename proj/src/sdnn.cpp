#include "sdmask/sdnn.hpp"

#include "sdmask/error.hpp"
#include "sdmask/quant.hpp"

namespace sdmask
{

namespace
{

template <typename T> const std::vector<SynapticLayer<T>> &layers_of(const Network &net);

template <> const std::vector<SynapticLayer<float>> &layers_of<float>(const Network &net)
{
    return net.float_layers();
}

template <> const std::vector<SynapticLayer<std::int32_t>> &layers_of<std::int32_t>(const Network &net)
{
    if (!net.quantized())
    {
        throw ConfigError("integer sigma-delta network needs quantisation scales in the weights");
    }
    return net.int_layers();
}

} // namespace

template <typename T>
Sdnn<T>::Sdnn(const Network &net, const ThresholdOverrides &overrides)
    : input_shape_(net.config().shapes().front()),
      input_scale_(net.input_scale()),
      input_encoder_(input_shape_, overrides.input.value_or(net.config().input_theta)),
      readout_(net.config().shapes().back())
{
    const auto &specs = net.config().layers;
    const auto &synaptic = layers_of<T>(net);
    for (std::size_t i = 0; i < synaptic.size(); ++i)
    {
        layers_.push_back(wrap_layer(synaptic[i], overrides.layers.value_or(specs[i].theta)));
    }
}

template <typename T> Tensor<T> Sdnn<T>::prepare(const TensorF &frame) const
{
    require_same_shape(frame.shape(), input_shape_, "sdnn input");
    Tensor<T> x(frame.shape());
    if constexpr (std::is_same_v<T, float>)
    {
        for (std::size_t i = 0; i < frame.size(); ++i)
        {
            x[i] = frame[i] * (1.0F / 255.0F);
        }
    }
    else
    {
        const QuantParams q{input_scale_};
        for (std::size_t i = 0; i < frame.size(); ++i)
        {
            x[i] = quantize_value(static_cast<double>(frame[i] * (1.0F / 255.0F)), q);
        }
    }
    return x;
}

template <typename T> SdnnStep<T> Sdnn<T>::step(const TensorF &frame)
{
    SdnnStep<T> out;
    out.input_events = input_encoder_.encode(prepare(frame));
    out.stats.reserve(layers_.size() + 1);
    out.stats.push_back(LayerStats{"input", shape_size(input_shape_), 0, out.input_events.nonzero_count, 0, 0});
    const EventFrame<T> *events = &out.input_events;
    EventFrame<T> current;
    for (auto &layer : layers_)
    {
        LayerStats stats;
        EventFrame<T> next = layer.step(*events, stats);
        out.stats.push_back(std::move(stats));
        current = std::move(next);
        events = &current;
    }
    out.head = readout_.decode(*events);
    return out;
}

template <typename T> void Sdnn<T>::reset()
{
    input_encoder_.reset();
    for (auto &layer : layers_)
    {
        layer.reset();
    }
    readout_.reset();
}

template class Sdnn<float>;
template class Sdnn<std::int32_t>;

} // namespace sdmask
