// sigma_delta.hpp - delta encoding, sigma decoding and wrapped layers
//
// A DeltaEncoder turns a signal into graded events: per element it emits
// d = x - x_ref whenever |d| >= threshold (the boundary spikes) and then
// moves x_ref by the emitted amount. A SigmaDecoder integrates received
// events into a running estimate. SigmaDeltaLayer puts a synaptic layer
// between the two: input events are pushed through the weights into an
// accumulated weighted sum, the activation is applied to that estimate and
// its change is delta-encoded again.
//
// T is the signal type: float for the f32 path, int32_t for the integer
// path (int8 weights, 64-bit accumulation checked against the i32 range).
#ifndef SDMASK_SIGMA_DELTA_HPP_
#define SDMASK_SIGMA_DELTA_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "sdmask/event_stats.hpp"
#include "sdmask/quant.hpp"
#include "sdmask/tensor.hpp"
#include "sdmask/tensor_ops.hpp"

namespace sdmask
{

template <typename T> struct EventFrame
{
    Tensor<T> values;
    std::size_t nonzero_count{0};
};

template <typename T> class DeltaEncoder
{
public:
    DeltaEncoder(Shape shape, double threshold);

    EventFrame<T> encode(const Tensor<T> &x);
    void reset();

    [[nodiscard]] const Tensor<T> &reference() const noexcept { return ref_; }
    [[nodiscard]] double threshold() const noexcept { return threshold_; }

private:
    Tensor<T> ref_;
    double threshold_;
};

template <typename T> class SigmaDecoder
{
public:
    explicit SigmaDecoder(Shape shape);

    const Tensor<T> &decode(const EventFrame<T> &events);
    void reset();

    [[nodiscard]] const Tensor<T> &estimate() const noexcept { return est_; }

private:
    Tensor<T> est_;
};

enum class LayerKind : std::uint8_t
{
    conv,
    linear,
};

enum class Activation : std::uint8_t
{
    relu,
    none,
};

template <typename T> struct SynapseTraits;
template <> struct SynapseTraits<float>
{
    using weight_type = float;
    using acc_type = float;
};
template <> struct SynapseTraits<std::int32_t>
{
    using weight_type = std::int8_t;
    using acc_type = std::int64_t;
};

// Parameters of one weighted-sum layer. Conv weights are [O,C,k,k], linear
// weights are [O,In] (the input is flattened). On the integer path a
// requantizer maps the accumulator to the next layer's activation scale;
// without one the raw accumulator is the output.
template <typename T> struct SynapticLayer
{
    using weight_type = typename SynapseTraits<T>::weight_type;

    std::string name;
    LayerKind kind{LayerKind::conv};
    Shape input_shape;
    Tensor<weight_type> weights;
    Tensor<T> bias;
    std::size_t stride{1};
    std::size_t padding{0};
    Activation activation{Activation::relu};
    std::optional<Requantizer> requantizer;

    [[nodiscard]] Shape output_shape() const;
    [[nodiscard]] std::uint64_t dense_macs() const;
    // Number of synaptic targets reached by an event at flat input index i.
    [[nodiscard]] std::uint64_t fan_out(std::size_t input_index) const;
};

template <typename T> class SigmaDeltaLayer
{
public:
    SigmaDeltaLayer(SynapticLayer<T> layer, double threshold);

    EventFrame<T> step(const EventFrame<T> &input, LayerStats &stats);
    void reset();

    [[nodiscard]] const SynapticLayer<T> &layer() const noexcept { return layer_; }
    [[nodiscard]] const DeltaEncoder<T> &encoder() const noexcept { return encoder_; }
    // Current activation (the x_est the next layer will reconstruct).
    [[nodiscard]] const Tensor<T> &activation() const noexcept { return encoder_.reference(); }

private:
    using acc_type = typename SynapseTraits<T>::acc_type;

    void scatter(std::size_t index, T value, std::uint64_t &synops);
    [[nodiscard]] T activate(acc_type acc) const;

    SynapticLayer<T> layer_;
    Conv2dGeometry geometry_;
    Shape output_shape_;
    std::vector<acc_type> synapse_t_;  // weights regrouped as [input][output channel]
    std::vector<acc_type> accum_;      // weighted-sum estimate, [y][x][o]
    DeltaEncoder<T> encoder_;
};

// Wraps a layer with a sigma decoder on its input and a delta encoder on
// its output.
template <typename T> SigmaDeltaLayer<T> wrap_layer(SynapticLayer<T> layer, double threshold)
{
    return SigmaDeltaLayer<T>(std::move(layer), threshold);
}

extern template class DeltaEncoder<float>;
extern template class DeltaEncoder<std::int32_t>;
extern template class SigmaDecoder<float>;
extern template class SigmaDecoder<std::int32_t>;
extern template struct SynapticLayer<float>;
extern template struct SynapticLayer<std::int32_t>;
extern template class SigmaDeltaLayer<float>;
extern template class SigmaDeltaLayer<std::int32_t>;

} // namespace sdmask

#endif
