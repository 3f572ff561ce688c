// sdnn.hpp - a detector converted to sigma-delta form
//
// Every layer of the network is wrapped with its own threshold; the input
// frame is delta-encoded first and the head events are integrated by a
// readout decoder. Sdnn<float> runs the f32 path, Sdnn<int32_t> the
// integer path (which needs a quantised network).
#ifndef SDMASK_SDNN_HPP_
#define SDMASK_SDNN_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "sdmask/event_stats.hpp"
#include "sdmask/network.hpp"
#include "sdmask/sigma_delta.hpp"

namespace sdmask
{

template <typename T> struct SdnnStep
{
    Tensor<T> head;
    FrameStats stats;        // "input" first, then one entry per layer
    EventFrame<T> input_events;
};

// Per-layer threshold overrides applied on top of the config.
struct ThresholdOverrides
{
    std::optional<double> input;
    std::optional<double> layers; // every layer
};

template <typename T> class Sdnn
{
public:
    Sdnn(const Network &net, const ThresholdOverrides &overrides = {});

    // frame is [C, H, W] in pixel units [0, 255].
    SdnnStep<T> step(const TensorF &frame);
    void reset();

    [[nodiscard]] std::size_t layer_count() const noexcept { return layers_.size(); }
    [[nodiscard]] const SigmaDeltaLayer<T> &layer(std::size_t i) const { return layers_.at(i); }
    [[nodiscard]] const DeltaEncoder<T> &input_encoder() const noexcept { return input_encoder_; }

private:
    Tensor<T> prepare(const TensorF &frame) const;

    Shape input_shape_;
    double input_scale_;
    DeltaEncoder<T> input_encoder_;
    std::vector<SigmaDeltaLayer<T>> layers_;
    SigmaDecoder<T> readout_;
};

template <typename T> Sdnn<T> convert_to_sdnn(const Network &net, const ThresholdOverrides &overrides = {})
{
    return Sdnn<T>(net, overrides);
}

extern template class Sdnn<float>;
extern template class Sdnn<std::int32_t>;

} // namespace sdmask

#endif
