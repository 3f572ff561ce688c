// network.hpp - detector graph, weights, quantisation and dense forward
//
// The detector is a plain chain of conv (or linear) layers ending in a 1x1
// conv head of anchors x (5 + classes) channels on a grid x grid map.
// Frames enter in pixel units [0, 255]; the f32 path normalises by 1/255,
// the integer path additionally quantises with the input scale.
#ifndef SDMASK_NETWORK_HPP_
#define SDMASK_NETWORK_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdmask/event_stats.hpp"
#include "sdmask/sigma_delta.hpp"
#include "sdmask/tensor.hpp"

namespace sdmask
{

class WeightsContainer;

struct LayerSpec
{
    LayerKind kind{LayerKind::conv};
    std::size_t cin{0};
    std::size_t cout{0};
    std::size_t kernel{3};
    std::size_t stride{1};
    std::size_t pad{1};
    Activation act{Activation::relu};
    double theta{0.0};

    bool operator==(const LayerSpec &) const = default;
};

struct HeadSpec
{
    std::vector<std::array<double, 2>> anchors; // (w, h) in canvas pixels
    std::size_t classes{1};

    [[nodiscard]] std::size_t channels() const { return anchors.size() * (5 + classes); }
    bool operator==(const HeadSpec &) const = default;
};

struct NetworkConfig
{
    std::size_t input{448};
    std::size_t input_channels{3};
    double input_theta{0.0};
    int act_bits{8};
    std::vector<LayerSpec> layers;
    HeadSpec head;

    // Shape fed to each layer, plus the final output shape at the back.
    [[nodiscard]] std::vector<Shape> shapes() const;
    [[nodiscard]] std::size_t grid() const;
    // Canvas pixels per grid cell.
    [[nodiscard]] double cell_stride() const;
    // Throws ConfigError on any inconsistency.
    void validate() const;

    bool operator==(const NetworkConfig &) const = default;
};

NetworkConfig parse_config(const std::string &json_text);
NetworkConfig load_config(const std::filesystem::path &path);
std::string config_to_json(const NetworkConfig &config);

// Ten 3x3/1x1 convs with five stride-2 stages: 448 -> grid 14.
NetworkConfig default_yolo_kp_config(std::size_t classes = 9);

// k^2 * C_in * C_out * H_out * W_out per layer.
std::vector<LayerMacs> count_macs(const NetworkConfig &config);
std::vector<std::string> layer_names(const NetworkConfig &config);

struct QuantSpec
{
    double input_scale{1.0 / 127.0};
    // Output activation scale of every layer but the head.
    std::vector<double> activation_scales;

    bool operator==(const QuantSpec &) const = default;
};

struct NetworkWeights
{
    std::vector<TensorF> weights; // conv [O,C,k,k] or linear [O,In]
    std::vector<TensorF> biases;  // [O]
    std::optional<QuantSpec> quant;
};

NetworkWeights init_network_weights(const NetworkConfig &config, std::uint64_t seed);
void store_network_weights(WeightsContainer &container, const NetworkWeights &weights);
NetworkWeights load_network_weights(const WeightsContainer &container, const NetworkConfig &config);

// Post-training calibration: each activation scale maps the largest f32
// activation seen on the sample frames onto the activation limit.
QuantSpec calibrate_quantization(const NetworkConfig &config, const NetworkWeights &weights,
                                 const std::vector<TensorF> &sample_frames);

class Network
{
public:
    Network(NetworkConfig config, NetworkWeights weights);

    [[nodiscard]] const NetworkConfig &config() const noexcept { return config_; }
    [[nodiscard]] const NetworkWeights &weights() const noexcept { return weights_; }
    [[nodiscard]] bool quantized() const noexcept { return !int_layers_.empty(); }

    [[nodiscard]] const std::vector<SynapticLayer<float>> &float_layers() const noexcept { return float_layers_; }
    // Empty unless the weights carry a QuantSpec.
    [[nodiscard]] const std::vector<SynapticLayer<std::int32_t>> &int_layers() const noexcept { return int_layers_; }

    [[nodiscard]] double input_scale() const;
    // Real value of one head accumulator unit on the integer path.
    [[nodiscard]] double head_scale() const noexcept { return head_scale_; }

private:
    NetworkConfig config_;
    NetworkWeights weights_;
    std::vector<SynapticLayer<float>> float_layers_;
    std::vector<SynapticLayer<std::int32_t>> int_layers_;
    double head_scale_{1.0};
};

// Network input in the representation each path consumes.
TensorF normalize_frame(const TensorF &frame);
TensorI8 quantize_frame(const Network &net, const TensorF &frame);

TensorF ann_forward(const Network &net, const TensorF &frame);
TensorI32 ann_forward_int(const Network &net, const TensorF &frame);
TensorF dequantize_head(const Network &net, const TensorI32 &head);

} // namespace sdmask

#endif
