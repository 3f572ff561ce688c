#include "sdmask/network.hpp"

#include <cmath>

#include <json.hpp>

#include "sdmask/image_io.hpp"
#include "sdmask/quant.hpp"
#include "sdmask/rng.hpp"
#include "sdmask/tensor_ops.hpp"
#include "sdmask/weights_io.hpp"

namespace sdmask
{

using nlohmann::json;

std::vector<Shape> NetworkConfig::shapes() const
{
    std::vector<Shape> out;
    Shape s{input_channels, input, input};
    out.push_back(s);
    for (const auto &l : layers)
    {
        if (l.kind == LayerKind::linear)
        {
            s = {l.cout, 1, 1};
        }
        else
        {
            if (s[1] + 2 * l.pad < l.kernel || s[2] + 2 * l.pad < l.kernel)
            {
                throw ConfigError("network: layer input " + shape_to_string(s) + " is smaller than its kernel");
            }
            s = {l.cout, (s[1] + 2 * l.pad - l.kernel) / l.stride + 1, (s[2] + 2 * l.pad - l.kernel) / l.stride + 1};
        }
        out.push_back(s);
    }
    return out;
}

std::size_t NetworkConfig::grid() const
{
    return shapes().back()[1];
}

double NetworkConfig::cell_stride() const
{
    return static_cast<double>(input) / static_cast<double>(grid());
}

void NetworkConfig::validate() const
{
    if (layers.empty())
    {
        throw ConfigError("network: layer list is empty");
    }
    if (input == 0 || input_channels == 0)
    {
        throw ConfigError("network: input extent must be positive");
    }
    if (!(input_theta >= 0.0))
    {
        throw ConfigError("network: input theta must be nonnegative");
    }
    if (act_bits < 2 || act_bits > 8)
    {
        throw ConfigError("network: act_bits must be in [2, 8]");
    }
    std::size_t channels = input_channels;
    std::size_t flat = input_channels * input * input;
    bool has_linear = false;
    std::size_t stride_product = 1;
    const auto shp = [&] {
        try
        {
            return shapes();
        }
        catch (const ConfigError &)
        {
            throw;
        }
    }();
    for (std::size_t i = 0; i < layers.size(); ++i)
    {
        const auto &l = layers[i];
        const std::string where = "network: layer " + std::to_string(i) + ": ";
        if (l.cout == 0)
        {
            throw ConfigError(where + "cout must be positive");
        }
        if (!(l.theta >= 0.0))
        {
            throw ConfigError(where + "theta must be nonnegative");
        }
        if (l.kind == LayerKind::linear)
        {
            if (l.cin != flat)
            {
                throw ConfigError(where + "linear cin " + std::to_string(l.cin) + " != flattened input " +
                                  std::to_string(flat));
            }
            has_linear = true;
        }
        else
        {
            if (l.cin != channels)
            {
                throw ConfigError(where + "cin " + std::to_string(l.cin) + " != previous cout " +
                                  std::to_string(channels));
            }
            if (l.stride != 1 && l.stride != 2)
            {
                throw ConfigError(where + "stride must be 1 or 2");
            }
            if (l.kernel != 1 && l.kernel != 3)
            {
                throw ConfigError(where + "kernel must be 1 or 3");
            }
            stride_product *= l.stride;
        }
        channels = l.cout;
        flat = shape_size(shp[i + 1]);
    }
    if (layers.back().kind != LayerKind::conv)
    {
        throw ConfigError("network: the head must be a conv layer");
    }
    if (head.anchors.empty())
    {
        throw ConfigError("network: head needs at least one anchor");
    }
    if (layers.back().cout != head.channels())
    {
        throw ConfigError("network: head has " + std::to_string(layers.back().cout) + " channels, expected anchors x (5 + classes) = " +
                          std::to_string(head.channels()));
    }
    const Shape &out = shp.back();
    if (out[1] != out[2])
    {
        throw ConfigError("network: output map is not square");
    }
    if (!has_linear && (input % stride_product != 0 || input / stride_product != out[1]))
    {
        throw ConfigError("network: stride/grid inconsistency, input " + std::to_string(input) + " / stride product " +
                          std::to_string(stride_product) + " does not give the computed grid " +
                          std::to_string(out[1]));
    }
}

namespace
{

LayerKind parse_kind(const std::string &s)
{
    if (s == "conv")
    {
        return LayerKind::conv;
    }
    if (s == "linear")
    {
        return LayerKind::linear;
    }
    throw ConfigError("network config: unknown layer kind '" + s + "'");
}

Activation parse_act(const std::string &s)
{
    if (s == "relu")
    {
        return Activation::relu;
    }
    if (s == "none")
    {
        return Activation::none;
    }
    throw ConfigError("network config: unknown activation '" + s + "'");
}

} // namespace

NetworkConfig parse_config(const std::string &json_text)
{
    NetworkConfig c;
    try
    {
        const json j = json::parse(json_text);
        c.input = j.at("input").get<std::size_t>();
        c.input_channels = j.value("input_channels", std::size_t{3});
        c.input_theta = j.value("input_theta", 0.0);
        c.act_bits = j.value("act_bits", 8);
        for (const auto &l : j.at("layers"))
        {
            LayerSpec s;
            s.kind = parse_kind(l.at("kind").get<std::string>());
            s.cin = l.at("cin").get<std::size_t>();
            s.cout = l.at("cout").get<std::size_t>();
            s.kernel = l.value("k", std::size_t{1});
            s.stride = l.value("stride", std::size_t{1});
            s.pad = l.value("pad", std::size_t{0});
            s.act = parse_act(l.value("act", std::string("relu")));
            s.theta = l.value("theta", 0.0);
            c.layers.push_back(s);
        }
        const auto &h = j.at("head");
        for (const auto &a : h.at("anchors"))
        {
            if (a.size() != 2)
            {
                throw ConfigError("network config: anchors must be [w, h] pairs");
            }
            c.head.anchors.push_back({a[0].get<double>(), a[1].get<double>()});
        }
        c.head.classes = h.at("classes").get<std::size_t>();
    }
    catch (const json::exception &e)
    {
        throw ConfigError(std::string("network config: ") + e.what());
    }
    c.validate();
    return c;
}

NetworkConfig load_config(const std::filesystem::path &path)
{
    try
    {
        return parse_config(read_file(path));
    }
    catch (const ConfigError &e)
    {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string config_to_json(const NetworkConfig &c)
{
    nlohmann::ordered_json j;
    j["input"] = c.input;
    j["input_channels"] = c.input_channels;
    j["input_theta"] = c.input_theta;
    j["act_bits"] = c.act_bits;
    j["layers"] = nlohmann::ordered_json::array();
    for (const auto &l : c.layers)
    {
        nlohmann::ordered_json o;
        o["kind"] = l.kind == LayerKind::conv ? "conv" : "linear";
        o["cin"] = l.cin;
        o["cout"] = l.cout;
        o["k"] = l.kernel;
        o["stride"] = l.stride;
        o["pad"] = l.pad;
        o["act"] = l.act == Activation::relu ? "relu" : "none";
        o["theta"] = l.theta;
        j["layers"].push_back(o);
    }
    j["head"]["anchors"] = nlohmann::ordered_json::array();
    for (const auto &a : c.head.anchors)
    {
        j["head"]["anchors"].push_back({a[0], a[1]});
    }
    j["head"]["classes"] = c.head.classes;
    return j.dump(2) + "\n";
}

NetworkConfig default_yolo_kp_config(std::size_t classes)
{
    NetworkConfig c;
    c.input = 448;
    // Tiny-YOLOv3 coarse-head anchors rescaled from 416 to 448.
    c.head.anchors = {{87.0, 88.0}, {145.0, 182.0}, {370.0, 344.0}};
    c.head.classes = classes;
    const auto conv = [](std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride, Activation act) {
        return LayerSpec{LayerKind::conv, cin, cout, k, stride, k / 2, act, 0.0};
    };
    c.layers = {
        conv(3, 16, 3, 2, Activation::relu),    conv(16, 32, 3, 2, Activation::relu),
        conv(32, 64, 3, 2, Activation::relu),   conv(64, 128, 3, 2, Activation::relu),
        conv(128, 256, 3, 2, Activation::relu), conv(256, 512, 3, 1, Activation::relu),
        conv(512, 512, 3, 1, Activation::relu), conv(512, 256, 1, 1, Activation::relu),
        conv(256, 512, 3, 1, Activation::relu), conv(512, c.head.channels(), 1, 1, Activation::none),
    };
    c.validate();
    return c;
}

std::vector<std::string> layer_names(const NetworkConfig &config)
{
    std::vector<std::string> names;
    for (std::size_t i = 0; i < config.layers.size(); ++i)
    {
        names.push_back((config.layers[i].kind == LayerKind::conv ? "conv" : "fc") + std::to_string(i + 1));
    }
    return names;
}

std::vector<LayerMacs> count_macs(const NetworkConfig &config)
{
    const auto shp = config.shapes();
    const auto names = layer_names(config);
    std::vector<LayerMacs> out;
    for (std::size_t i = 0; i < config.layers.size(); ++i)
    {
        const auto &l = config.layers[i];
        const Shape &o = shp[i + 1];
        const std::uint64_t macs = l.kind == LayerKind::linear
                                       ? static_cast<std::uint64_t>(l.cin) * l.cout
                                       : static_cast<std::uint64_t>(l.kernel * l.kernel) * l.cin * l.cout * o[1] * o[2];
        out.push_back({names[i], macs});
    }
    return out;
}

namespace
{

Shape weight_shape(const LayerSpec &l)
{
    if (l.kind == LayerKind::linear)
    {
        return {l.cout, l.cin};
    }
    return {l.cout, l.cin, l.kernel, l.kernel};
}

std::size_t fan_in(const LayerSpec &l)
{
    return l.kind == LayerKind::linear ? l.cin : l.cin * l.kernel * l.kernel;
}

// Layer input as seen by conv2d: linear layers run as 1x1 convs over a
// [In, 1, 1] column.
template <typename T> Tensor<T> as_conv_input(const Tensor<T> &x, LayerKind kind)
{
    return kind == LayerKind::linear ? x.reshaped({x.size(), 1, 1}) : x;
}

template <typename W> Tensor<W> as_conv_weights(const Tensor<W> &w, LayerKind kind)
{
    return kind == LayerKind::linear ? w.reshaped({w.dim(0), w.dim(1), 1, 1}) : w;
}

} // namespace

NetworkWeights init_network_weights(const NetworkConfig &config, std::uint64_t seed)
{
    config.validate();
    Rng rng(seed);
    NetworkWeights w;
    for (const auto &l : config.layers)
    {
        TensorF wt(weight_shape(l));
        const double sd = std::sqrt(2.0 / static_cast<double>(fan_in(l)));
        for (float &v : wt.data())
        {
            v = static_cast<float>(rng.normal(0.0, sd));
        }
        TensorF b({l.cout});
        for (float &v : b.data())
        {
            v = static_cast<float>(rng.normal(0.0, 0.01));
        }
        w.weights.push_back(std::move(wt));
        w.biases.push_back(std::move(b));
    }
    return w;
}

void store_network_weights(WeightsContainer &container, const NetworkWeights &weights)
{
    for (std::size_t i = 0; i < weights.weights.size(); ++i)
    {
        container.set("det." + std::to_string(i) + ".weight", weights.weights[i]);
        container.set("det." + std::to_string(i) + ".bias", weights.biases[i]);
    }
    if (weights.quant)
    {
        container.set("quant.input", TensorF({1}, {static_cast<float>(weights.quant->input_scale)}));
        for (std::size_t i = 0; i < weights.quant->activation_scales.size(); ++i)
        {
            container.set("quant." + std::to_string(i) + ".act",
                          TensorF({1}, {static_cast<float>(weights.quant->activation_scales[i])}));
        }
    }
}

NetworkWeights load_network_weights(const WeightsContainer &container, const NetworkConfig &config)
{
    NetworkWeights w;
    for (std::size_t i = 0; i < config.layers.size(); ++i)
    {
        const std::string base = "det." + std::to_string(i);
        const TensorF &wt = container.get<float>(base + ".weight");
        const TensorF &b = container.get<float>(base + ".bias");
        if (wt.shape() != weight_shape(config.layers[i]) || b.shape() != Shape{config.layers[i].cout})
        {
            throw FormatError("weights: " + base + " shapes " + shape_to_string(wt.shape()) + "/" +
                              shape_to_string(b.shape()) + " do not match the network config");
        }
        w.weights.push_back(wt);
        w.biases.push_back(b);
    }
    if (container.contains("quant.input"))
    {
        QuantSpec q;
        q.input_scale = container.get<float>("quant.input")[0];
        for (std::size_t i = 0; i + 1 < config.layers.size(); ++i)
        {
            q.activation_scales.push_back(container.get<float>("quant." + std::to_string(i) + ".act")[0]);
        }
        w.quant = q;
    }
    return w;
}

QuantSpec calibrate_quantization(const NetworkConfig &config, const NetworkWeights &weights,
                                 const std::vector<TensorF> &sample_frames)
{
    const double limit = activation_limit(config.act_bits);
    QuantSpec q;
    q.input_scale = 1.0 / limit;
    std::vector<float> max_abs(config.layers.size(), 0.0F);
    for (const TensorF &frame : sample_frames)
    {
        TensorF x = normalize_frame(frame);
        for (std::size_t i = 0; i < config.layers.size(); ++i)
        {
            const auto &l = config.layers[i];
            x = conv2d(as_conv_input(x, l.kind), as_conv_weights(weights.weights[i], l.kind), weights.biases[i],
                       l.stride, l.pad);
            if (l.act == Activation::relu)
            {
                x = relu(std::move(x));
            }
            for (const float v : x.data())
            {
                max_abs[i] = std::max(max_abs[i], std::fabs(v));
            }
        }
    }
    for (std::size_t i = 0; i + 1 < config.layers.size(); ++i)
    {
        q.activation_scales.push_back(max_abs[i] > 0.0F ? static_cast<double>(max_abs[i]) / limit : 1.0 / limit);
    }
    return q;
}

Network::Network(NetworkConfig config, NetworkWeights weights) : config_(std::move(config)), weights_(std::move(weights))
{
    config_.validate();
    const std::size_t n = config_.layers.size();
    if (weights_.weights.size() != n || weights_.biases.size() != n)
    {
        throw ConfigError("network: weights cover " + std::to_string(weights_.weights.size()) + " layers, config has " +
                          std::to_string(n));
    }
    const auto shp = config_.shapes();
    const auto names = layer_names(config_);
    for (std::size_t i = 0; i < n; ++i)
    {
        const auto &l = config_.layers[i];
        if (weights_.weights[i].shape() != weight_shape(l) || weights_.biases[i].shape() != Shape{l.cout})
        {
            throw ConfigError("network: " + names[i] + " weight shapes do not match the config");
        }
        float_layers_.push_back(SynapticLayer<float>{names[i], l.kind, shp[i], weights_.weights[i], weights_.biases[i],
                                                     l.stride, l.pad, l.act, std::nullopt});
    }
    if (!weights_.quant)
    {
        return;
    }
    const QuantSpec &q = *weights_.quant;
    if (q.activation_scales.size() + 1 != n || !(q.input_scale > 0.0))
    {
        throw ConfigError("network: quantisation scales do not match the layer count");
    }
    const std::int32_t limit = activation_limit(config_.act_bits);
    double in_scale = q.input_scale;
    for (std::size_t i = 0; i < n; ++i)
    {
        const auto &l = config_.layers[i];
        const QuantParams wq = fit_symmetric(weights_.weights[i]);
        const double acc_scale = in_scale * wq.scale;
        TensorI32 bias({l.cout});
        for (std::size_t o = 0; o < l.cout; ++o)
        {
            const double r = round_half_even(static_cast<double>(weights_.biases[i][o]) / acc_scale);
            if (std::fabs(r) > 2147483647.0)
            {
                throw OverflowError("network: " + names[i] + " bias does not fit i32 at this scale");
            }
            bias[o] = static_cast<std::int32_t>(r);
        }
        std::optional<Requantizer> requant;
        if (i + 1 < n)
        {
            const double out_scale = q.activation_scales[i];
            if (!(out_scale > 0.0))
            {
                throw ConfigError("network: activation scales must be positive");
            }
            requant = Requantizer{acc_scale / out_scale, limit};
            in_scale = out_scale;
        }
        else
        {
            head_scale_ = acc_scale;
        }
        int_layers_.push_back(SynapticLayer<std::int32_t>{names[i], l.kind, shp[i], quantize(weights_.weights[i], wq),
                                                          std::move(bias), l.stride, l.pad, l.act, requant});
    }
}

double Network::input_scale() const
{
    return weights_.quant ? weights_.quant->input_scale : 1.0;
}

TensorF normalize_frame(const TensorF &frame)
{
    TensorF x = frame;
    for (float &v : x.data())
    {
        v = v * (1.0F / 255.0F);
    }
    return x;
}

TensorI8 quantize_frame(const Network &net, const TensorF &frame)
{
    if (!net.quantized())
    {
        throw ConfigError("network has no quantisation scales");
    }
    return quantize(normalize_frame(frame), QuantParams{net.input_scale()});
}

TensorF ann_forward(const Network &net, const TensorF &frame)
{
    require_same_shape(frame.shape(), net.config().shapes().front(), "ann_forward");
    TensorF x = normalize_frame(frame);
    for (const auto &l : net.float_layers())
    {
        x = conv2d(as_conv_input(x, l.kind), as_conv_weights(l.weights, l.kind), l.bias, l.stride, l.padding);
        if (l.activation == Activation::relu)
        {
            x = relu(std::move(x));
        }
    }
    return x;
}

TensorI32 ann_forward_int(const Network &net, const TensorF &frame)
{
    require_same_shape(frame.shape(), net.config().shapes().front(), "ann_forward_int");
    TensorI8 x = quantize_frame(net, frame);
    const auto &layers = net.int_layers();
    for (std::size_t i = 0; i < layers.size(); ++i)
    {
        const auto &l = layers[i];
        TensorI32 acc = conv2d(as_conv_input(x, l.kind), as_conv_weights(l.weights, l.kind), l.bias, l.stride, l.padding);
        if (l.activation == Activation::relu)
        {
            acc = relu(std::move(acc));
        }
        if (!l.requantizer)
        {
            return acc;
        }
        TensorI8 next(acc.shape());
        for (std::size_t k = 0; k < acc.size(); ++k)
        {
            next[k] = static_cast<std::int8_t>((*l.requantizer)(acc[k]));
        }
        x = std::move(next);
    }
    throw ConfigError("network: last layer must not requantize");
}

TensorF dequantize_head(const Network &net, const TensorI32 &head)
{
    TensorF out(head.shape());
    for (std::size_t i = 0; i < head.size(); ++i)
    {
        out[i] = static_cast<float>(static_cast<double>(head[i]) * net.head_scale());
    }
    return out;
}

} // namespace sdmask
