#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "sdmask/detection.hpp"
#include "sdmask/error.hpp"
#include "sdmask/network.hpp"
#include "sdmask/sdnn.hpp"
#include "sdmask/weights_io.hpp"

using namespace sdmask;

namespace
{

const char *kToyConfig = R"({
  "input": 8, "input_channels": 2,
  "layers": [
    {"kind": "conv", "cin": 2, "cout": 4, "k": 3, "stride": 2, "pad": 1, "act": "relu", "theta": 0.5},
    {"kind": "conv", "cin": 4, "cout": 6, "k": 1, "act": "none"}
  ],
  "head": {"anchors": [[8, 8]], "classes": 1}
})";

} // namespace

TEST(NetworkConfig, ParsesToyConfig)
{
    const NetworkConfig c = parse_config(kToyConfig);
    EXPECT_EQ(c.input, 8u);
    EXPECT_EQ(c.grid(), 4u);
    EXPECT_EQ(c.layers[0].theta, 0.5);
    EXPECT_EQ(c.layers[1].act, Activation::none);
    EXPECT_EQ(c.cell_stride(), 2.0);
    EXPECT_EQ(parse_config(config_to_json(c)), c);
}

TEST(NetworkConfig, DefaultDetector)
{
    const NetworkConfig c = default_yolo_kp_config();
    EXPECT_EQ(c.layers.size(), 10u);
    EXPECT_EQ(c.grid(), 14u);
    std::size_t stride2 = 0;
    for (const auto &l : c.layers)
        stride2 += l.stride == 2;
    EXPECT_EQ(stride2, 5u);
    EXPECT_EQ(c.layers.back().cout, 3u * (5u + 9u));
    const double total = static_cast<double>(total_macs(count_macs(c)));
    EXPECT_NEAR(total / 1.034e9, 1.0, 0.25);
    EXPECT_EQ(layer_names(c).front(), "conv1");
}

TEST(NetworkConfig, Rejections)
{
    NetworkConfig c = parse_config(kToyConfig);
    NetworkConfig bad = c;
    bad.layers.back().cout = 7;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.layers.clear();
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.layers[0].stride = 3;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.layers[0].kernel = 5;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.layers[1].cin = 5;
    EXPECT_THROW(bad.validate(), ConfigError);
    EXPECT_THROW((void)parse_config("{\"input\": 8}"), ConfigError);
    EXPECT_THROW((void)parse_config("not json"), ConfigError);
    EXPECT_THROW((void)load_config("/nonexistent/net.json"), Error);
}

TEST(CountMacs, ClosedForm)
{
    NetworkConfig one;
    one.input = 1;
    one.input_channels = 1;
    one.head = HeadSpec{{}, 1};
    one.layers = {LayerSpec{LayerKind::conv, 1, 1, 1, 1, 0, Activation::none, 0.0}};
    EXPECT_EQ(count_macs(one).front().macs, 1u);

    NetworkConfig c;
    c.input = 224;
    c.layers = {LayerSpec{LayerKind::conv, 3, 16, 3, 1, 1, Activation::relu, 0.0}};
    EXPECT_EQ(count_macs(c).front().macs, 21676032u);
}

TEST(AnnForward, ZeroWeightsGiveZeroOutput)
{
    const NetworkConfig c = parse_config(kToyConfig);
    NetworkWeights w = init_network_weights(c, 1);
    for (auto &t : w.weights)
        t.fill(0.0F);
    for (auto &t : w.biases)
        t.fill(0.0F);
    const Network net(c, w);
    Rng rng(1);
    const TensorF out = ann_forward(net, oracle::random_tensor(rng, {2, 8, 8}, 0, 255));
    EXPECT_EQ(out.shape(), (Shape{6, 4, 4}));
    EXPECT_EQ(out.count_nonzero(), 0u);
}

TEST(AnnForward, MatchesComposedConvolutions)
{
    const NetworkConfig c = parse_config(kToyConfig);
    const Network net(c, init_network_weights(c, 2));
    Rng rng(2);
    const TensorF frame = oracle::random_tensor(rng, {2, 8, 8}, 0, 255);
    TensorF x = frame;
    for (float &v : x.data())
        v /= 255.0F;
    TensorF h = oracle::conv2d(x, net.weights().weights[0], net.weights().biases[0], 2, 1);
    for (float &v : h.data())
        v = std::max(v, 0.0F);
    const TensorF expect = oracle::conv2d(h, net.weights().weights[1], net.weights().biases[1], 1, 0);
    const TensorF got = ann_forward(net, frame);
    ASSERT_EQ(got.shape(), expect.shape());
    for (std::size_t i = 0; i < got.size(); ++i)
        EXPECT_NEAR(got[i], expect[i], 1e-5);
    EXPECT_EQ(ann_forward(net, frame), got);
}

TEST(AnnForward, LinearLayerIsFlattenedMatmul)
{
    NetworkConfig c;
    c.input = 2;
    c.input_channels = 1;
    c.head = HeadSpec{{{1.0, 1.0}}, 1};
    c.layers = {LayerSpec{LayerKind::linear, 4, 3, 1, 1, 0, Activation::relu, 0.0},
                LayerSpec{LayerKind::conv, 3, 6, 1, 1, 0, Activation::none, 0.0}};
    c.validate();
    const Network net(c, init_network_weights(c, 3));
    const TensorF frame({1, 2, 2}, {255, 0, 51, 102});
    const TensorF &w = net.weights().weights[0];
    const TensorF &b = net.weights().biases[0];
    std::vector<float> hidden(3);
    for (std::size_t o = 0; o < 3; ++o)
    {
        float acc = b[o];
        for (std::size_t i = 0; i < 4; ++i)
            acc += w(o, i) * frame[i] / 255.0F;
        hidden[o] = std::max(acc, 0.0F);
    }
    const TensorF out = ann_forward(net, frame);
    ASSERT_EQ(out.shape(), (Shape{6, 1, 1}));
    for (std::size_t o = 0; o < 6; ++o)
    {
        float acc = net.weights().biases[1][o];
        for (std::size_t i = 0; i < 3; ++i)
            acc += net.weights().weights[1](o, i, 0, 0) * hidden[i];
        EXPECT_NEAR(out[o], acc, 1e-5);
    }
}

TEST(Quantisation, ScalesAndIntegerForward)
{
    const NetworkConfig c = parse_config(kToyConfig);
    NetworkWeights w = init_network_weights(c, 4);
    Rng rng(4);
    const TensorF frame = oracle::random_tensor(rng, {2, 8, 8}, 0, 255);
    w.quant = calibrate_quantization(c, w, {frame});
    ASSERT_EQ(w.quant->activation_scales.size(), 1u);
    EXPECT_GT(w.quant->activation_scales[0], 0.0);
    const Network net(c, w);
    EXPECT_TRUE(net.quantized());
    const TensorF approx = dequantize_head(net, ann_forward_int(net, frame));
    const TensorF exact = ann_forward(net, frame);
    double peak = 0;
    for (const float v : exact.data())
        peak = std::max(peak, std::fabs(static_cast<double>(v)));
    for (std::size_t i = 0; i < exact.size(); ++i)
        EXPECT_NEAR(approx[i], exact[i], 0.1 * peak);
    const TensorI8 q = quantize_frame(net, frame);
    EXPECT_EQ(q[0], static_cast<std::int8_t>(round_half_even(frame[0] / 255.0 / net.input_scale())));
}

TEST(Sdnn, TwoFrameStreamEqualsDenseOnSecondFrame)
{
    const NetworkConfig c = parse_config(kToyConfig);
    NetworkWeights w = init_network_weights(c, 5);
    Rng rng(5);
    const TensorF f1 = oracle::random_tensor(rng, {2, 8, 8}, 0, 255);
    const TensorF f2 = oracle::random_tensor(rng, {2, 8, 8}, 0, 255);
    w.quant = calibrate_quantization(c, w, {f1, f2});
    const Network net(c, w);
    ThresholdOverrides lossless;
    lossless.input = 0.0;
    lossless.layers = 0.0;
    auto sdnn = convert_to_sdnn<std::int32_t>(net, lossless);
    (void)sdnn.step(f1);
    EXPECT_EQ(sdnn.step(f2).head, ann_forward_int(net, f2));
}

TEST(Sdnn, ConfigThresholdsApplied)
{
    const NetworkConfig c = parse_config(kToyConfig);
    const Network net(c, init_network_weights(c, 6));
    Sdnn<float> sdnn(net);
    EXPECT_EQ(sdnn.layer(0).encoder().threshold(), 0.5);
    EXPECT_EQ(sdnn.layer(1).encoder().threshold(), 0.0);
    ThresholdOverrides o;
    o.layers = 0.25;
    Sdnn<float> over(net, o);
    EXPECT_EQ(over.layer(0).encoder().threshold(), 0.25);
    EXPECT_THROW(Sdnn<std::int32_t>{net}, ConfigError);
}

TEST(Sdnn, EventCountsRespectBounds)
{
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial)
    {
        const NetworkConfig c = oracle::random_toy_config(rng, 16, 2, 4, 6);
        const Network net(c, init_network_weights(c, 40 + trial));
        Sdnn<float> sdnn(net);
        for (int t = 0; t < 4; ++t)
        {
            const auto s = sdnn.step(oracle::random_tensor(rng, c.shapes().front(), 0, 255));
            for (const auto &l : s.stats)
            {
                EXPECT_LE(l.events_out, l.neurons);
                EXPECT_LE(l.synops, l.dense_macs);
            }
        }
    }
}

TEST(Decode, SuppressedLogitsGiveNothing)
{
    const HeadSpec spec{{{10, 10}, {20, 20}}, 2};
    EXPECT_TRUE(decode_detections(TensorF({14, 4, 4}, -50.0F), spec, 64, 0.1).empty());
    EXPECT_THROW((void)decode_detections(TensorF({13, 4, 4}), spec, 64, 0.1), ConfigError);
}

TEST(Decode, SingleConfidentCell)
{
    const HeadSpec spec{{{10, 12}}, 2};
    TensorF head({7, 4, 4}, -50.0F);
    const std::size_t gy = 2, gx = 1;
    head(0, gy, gx) = 0.0F;
    head(1, gy, gx) = 0.0F;
    head(2, gy, gx) = 0.0F;
    head(3, gy, gx) = 0.0F;
    head(4, gy, gx) = 50.0F;
    head(6, gy, gx) = 50.0F;
    const auto dets = decode_detections(head, spec, 64, 0.1);
    ASSERT_EQ(dets.size(), 1u);
    const Detection &d = dets[0];
    EXPECT_EQ(d.class_id, 1u);
    EXPECT_NEAR(d.confidence, 1.0, 1e-9);
    // stride 16, centre at cell + 0.5
    EXPECT_DOUBLE_EQ((d.box.x1 + d.box.x2) / 2, 24.0);
    EXPECT_DOUBLE_EQ((d.box.y1 + d.box.y2) / 2, 40.0);
    EXPECT_DOUBLE_EQ(d.box.width(), 10.0);
    EXPECT_DOUBLE_EQ(d.box.height(), 12.0);
}

TEST(Decode, NmsKeepsHigherConfidence)
{
    const Box b{10, 10, 30, 30};
    const auto kept = nms({Detection{b, 0, 0.8}, Detection{b, 0, 0.9}, Detection{b, 1, 0.5}}, 0.5);
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_EQ(kept[0].confidence, 0.9);
    EXPECT_EQ(kept[1].class_id, 1u);
    // IoU exactly at the threshold is not suppressed.
    const auto edge = nms({Detection{Box{0, 0, 2, 1}, 0, 0.9}, Detection{Box{0, 0, 1, 1}, 0, 0.8}}, 0.5);
    EXPECT_EQ(edge.size(), 2u);
}

TEST(Weights, RoundTripThroughContainer)
{
    const NetworkConfig c = parse_config(kToyConfig);
    NetworkWeights w = init_network_weights(c, 8);
    Rng rng(8);
    w.quant = calibrate_quantization(c, w, {oracle::random_tensor(rng, {2, 8, 8}, 0, 255)});
    WeightsContainer box;
    store_network_weights(box, w);
    const WeightsContainer back = WeightsContainer::deserialize(box.serialize());
    const NetworkWeights r = load_network_weights(back, c);
    EXPECT_EQ(r.weights, w.weights);
    EXPECT_EQ(r.biases, w.biases);
    ASSERT_TRUE(r.quant.has_value());
    EXPECT_EQ(static_cast<float>(r.quant->input_scale), static_cast<float>(w.quant->input_scale));
    EXPECT_EQ(static_cast<float>(r.quant->activation_scales[0]), static_cast<float>(w.quant->activation_scales[0]));

    NetworkConfig other = c;
    other.layers[0].cout = 5;
    other.layers[1].cin = 5;
    EXPECT_THROW((void)load_network_weights(back, other), FormatError);
}

TEST(Weights, InitIsSeeded)
{
    const NetworkConfig c = parse_config(kToyConfig);
    EXPECT_EQ(init_network_weights(c, 9).weights, init_network_weights(c, 9).weights);
    EXPECT_NE(init_network_weights(c, 9).weights, init_network_weights(c, 10).weights);
}
