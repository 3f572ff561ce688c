#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sdmask/error.hpp"
#include "sdmask/network.hpp"
#include "sdmask/sdnn.hpp"
#include "sdmask/sigma_delta.hpp"

using namespace sdmask;

namespace
{

EventFrame<float> events_of(const TensorF &v)
{
    return EventFrame<float>{v, v.count_nonzero()};
}

} // namespace

TEST(DeltaEncoder, ThresholdOneStream)
{
    DeltaEncoder<float> enc({1}, 1.0);
    std::vector<float> spikes;
    for (const float x : {5.0F, 5.4F, 7.0F})
    {
        spikes.push_back(enc.encode(TensorF({1}, {x})).values[0]);
    }
    EXPECT_EQ(spikes, (std::vector<float>{5.0F, 0.0F, 2.0F}));
    EXPECT_EQ(enc.reference()[0], 7.0F);
}

TEST(DeltaEncoder, BoundarySpikes)
{
    DeltaEncoder<float> enc({1}, 1.0);
    const auto e = enc.encode(TensorF({1}, {1.0F}));
    EXPECT_EQ(e.values[0], 1.0F);
    EXPECT_EQ(e.nonzero_count, 1u);
    DeltaEncoder<std::int32_t> ienc({1}, 3.0);
    EXPECT_EQ(ienc.encode(TensorI32({1}, std::vector<std::int32_t>{3})).values[0], 3);
    EXPECT_EQ(ienc.encode(TensorI32({1}, std::vector<std::int32_t>{5})).values[0], 0);
}

TEST(DeltaEncoder, ZeroThresholdIsTemporalDifference)
{
    Rng rng(1);
    DeltaEncoder<float> enc({16}, 0.0);
    TensorF prev({16});
    for (int t = 0; t < 10; ++t)
    {
        const TensorF x = oracle::random_integer_tensor(rng, {16}, -5, 5);
        const auto e = enc.encode(x);
        for (std::size_t i = 0; i < 16; ++i)
            ASSERT_EQ(e.values[i], x[i] - prev[i]);
        ASSERT_EQ(e.nonzero_count, e.values.count_nonzero());
        prev = x;
    }
}

TEST(DeltaEncoder, ConstantStreamGoesQuiet)
{
    DeltaEncoder<float> enc({8}, 0.25);
    const TensorF x({8}, 3.0F);
    EXPECT_EQ(enc.encode(x).nonzero_count, 8u);
    for (int t = 0; t < 5; ++t)
        EXPECT_EQ(enc.encode(x).nonzero_count, 0u);
}

TEST(DeltaEncoder, ShapeMismatch)
{
    DeltaEncoder<float> enc({4}, 0.0);
    EXPECT_THROW((void)enc.encode(TensorF({5})), ConfigError);
    EXPECT_THROW(DeltaEncoder<float>({4}, -1.0), ConfigError);
}

TEST(DeltaEncoder, ResetRetransmitsFrame)
{
    Rng rng(2);
    DeltaEncoder<float> enc({3, 4, 4}, 0.5);
    const TensorF a = oracle::random_integer_tensor(rng, {3, 4, 4}, -3, 3);
    const TensorF b = oracle::random_integer_tensor(rng, {3, 4, 4}, -3, 3);
    (void)enc.encode(a);
    (void)enc.encode(b);
    enc.reset();
    const auto e = enc.encode(b);
    EXPECT_EQ(e.values, b);
    EXPECT_EQ(e.nonzero_count, b.count_nonzero());
}

TEST(DeltaEncoder, IdenticalSequencesAfterReset)
{
    Rng rng(3);
    std::vector<TensorF> stream;
    for (int t = 0; t < 6; ++t)
        stream.push_back(oracle::random_tensor(rng, {10}));
    DeltaEncoder<float> enc({10}, 0.3);
    std::vector<TensorF> first;
    for (const auto &x : stream)
        first.push_back(enc.encode(x).values);
    enc.reset();
    for (std::size_t t = 0; t < stream.size(); ++t)
        EXPECT_EQ(enc.encode(stream[t]).values, first[t]);
}

TEST(DeltaEncoder, ReconstructionBound)
{
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial)
    {
        const double theta = rng.uniform(0.0, 2.0);
        DeltaEncoder<float> enc({32}, theta);
        for (int t = 0; t < 10; ++t)
        {
            const TensorF x = oracle::random_tensor(rng, {32}, -5.0, 5.0);
            const auto e = enc.encode(x);
            for (std::size_t i = 0; i < 32; ++i)
            {
                const double gap = std::fabs(static_cast<double>(x[i]) - enc.reference()[i]);
                if (e.values[i] != 0.0F)
                    ASSERT_EQ(gap, 0.0);
                else
                    ASSERT_LT(gap, theta);
            }
        }
    }
}

TEST(DeltaEncoder, HigherThresholdSpikesSubsetFromEqualState)
{
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial)
    {
        const double lo = rng.uniform(0.0, 1.0);
        const double hi = lo + rng.uniform(0.0, 1.0);
        const TensorF x = oracle::random_tensor(rng, {64}, -2.0, 2.0);
        const auto a = DeltaEncoder<float>({64}, lo).encode(x);
        const auto b = DeltaEncoder<float>({64}, hi).encode(x);
        for (std::size_t i = 0; i < 64; ++i)
            ASSERT_TRUE(b.values[i] == 0.0F || a.values[i] != 0.0F);
        ASSERT_LE(b.nonzero_count, a.nonzero_count);
    }
}

TEST(DeltaEncoder, AnyThresholdSpikesOnlyWhereSignalChanged)
{
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial)
    {
        const double theta = rng.uniform(0.01, 2.0);
        DeltaEncoder<float> lossless({32}, 0.0);
        DeltaEncoder<float> thresholded({32}, theta);
        TensorF x = oracle::random_integer_tensor(rng, {32}, -3, 3);
        for (int t = 0; t < 12; ++t)
        {
            for (float &v : x.data())
                if (rng.coin(0.3))
                    v = static_cast<float>(rng.uniform(-3.0, 3.0));
            const auto a = lossless.encode(x);
            const auto b = thresholded.encode(x);
            for (std::size_t i = 0; i < 32; ++i)
                ASSERT_TRUE(b.values[i] == 0.0F || a.values[i] != 0.0F);
            ASSERT_LE(b.nonzero_count, a.nonzero_count);
        }
    }
}

// Nesting across steps is not guaranteed for two positive thresholds: the
// lower one may already have spent its change.
TEST(DeltaEncoder, ThresholdNestingAcrossStepsCharacterised)
{
    DeltaEncoder<float> lo({1}, 0.5);
    DeltaEncoder<float> hi({1}, 0.8);
    std::vector<std::size_t> lo_n;
    std::vector<std::size_t> hi_n;
    for (const float x : {0.0F, 0.6F, 0.9F})
    {
        lo_n.push_back(lo.encode(TensorF({1}, {x})).nonzero_count);
        hi_n.push_back(hi.encode(TensorF({1}, {x})).nonzero_count);
    }
    EXPECT_EQ(lo_n, (std::vector<std::size_t>{0, 1, 0}));
    EXPECT_EQ(hi_n, (std::vector<std::size_t>{0, 0, 1}));
}

TEST(SigmaDecoder, CumulativeSum)
{
    SigmaDecoder<float> dec({1});
    std::vector<float> trace;
    for (const float s : {5.0F, 0.0F, 2.0F})
        trace.push_back(dec.decode(events_of(TensorF({1}, {s})))[0]);
    EXPECT_EQ(trace, (std::vector<float>{5.0F, 5.0F, 7.0F}));
    const TensorF before = dec.estimate();
    dec.decode(events_of(TensorF({1})));
    EXPECT_EQ(dec.estimate(), before);
    dec.reset();
    EXPECT_EQ(dec.estimate()[0], 0.0F);
    EXPECT_THROW(dec.decode(events_of(TensorF({2}))), ConfigError);
}

TEST(SigmaDecoder, InvertsLosslessEncoder)
{
    Rng rng(7);
    DeltaEncoder<float> enc({20}, 0.0);
    SigmaDecoder<float> dec({20});
    for (int t = 0; t < 10; ++t)
    {
        const TensorF x = oracle::random_integer_tensor(rng, {20}, -100, 100);
        EXPECT_EQ(dec.decode(enc.encode(x)), x);
    }
    DeltaEncoder<std::int32_t> ienc({5}, 0.0);
    SigmaDecoder<std::int32_t> idec({5});
    for (int t = 0; t < 10; ++t)
    {
        TensorI32 x({5});
        for (auto &v : x.data())
            v = static_cast<std::int32_t>(rng.below(2001)) - 1000;
        EXPECT_EQ(idec.decode(ienc.encode(x)), x);
    }
}

TEST(WrapLayer, SingleEventThroughLinearLayer)
{
    // Weights [O=3, In=4]; an event v at input i adds v * column i.
    const TensorF w({3, 4}, {1, 2, 3, 4, -1, -2, -3, -4, 0.5F, 0, 0, 0});
    const TensorF b({3}, {0.0F, 1.0F, 0.0F});
    SynapticLayer<float> l{"fc", LayerKind::linear, {4}, w, b, 1, 0, Activation::relu, std::nullopt};
    EXPECT_EQ(l.fan_out(2), 3u);
    auto sd = wrap_layer(l, 0.0);

    LayerStats s0;
    const auto quiet = sd.step(events_of(TensorF({4})), s0);
    EXPECT_EQ(s0.synops, 0u);
    EXPECT_EQ(quiet.values, TensorF({3, 1, 1}, {0.0F, 1.0F, 0.0F})); // relu(bias) transmitted once

    LayerStats s1;
    const float v = 2.0F;
    const auto out = sd.step(events_of(TensorF({4}, {0, 0, v, 0})), s1);
    EXPECT_EQ(s1.synops, l.fan_out(2));
    EXPECT_EQ(s1.events_in, 1u);
    // relu(b + v*col) - relu(b) per output
    const float expect[3] = {std::max(0.0F, 0.0F + v * 3.0F) - 0.0F, std::max(0.0F, 1.0F + v * -3.0F) - 1.0F,
                             std::max(0.0F, 0.0F + v * 0.0F) - 0.0F};
    for (std::size_t o = 0; o < 3; ++o)
        EXPECT_EQ(out.values[o], expect[o]);
    EXPECT_EQ(s1.events_out, 2u);
}

TEST(WrapLayer, NoEventsNoWork)
{
    SynapticLayer<float> l{"c", LayerKind::conv, {2, 5, 5}, TensorF({3, 2, 3, 3}, 1.0F), TensorF({3}), 1, 1,
                           Activation::relu, std::nullopt};
    auto sd = wrap_layer(l, 0.0);
    LayerStats s;
    const auto out = sd.step(events_of(TensorF({2, 5, 5})), s);
    EXPECT_EQ(s.synops, 0u);
    EXPECT_EQ(s.events_out, 0u);
    EXPECT_EQ(out.nonzero_count, 0u);
}

TEST(WrapLayer, FanOutMatchesTargetEnumeration)
{
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial)
    {
        const std::size_t k = rng.coin() ? 3 : 1, stride = 1 + rng.below(2), pad = k == 3 ? rng.below(2) : 0;
        SynapticLayer<float> l{"c", LayerKind::conv, {2, 7, 6}, TensorF({4, 2, k, k}), TensorF({4}), stride, pad,
                               Activation::relu, std::nullopt};
        const Shape out = l.output_shape();
        for (std::size_t i = 0; i < 2 * 7 * 6; ++i)
        {
            const long iy = static_cast<long>((i % 42) / 6), ix = static_cast<long>(i % 6);
            std::uint64_t n = 0;
            for (long oy = 0; oy < static_cast<long>(out[1]); ++oy)
                for (long ox = 0; ox < static_cast<long>(out[2]); ++ox)
                {
                    const long ky = iy - (oy * static_cast<long>(stride) - static_cast<long>(pad));
                    const long kx = ix - (ox * static_cast<long>(stride) - static_cast<long>(pad));
                    if (ky >= 0 && ky < static_cast<long>(k) && kx >= 0 && kx < static_cast<long>(k))
                        n += 4;
                }
            ASSERT_EQ(l.fan_out(i), n);
        }
    }
}

TEST(WrapLayer, SynopsEqualDenseMacsTimesChangedFrames)
{
    Rng rng(9);
    SynapticLayer<float> l{"c", LayerKind::conv, {2, 6, 6}, oracle::random_tensor(rng, {3, 2, 3, 3}),
                           TensorF({3}), 1, 0, Activation::relu, std::nullopt};
    auto sd = wrap_layer(l, 0.0);
    DeltaEncoder<float> input({2, 6, 6}, 0.0);
    std::uint64_t synops = 0;
    std::uint64_t changed = 0;
    TensorF x({2, 6, 6});
    for (int t = 0; t < 12; ++t)
    {
        if (rng.coin(0.6))
        {
            // every element moves to a new nonzero value
            for (float &v : x.data())
                v = v + 1.0F + static_cast<float>(rng.below(5));
            ++changed;
        }
        LayerStats s;
        sd.step(input.encode(x), s);
        synops += s.synops;
    }
    EXPECT_EQ(synops, l.dense_macs() * changed);
}

TEST(WrapLayer, SynopsNeverExceedDenseMacs)
{
    Rng rng(10);
    SynapticLayer<float> l{"c", LayerKind::conv, {2, 8, 8}, oracle::random_tensor(rng, {3, 2, 3, 3}),
                           TensorF({3}), 2, 1, Activation::relu, std::nullopt};
    auto sd = wrap_layer(l, 0.0);
    for (int t = 0; t < 5; ++t)
    {
        LayerStats s;
        const TensorF x = oracle::random_tensor(rng, {2, 8, 8});
        sd.step(events_of(x), s);
        EXPECT_LE(s.synops, s.dense_macs);
        EXPECT_LE(s.events_out, s.neurons);
    }
}

namespace
{

Network toy_network(Rng &rng, std::uint64_t seed, bool quantized)
{
    const NetworkConfig c = oracle::random_toy_config(rng, 8, 2, 4, 8);
    NetworkWeights w = init_network_weights(c, seed);
    if (quantized)
    {
        std::vector<TensorF> samples;
        for (int i = 0; i < 3; ++i)
            samples.push_back(oracle::random_tensor(rng, c.shapes().front(), 0.0, 255.0));
        w.quant = calibrate_quantization(c, w, samples);
    }
    return Network(c, std::move(w));
}

} // namespace

TEST(Sdnn, LosslessIntegerPathEqualsAnn)
{
    Rng rng(20);
    for (int net_i = 0; net_i < 10; ++net_i)
    {
        const Network net = toy_network(rng, 100 + net_i, true);
        Sdnn<std::int32_t> sdnn(net);
        TensorF frame = oracle::random_tensor(rng, net.config().shapes().front(), 0.0, 255.0);
        for (int t = 0; t < 6; ++t)
        {
            for (float &v : frame.data())
                if (rng.coin(0.3))
                    v = static_cast<float>(rng.uniform(0.0, 255.0));
            ASSERT_EQ(sdnn.step(frame).head, ann_forward_int(net, frame));
        }
    }
}

TEST(Sdnn, LosslessFloatPathWithinTolerance)
{
    Rng rng(21);
    for (int net_i = 0; net_i < 10; ++net_i)
    {
        const Network net = toy_network(rng, 200 + net_i, false);
        Sdnn<float> sdnn(net);
        for (int t = 0; t < 6; ++t)
        {
            const TensorF frame = oracle::random_tensor(rng, net.config().shapes().front(), 0.0, 255.0);
            const TensorF a = sdnn.step(frame).head;
            const TensorF b = ann_forward(net, frame);
            for (std::size_t i = 0; i < a.size(); ++i)
                ASSERT_NEAR(a[i], b[i], 1e-5 * std::max(1.0F, std::fabs(b[i])));
        }
    }
}

TEST(Sdnn, RepeatedFramesAreSilent)
{
    Rng rng(22);
    const Network net = toy_network(rng, 300, true);
    ThresholdOverrides th;
    th.layers = 1.0;
    Sdnn<std::int32_t> sdnn(net, th);
    const TensorF frame = oracle::random_tensor(rng, net.config().shapes().front(), 0.0, 255.0);
    (void)sdnn.step(frame);
    for (int t = 0; t < 3; ++t)
    {
        const auto s = sdnn.step(frame);
        for (const auto &l : s.stats)
        {
            EXPECT_EQ(l.events_out, 0u) << l.name;
            EXPECT_EQ(l.synops, 0u) << l.name;
        }
    }
}

TEST(Sdnn, StatsIncludeInputEncoder)
{
    Rng rng(23);
    const Network net = toy_network(rng, 301, true);
    Sdnn<std::int32_t> sdnn(net);
    const auto s = sdnn.step(TensorF(net.config().shapes().front()));
    ASSERT_EQ(s.stats.size(), net.config().layers.size() + 1);
    EXPECT_EQ(s.stats.front().name, "input");
    EXPECT_EQ(s.stats.front().events_out, 0u);
    EXPECT_EQ(s.stats.front().neurons, shape_size(net.config().shapes().front()));
}

TEST(Sdnn, ZeroStreamHasOnlyBiasBookkeeping)
{
    Rng rng(24);
    const Network net = toy_network(rng, 302, true);
    Sdnn<std::int32_t> sdnn(net);
    const TensorF zero(net.config().shapes().front());
    (void)sdnn.step(zero);
    for (int t = 0; t < 3; ++t)
    {
        std::uint64_t total = 0;
        for (const auto &l : sdnn.step(zero).stats)
            total += l.events_out + l.synops + l.events_in;
        EXPECT_EQ(total, 0u);
    }
}

TEST(Sdnn, SinglePixelChangeStaysInReceptiveCone)
{
    Rng rng(25);
    NetworkConfig c;
    c.input = 12;
    c.input_channels = 1;
    c.head = HeadSpec{{{4.0, 4.0}}, 1};
    c.layers = {LayerSpec{LayerKind::conv, 1, 2, 3, 1, 1, Activation::relu, 0.0},
                LayerSpec{LayerKind::conv, 2, 6, 1, 1, 0, Activation::none, 0.0}};
    NetworkWeights w = init_network_weights(c, 7);
    const Network net(c, std::move(w));
    Sdnn<float> sdnn(net);
    TensorF frame = oracle::random_tensor(rng, {1, 12, 12}, 0.0, 255.0);
    const TensorF before = ann_forward(net, frame);
    (void)sdnn.step(frame);
    frame(0, 5, 7) += 40.0F;
    const auto s = sdnn.step(frame);
    EXPECT_EQ(s.input_events.nonzero_count, 1u);
    // First-layer events can only appear within the 3x3 neighbourhood.
    const TensorF after = ann_forward(net, frame);
    for (std::size_t o = 0; o < after.dim(0); ++o)
        for (std::size_t y = 0; y < 12; ++y)
            for (std::size_t x = 0; x < 12; ++x)
            {
                const bool inside = y + 1 >= 5 && y <= 6 && x + 1 >= 7 && x <= 8;
                EXPECT_TRUE(inside || after(o, y, x) == before(o, y, x));
            }
    EXPECT_LE(s.stats[1].events_out, 2u * 9u);
    EXPECT_LE(s.stats[2].events_out, 6u * 9u);
}
