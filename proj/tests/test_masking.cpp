#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"
#include "sdmask/error.hpp"
#include "sdmask/image_io.hpp"
#include "sdmask/masking.hpp"

using namespace sdmask;

namespace
{

RegionMask random_mask(Rng &rng, std::size_t rows, std::size_t cols, double p_keep = 0.5)
{
    RegionMask m(rows, cols, kRegionSize);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.set(i, rng.coin(p_keep));
    return m;
}

bool subset(const RegionMask &a, const RegionMask &b)
{
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.kept(i) && !b.kept(i))
            return false;
    return true;
}

} // namespace

TEST(Heatmap, SingleBoxCoversTwoByTwo)
{
    const Heatmap h = build_heatmap({{Box{0, 0, 2, 2}}}, 4, 4);
    EXPECT_EQ(h.images, 1u);
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x)
            EXPECT_EQ(h.values(y, x), (y < 2 && x < 2) ? 1 : 0);
}

TEST(Heatmap, OverlappingBoxesCountImagesOnce)
{
    const Heatmap h = build_heatmap({{Box{0, 0, 3, 3}, Box{1, 1, 4, 4}}, {Box{1, 1, 2, 2}}}, 4, 4);
    EXPECT_EQ(h.values(1, 1), 2);
    EXPECT_EQ(h.values(0, 0), 1);
    EXPECT_EQ(h.values(3, 3), 1);
}

TEST(Heatmap, ClipsAndIgnoresDegenerate)
{
    const Heatmap h = build_heatmap({{Box{-5, -5, 1, 1}, Box{2, 2, 2, 3}, Box{3.5, 3.5, 10, 10}}}, 4, 4);
    EXPECT_EQ(h.values(0, 0), 1);
    EXPECT_EQ(h.values(3, 3), 1);
    EXPECT_EQ(h.values(2, 2), 0);
    std::int64_t total = 0;
    for (const auto v : h.values.data())
        total += v;
    EXPECT_EQ(total, 2);
}

TEST(Heatmap, MatchesPerPixelRasterisation)
{
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial)
    {
        std::vector<std::vector<Box>> ann(3);
        for (auto &img : ann)
            for (int b = 0; b < 3; ++b)
            {
                const double x = rng.uniform(-4, 36), y = rng.uniform(-4, 36);
                img.push_back(Box{x, y, x + rng.uniform(0, 12), y + rng.uniform(0, 12)});
            }
        const Heatmap h = build_heatmap(ann, 32, 32);
        for (std::size_t y = 0; y < 32; ++y)
            for (std::size_t x = 0; x < 32; ++x)
            {
                int expect = 0;
                for (const auto &img : ann)
                {
                    bool hit = false;
                    for (const auto &b : img)
                        hit = hit || intersection_area(b, Box{double(x), double(y), x + 1.0, y + 1.0}) > 0.0;
                    expect += hit;
                }
                ASSERT_EQ(h.values(y, x), expect);
            }
    }
}

TEST(AggregateRegions, UniformOnes)
{
    Heatmap h{TensorI32({448, 448}, 1), 1};
    const RegionScores s = aggregate_regions(h, 16);
    EXPECT_EQ(s.shape(), (Shape{28, 28}));
    for (const float v : s.data())
        EXPECT_EQ(v, 256.0F);
}

TEST(AggregateRegions, BlockSums)
{
    Rng rng(2);
    Heatmap h{TensorI32({64, 48}), 1};
    for (auto &v : h.values.data())
        v = static_cast<std::int32_t>(rng.below(10));
    const RegionScores s = aggregate_regions(h, 16);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 3; ++c)
        {
            std::int64_t sum = 0;
            for (std::size_t y = 0; y < 16; ++y)
                for (std::size_t x = 0; x < 16; ++x)
                    sum += h.values(r * 16 + y, c * 16 + x);
            EXPECT_EQ(s(r, c), static_cast<float>(sum));
        }
    EXPECT_THROW((void)aggregate_regions(h, 10), ConfigError);
}

TEST(KeepCount, RoundsHalfUpAndClamps)
{
    EXPECT_EQ(keep_count(0.5, 3), 2u);
    EXPECT_EQ(keep_count(0.25, 2), 1u);
    EXPECT_EQ(keep_count(0.2, 784), 157u);
    EXPECT_EQ(keep_count(0.001, 10), 1u);
    EXPECT_EQ(keep_count(1.0, 784), 784u);
}

TEST(StaticTopk, Examples)
{
    const TensorF s({2, 2}, {4, 1, 3, 2});
    const RegionMask m = static_topk(s, 0.5);
    EXPECT_TRUE(m.kept(0, 0));
    EXPECT_TRUE(m.kept(1, 0));
    EXPECT_EQ(m.kept_count(), 2u);

    const RegionMask tie = static_topk(TensorF({2, 2}, 7.0F), 0.25);
    EXPECT_TRUE(tie.kept(0, 0));
    EXPECT_EQ(tie.kept_count(), 1u);

    EXPECT_EQ(static_topk(s, 1.0).kept_count(), 4u);
}

TEST(StaticTopk, MatchesFullSort)
{
    Rng rng(3);
    for (int trial = 0; trial < 300; ++trial)
    {
        const TensorF s = oracle::random_integer_tensor(rng, {28, 28}, 0, 5);
        const double ks = rng.uniform(0.01, 1.0);
        ASSERT_EQ(static_topk(s, ks), oracle::brute_topk(s, keep_count(ks, 784), 16));
    }
}

TEST(StaticTopk, SparsityFormula)
{
    Rng rng(4);
    for (const double ks : {0.2, 0.42, 0.5, 0.999, 1.0})
    {
        const RegionMask m = static_topk(oracle::random_tensor(rng, {28, 28}), ks);
        const double r = std::floor(ks * 784 + 0.5);
        EXPECT_DOUBLE_EQ(m.sparsity(), 1.0 - r / 784.0);
    }
}

TEST(DynamicMask, Examples)
{
    const RegionMask m = dynamic_mask(TensorF({1, 2}, {0.0F, -5.0F}), 0.1);
    EXPECT_TRUE(m.kept(0, 0));
    EXPECT_FALSE(m.kept(0, 1));
    EXPECT_NEAR(sigmoid(-5.0), 0.0066928509, 1e-9);
    Rng rng(5);
    const TensorF logits = oracle::random_tensor(rng, {14, 14}, -30, 30);
    EXPECT_EQ(dynamic_mask(logits, 1e-15).kept_count(), 196u);
}

TEST(Combine, Identities)
{
    Rng rng(6);
    const RegionMask d = random_mask(rng, 28, 28);
    EXPECT_EQ(combine(RegionMask(28, 28, 16), d), d);
    EXPECT_EQ(combine(RegionMask(28, 28, 16, true), d).kept_count(), 784u);
    EXPECT_THROW((void)combine(RegionMask(28, 28, 16), RegionMask(14, 14, 32)), ConfigError);
}

TEST(Combine, TruthTable)
{
    Rng rng(7);
    const RegionMask a = random_mask(rng, 28, 28);
    const RegionMask b = random_mask(rng, 28, 28);
    const RegionMask u = combine(a, b);
    for (std::size_t i = 0; i < u.size(); ++i)
        EXPECT_EQ(u.kept(i), a.kept(i) || b.kept(i));
    EXPECT_TRUE(subset(a, u));
    EXPECT_TRUE(subset(b, u));
}

TEST(RefineMask, SplitsEachRegion)
{
    RegionMask m(2, 2, 32);
    m.set(0, 1, true);
    const RegionMask f = refine_mask(m, 16);
    EXPECT_EQ(f.rows(), 4u);
    EXPECT_EQ(f.region_size(), 16u);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            EXPECT_EQ(f.kept(r, c), r < 2 && c >= 2);
    EXPECT_THROW((void)refine_mask(m, 12), ConfigError);
}

TEST(ApplyMask, Identities)
{
    Rng rng(8);
    const TensorF f = oracle::random_tensor(rng, {3, 64, 64}, 1, 255);
    EXPECT_EQ(apply_mask(f, RegionMask(4, 4, 16, true)), f);
    EXPECT_EQ(apply_mask(f, RegionMask(4, 4, 16)).count_nonzero(), 0u);
    EXPECT_THROW((void)apply_mask(f, RegionMask(3, 4, 16)), ConfigError);
}

TEST(ApplyMask, CheckerboardPerPixel)
{
    Rng rng(9);
    const TensorF f = oracle::random_tensor(rng, {3, 448, 448}, 1, 255);
    RegionMask m(28, 28, 16);
    for (std::size_t r = 0; r < 28; ++r)
        for (std::size_t c = 0; c < 28; ++c)
            m.set(r, c, (r + c) % 2 == 0);
    const TensorF out = apply_mask(f, m);
    for (std::size_t ch = 0; ch < 3; ++ch)
        for (std::size_t y = 0; y < 448; ++y)
            for (std::size_t x = 0; x < 448; ++x)
                ASSERT_EQ(out(ch, y, x), ((y / 16 + x / 16) % 2 == 0) ? f(ch, y, x) : 0.0F);
}

TEST(RegionLabels, Examples)
{
    const LetterboxTransform id = letterbox_transform(448, 448, 448);
    const RegionMask exact = region_labels({Box{16, 32, 32, 48}}, 28, 28, 16, id);
    EXPECT_EQ(exact.kept_count(), 1u);
    EXPECT_TRUE(exact.kept(2, 1));

    const RegionMask one_pixel = region_labels({Box{0, 0, 17, 16}}, 28, 28, 16, id);
    EXPECT_EQ(one_pixel.kept_count(), 2u);
    EXPECT_TRUE(one_pixel.kept(0, 1));

    EXPECT_EQ(region_labels({}, 28, 28, 16, id).kept_count(), 0u);
    // Touching edges only: zero overlap area.
    EXPECT_EQ(region_labels({Box{0, 0, 16, 16}}, 28, 28, 16, id).kept_count(), 1u);
}

TEST(RegionLabels, MatchesRasterisationThroughLetterbox)
{
    Rng rng(10);
    const LetterboxTransform t = letterbox_transform(1242, 375, 448);
    for (int trial = 0; trial < 30; ++trial)
    {
        std::vector<Box> boxes;
        std::vector<Box> canvas;
        for (int i = 0; i < 4; ++i)
        {
            const double x = rng.uniform(-50, 1250), y = rng.uniform(-20, 380);
            const Box b{x, y, x + rng.uniform(0.2, 200), y + rng.uniform(0.2, 100)};
            boxes.push_back(b);
            canvas.push_back(Box{t.to_canvas_x(b.x1), t.to_canvas_y(b.y1), t.to_canvas_x(b.x2), t.to_canvas_y(b.y2)});
        }
        ASSERT_EQ(region_labels(boxes, 28, 28, 16, t), oracle::rasterized_labels(canvas, 28, 28, 16));
    }
}

TEST(MaskMonotonicity, KeepRateAndThreshold)
{
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial)
    {
        const TensorF s = oracle::random_integer_tensor(rng, {28, 28}, 0, 3);
        const double a = rng.uniform(0.01, 1.0), b = rng.uniform(0.01, 1.0);
        ASSERT_TRUE(subset(static_topk(s, std::min(a, b)), static_topk(s, std::max(a, b))));
        const TensorF l = oracle::random_tensor(rng, {14, 14}, -4, 4);
        const double t1 = rng.uniform(0.01, 0.99), t2 = rng.uniform(0.01, 0.99);
        ASSERT_TRUE(subset(dynamic_mask(l, std::max(t1, t2)), dynamic_mask(l, std::min(t1, t2))));
    }
}

TEST(StaticMaskArtifact, RoundTrip)
{
    Rng rng(12);
    const auto dir = std::filesystem::temp_directory_path() / "sdmask_mask_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "static.pgm";
    StaticMaskArtifact a{random_mask(rng, 28, 28), 0.42, "train.jsonl"};
    save_static_mask(path, a);
    EXPECT_TRUE(std::filesystem::exists(dir / "static.json"));
    const StaticMaskArtifact b = load_static_mask(path);
    EXPECT_EQ(b.mask, a.mask);
    EXPECT_EQ(b.keep_rate, 0.42);
    EXPECT_EQ(b.source_manifest, "train.jsonl");
    const GrayImage img = read_pgm(path);
    EXPECT_EQ(img.pixels[0], a.mask.kept(0) ? 255 : 0);

    GrayImage bad = img;
    bad.pixels[3] = 7;
    write_pgm(path, bad);
    EXPECT_THROW((void)load_static_mask(path), FormatError);
    std::filesystem::remove_all(dir);
}
