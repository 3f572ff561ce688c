#include <gtest/gtest.h>

#include <filesystem>

#include "sdmask/cost_model.hpp"
#include "sdmask/error.hpp"
#include "sdmask/image_io.hpp"
#include "sdmask/weights_io.hpp"

using namespace sdmask;

namespace
{

const std::filesystem::path kGolden = std::filesystem::path(SDMASK_TEST_DATA) / "golden";

std::filesystem::path scratch(const std::string &name)
{
    const auto dir = std::filesystem::temp_directory_path() / "sdmask_io_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

TensorF tiny_rgb()
{
    // [3, 2, 3], channel-major
    const float px[6][3] = {{255, 0, 0}, {0, 255, 0}, {0, 0, 255}, {10, 20, 30}, {128, 128, 128}, {0, 0, 0}};
    TensorF t({3, 2, 3});
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t c = 0; c < 3; ++c)
            t(c, i / 3, i % 3) = px[i][c];
    return t;
}

} // namespace

TEST(Ppm, EncodesGoldenBytes)
{
    EXPECT_EQ(encode_ppm(tiny_rgb()), read_file(kGolden / "tiny.ppm"));
}

TEST(Ppm, DecodesGoldenFiles)
{
    EXPECT_EQ(read_ppm(kGolden / "tiny.ppm"), tiny_rgb());
    EXPECT_EQ(read_ppm(kGolden / "tiny_commented.ppm"), tiny_rgb());
    const PnmSize s = read_pnm_size(kGolden / "tiny.ppm");
    EXPECT_EQ(s.width, 3u);
    EXPECT_EQ(s.height, 2u);
}

TEST(Ppm, RoundsAndClamps)
{
    TensorF t({3, 1, 2}, {-4.0F, 300.0F, 2.5F, 3.5F, 0.49F, 254.6F});
    const TensorF back = decode_ppm(encode_ppm(t));
    EXPECT_EQ(back, TensorF({3, 1, 2}, {0.0F, 255.0F, 2.0F, 4.0F, 0.0F, 255.0F}));
}

TEST(Ppm, RejectsMalformed)
{
    EXPECT_THROW((void)decode_ppm("P5\n1 1\n255\nx"), FormatError);
    EXPECT_THROW((void)decode_ppm("P6\n2 2\n255\nabc"), FormatError);
    EXPECT_THROW((void)decode_ppm("P6\n1 1\n65535\nabcdef"), FormatError);
    EXPECT_THROW((void)decode_ppm("P6\n0 1\n255\n"), FormatError);
    EXPECT_THROW((void)decode_ppm(""), FormatError);
    EXPECT_THROW((void)read_ppm("/nonexistent/frame.ppm"), IoError);
}

TEST(Pgm, GoldenRoundTrip)
{
    GrayImage g{4, 3, {}};
    for (int i = 0; i < 12; ++i)
        g.pixels.push_back(static_cast<std::uint8_t>(i * 20));
    EXPECT_EQ(encode_pgm(g), read_file(kGolden / "tiny.pgm"));
    EXPECT_EQ(read_pgm(kGolden / "tiny.pgm"), g);
    const auto path = scratch("tiny.pgm");
    write_pgm(path, g);
    EXPECT_EQ(read_pgm(path), g);
    EXPECT_THROW((void)decode_pgm(read_file(kGolden / "tiny.ppm")), FormatError);
}

TEST(WeightsContainer, MatchesGoldenBytes)
{
    WeightsContainer c;
    c.set("det.0.weight", TensorF({2}, {1.0F, -2.5F}));
    c.set("q", TensorI8({2, 2}, std::vector<std::int8_t>{1, -1, 127, -128}));
    c.set("bias", TensorI32({1}, std::vector<std::int32_t>{-7}));
    const std::string golden = read_file(kGolden / "weights.sdnnw");
    EXPECT_EQ(c.serialize(), golden);
    EXPECT_EQ(golden.substr(0, 7), std::string("SDNNW1\0", 7));

    const WeightsContainer back = WeightsContainer::load(kGolden / "weights.sdnnw");
    ASSERT_EQ(back.entries().size(), 3u);
    EXPECT_EQ(back.entries()[0].first, "det.0.weight");
    EXPECT_EQ(back.get<float>("det.0.weight"), TensorF({2}, {1.0F, -2.5F}));
    EXPECT_EQ(back.get<std::int8_t>("q")[3], -128);
    EXPECT_EQ(back.get<std::int32_t>("bias")[0], -7);
    EXPECT_THROW((void)back.get<float>("q"), FormatError);
    EXPECT_THROW((void)back.at("missing"), FormatError);
}

TEST(WeightsContainer, SetReplacesInPlace)
{
    WeightsContainer c;
    c.set("a", TensorF({1}, {1.0F}));
    c.set("b", TensorF({1}, {2.0F}));
    c.set("a", TensorF({1}, {3.0F}));
    ASSERT_EQ(c.entries().size(), 2u);
    EXPECT_EQ(c.entries()[0].first, "a");
    EXPECT_EQ(c.get<float>("a")[0], 3.0F);
}

TEST(WeightsContainer, RejectsCorruption)
{
    const std::string golden = read_file(kGolden / "weights.sdnnw");
    EXPECT_THROW((void)WeightsContainer::deserialize("SDNNW2" + golden.substr(6)), FormatError);
    for (std::size_t cut = 8; cut < golden.size(); cut += 5)
        EXPECT_THROW((void)WeightsContainer::deserialize(golden.substr(0, cut)), FormatError) << cut;
    std::string bad_dtype = golden;
    bad_dtype[7 + 4 + 12] = 9;
    EXPECT_THROW((void)WeightsContainer::deserialize(bad_dtype), FormatError);
    // A header claiming a huge tensor must fail cleanly.
    std::string huge = golden.substr(0, 7 + 4 + 12 + 1);
    huge += std::string("\x02\x00\x00\x00\xff\xff\xff\x7f\xff\xff\xff\x7f", 12);
    EXPECT_THROW((void)WeightsContainer::deserialize(huge), FormatError);
    EXPECT_THROW((void)WeightsContainer::load("/nonexistent/w.sdnnw"), IoError);
}

TEST(WeightsContainer, FileRoundTrip)
{
    WeightsContainer c;
    c.set("x", TensorF({2, 3}, {0.5F, -0.0F, 1e-30F, 3e30F, -7.25F, 42.0F}));
    const auto path = scratch("w.sdnnw");
    c.save(path);
    const WeightsContainer back = WeightsContainer::load(path);
    EXPECT_EQ(back.serialize(), c.serialize());
}

TEST(Coefficients, FileRoundTrip)
{
    const CostCoefficients c{0.041, 0.1, 1.35, 0.0029, 81.8};
    const auto path = scratch("coeff.json");
    save_coefficients(path, c);
    EXPECT_EQ(load_coefficients(path), c);
    write_file(path, "{\"e_synop_nJ\": 0.1}");
    EXPECT_THROW((void)load_coefficients(path), ConfigError);
}
