// synthetic.hpp - procedural video for tests, demos and calibration
//
// A textured static background with a few solid rectangles drifting at
// constant velocity. Pixels are in [0, 255].
#ifndef SDMASK_SYNTHETIC_HPP_
#define SDMASK_SYNTHETIC_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sdmask/box.hpp"
#include "sdmask/tensor.hpp"

namespace sdmask
{

struct SyntheticVideoOptions
{
    std::size_t width{448};
    std::size_t height{448};
    std::size_t frames{4};
    std::size_t objects{3};
    double max_speed{6.0};   // pixels per frame
    double pan{0.0};         // background scroll, pixels per frame
    double noise{0.0};       // per-pixel gaussian sigma, pixel units
    std::uint64_t seed{1};
};

struct SyntheticFrame
{
    TensorF image;           // [3, height, width]
    std::vector<Box> boxes;  // object extents, clipped to the frame
    std::vector<std::size_t> classes;
};

std::vector<SyntheticFrame> synthetic_video(const SyntheticVideoOptions &options);

} // namespace sdmask

#endif
