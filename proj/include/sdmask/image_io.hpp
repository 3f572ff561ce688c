// image_io.hpp - binary PPM (P6) and PGM (P5) with maxval 255
#ifndef SDMASK_IMAGE_IO_HPP_
#define SDMASK_IMAGE_IO_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sdmask/tensor.hpp"

namespace sdmask
{

struct GrayImage
{
    std::size_t width{0};
    std::size_t height{0};
    std::vector<std::uint8_t> pixels; // row-major

    bool operator==(const GrayImage &) const = default;
};

struct PnmSize
{
    std::size_t width{0};
    std::size_t height{0};
};

// Header is "P6\n<w> <h>\n255\n". Pixels are rounded half-even and clamped.
std::string encode_ppm(const TensorF &rgb);
std::string encode_pgm(const GrayImage &image);

// Accepts arbitrary whitespace and '#' comments in the header.
TensorF decode_ppm(const std::string &bytes);
GrayImage decode_pgm(const std::string &bytes);

TensorF read_ppm(const std::filesystem::path &path);
GrayImage read_pgm(const std::filesystem::path &path);
PnmSize read_pnm_size(const std::filesystem::path &path);

void write_ppm(const std::filesystem::path &path, const TensorF &rgb);
void write_pgm(const std::filesystem::path &path, const GrayImage &image);

std::string read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, const std::string &bytes);

} // namespace sdmask

#endif
