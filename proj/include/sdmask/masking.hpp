// masking.hpp - static, dynamic and combined region masks
//
// Frames are split into p x p regions. A static mask keeps the regions where
// training-set objects were most frequent; a dynamic mask keeps regions the
// attention scorer (see mgnet.hpp) rates above a threshold; the two are
// combined by union and applied by zeroing the skipped regions.
#ifndef SDMASK_MASKING_HPP_
#define SDMASK_MASKING_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sdmask/box.hpp"
#include "sdmask/tensor.hpp"
#include "sdmask/tensor_ops.hpp"

namespace sdmask
{

inline constexpr std::size_t kRegionSize = 16;

// Per-pixel count of training images with an object at that pixel.
struct Heatmap
{
    TensorI32 values; // [H, W]
    std::size_t images{0};
};

// Boolean keep/skip grid over p x p regions, row-major.
class RegionMask
{
public:
    RegionMask() = default;
    RegionMask(std::size_t rows, std::size_t cols, std::size_t region_size, bool fill = false);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t region_size() const noexcept { return region_size_; }
    [[nodiscard]] std::size_t size() const noexcept { return keep_.size(); }

    [[nodiscard]] bool kept(std::size_t r, std::size_t c) const { return keep_[r * cols_ + c] != 0; }
    [[nodiscard]] bool kept(std::size_t index) const { return keep_[index] != 0; }
    void set(std::size_t r, std::size_t c, bool keep) { keep_[r * cols_ + c] = keep ? 1 : 0; }
    void set(std::size_t index, bool keep) { keep_[index] = keep ? 1 : 0; }

    [[nodiscard]] std::size_t kept_count() const;
    // Fraction of skipped regions.
    [[nodiscard]] double sparsity() const;

    bool operator==(const RegionMask &) const = default;

private:
    std::size_t rows_{0};
    std::size_t cols_{0};
    std::size_t region_size_{kRegionSize};
    std::vector<std::uint8_t> keep_;
};

// Region scores or logits, [rows, cols].
using RegionScores = TensorF;

// Boxes are clipped to the map; zero-area boxes are ignored.
Heatmap build_heatmap(const std::vector<std::vector<Box>> &annotations, std::size_t height, std::size_t width);

RegionScores aggregate_regions(const Heatmap &heatmap, std::size_t region_size);

// round-half-up(k_s * total), clamped to [1, total].
std::size_t keep_count(double keep_rate, std::size_t total);

// Keeps the highest-scoring regions; equal scores prefer the lower
// row-major index.
RegionMask static_topk(const RegionScores &scores, double keep_rate, std::size_t region_size = kRegionSize);

double sigmoid(double x);

// Keeps regions with sigmoid(logit) >= t_reg.
RegionMask dynamic_mask(const RegionScores &logits, double region_threshold,
                        std::size_t region_size = kRegionSize);

RegionMask combine(const RegionMask &a, const RegionMask &b);

// Re-expresses a mask on a finer grid covering the same pixels; the old
// region size must be a multiple of the new one.
RegionMask refine_mask(const RegionMask &mask, std::size_t region_size);

// Zeroes every pixel of a [C,H,W] frame that lies in a skipped region.
TensorF apply_mask(const TensorF &frame, const RegionMask &mask);

// Ground-truth region labels: a region is set when its pixel block overlaps
// any transformed box with positive area.
RegionMask region_labels(const std::vector<Box> &boxes, std::size_t rows, std::size_t cols,
                         std::size_t region_size, const LetterboxTransform &transform);

// Static mask artifact: a P5 PGM with 255 = keep, 0 = skip, plus a JSON
// sidecar (same stem, .json) holding {p, k_s, source_manifest}.
struct StaticMaskArtifact
{
    RegionMask mask;
    double keep_rate{0.0};
    std::string source_manifest;
};

std::filesystem::path static_mask_sidecar_path(const std::filesystem::path &pgm_path);
void save_static_mask(const std::filesystem::path &pgm_path, const StaticMaskArtifact &artifact);
StaticMaskArtifact load_static_mask(const std::filesystem::path &pgm_path);

} // namespace sdmask

#endif
