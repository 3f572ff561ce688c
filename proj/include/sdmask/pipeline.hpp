// pipeline.hpp - end-to-end runs over a manifest
//
// Per sequence the sigma-delta states start fresh; per frame the image is
// letterboxed onto the canvas, masked according to the mode, pushed through
// the sigma-delta detector and decoded. Sequences may run on several
// workers; results are always reduced in manifest order.
#ifndef SDMASK_PIPELINE_HPP_
#define SDMASK_PIPELINE_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sdmask/cost_model.hpp"
#include "sdmask/detection.hpp"
#include "sdmask/event_stats.hpp"
#include "sdmask/image_io.hpp"
#include "sdmask/manifest.hpp"
#include "sdmask/masking.hpp"
#include "sdmask/mgnet.hpp"
#include "sdmask/network.hpp"
#include "sdmask/sdnn.hpp"

namespace sdmask
{

enum class MaskMode : std::uint8_t
{
    none,
    static_only,
    dynamic_only,
    combined,
};

std::string mask_mode_name(MaskMode mode);
MaskMode parse_mask_mode(const std::string &name);

// Produces the per-frame keep grid on the canvas at kRegionSize.
class MaskGenerator
{
public:
    MaskGenerator(MaskMode mode, std::size_t canvas, std::optional<RegionMask> static_mask,
                  std::optional<MGNetParams> mgnet, double region_threshold);

    [[nodiscard]] MaskMode mode() const noexcept { return mode_; }
    // Dynamic part alone, refined to kRegionSize; requires MGNet params.
    [[nodiscard]] RegionMask dynamic_part(const TensorF &canvas) const;
    [[nodiscard]] RegionMask operator()(const TensorF &canvas) const;

private:
    MaskMode mode_;
    std::size_t canvas_;
    std::optional<RegionMask> static_mask_;
    std::optional<MGNetParams> mgnet_;
    double region_threshold_;
};

// MGNet input: the canvas averaged down 2x and scaled to [0, 1].
TensorF mgnet_input(const TensorF &canvas);

Box to_canvas(const Box &box, const LetterboxTransform &transform);

// |events| per pixel (largest over channels), scaled so the largest maps
// to 255; any nonzero magnitude stays at least 1.
template <typename T> GrayImage delta_image(const Tensor<T> &events);

struct RunConfig
{
    MaskMode mode{MaskMode::none};
    double keep_rate{0.2};
    double region_threshold{0.1};
    ThresholdOverrides thresholds;
    CostCoefficients coefficients{default_coefficients()};
    double conf_thresh{0.05};
    std::optional<Split> split;
    std::size_t jobs{1};
    // Frames whose delta dumps are retained, by (seq_id, frame_index).
    std::set<std::pair<std::string, std::int64_t>> dump_frames;

    void validate() const;
};

struct DeltaDump
{
    std::string seq_id;
    std::int64_t frame_index{0};
    TensorF input;  // letterboxed canvas
    TensorF masked;
    GrayImage delta;
};

struct FrameResult
{
    std::string seq_id;
    std::int64_t frame_index{0};
    std::vector<Detection> detections;
    std::vector<GroundTruth> ground_truth; // canvas coordinates
    double sparsity{0.0};
    std::uint64_t input_events{0};
};

struct RunResult
{
    MaskMode mode{MaskMode::none};
    EventStats stats;
    std::vector<FrameResult> frames;
    std::optional<double> frame_sparsity;          // mean over frames
    std::optional<double> frame_sparsity_seq_mean; // mean of per-sequence means
    std::optional<double> miou;
    std::optional<double> map50;
    std::optional<CostReport> cost;
    std::vector<DeltaDump> dumps;
    // Set when a sequence failed; results cover the sequences before it.
    std::optional<std::string> error;
};

struct RunInputs
{
    const Network *network{nullptr};
    std::optional<RegionMask> static_mask{};
    std::optional<MGNetParams> mgnet{};
};

RunResult run_pipeline(const std::vector<Sequence> &sequences, const RunInputs &inputs, const RunConfig &config);

// Heatmap of the canvas-mapped boxes of every given frame, reduced to
// regions and cut to the top keep_rate share.
RegionMask build_static_mask(const std::vector<Sequence> &sequences, double keep_rate,
                             std::size_t canvas = 448, std::size_t region_size = kRegionSize);

// Class-token attention features and region labels on the MGNet grid.
HeadDataset head_dataset_from(const std::vector<Sequence> &sequences, const MGNetParams &params,
                              std::size_t canvas = 448);

} // namespace sdmask

#endif
