#include "sdmask/calibration.hpp"

#include <cmath>

#include "sdmask/synthetic.hpp"

namespace sdmask
{

EventStats run_frames(const Network &net, const std::vector<TensorF> &frames, const std::optional<RegionMask> &mask,
                      const ThresholdOverrides &thresholds)
{
    EventStats stats;
    const auto step_all = [&](auto &sdnn) {
        for (const TensorF &f : frames)
        {
            stats.add_frame(sdnn.step(mask ? apply_mask(f, *mask) : f).stats);
        }
    };
    if (net.quantized())
    {
        Sdnn<std::int32_t> sdnn(net, thresholds);
        step_all(sdnn);
    }
    else
    {
        Sdnn<float> sdnn(net, thresholds);
        step_all(sdnn);
    }
    return stats;
}

std::vector<OperatingPoint> reference_operating_points()
{
    return {{"sdnn", 0.0, 23.01, 2.29}, {"sdnn_masked", 0.58, 17.07, 1.87}};
}

SyntheticCalibration calibrate_on_synthetic(std::uint64_t seed, std::size_t frame_count)
{
    const NetworkConfig config = default_yolo_kp_config();
    SyntheticVideoOptions opt;
    opt.width = config.input;
    opt.height = config.input;
    opt.frames = frame_count;
    opt.pan = 2.0;
    opt.seed = seed + 1;
    const auto video = synthetic_video(opt);
    std::vector<TensorF> frames;
    std::vector<std::vector<Box>> boxes;
    for (const auto &f : video)
    {
        frames.push_back(f.image);
        boxes.push_back(f.boxes);
    }

    NetworkWeights weights = init_network_weights(config, seed);
    weights.quant = calibrate_quantization(config, weights, {frames.front()});
    const Network net(config, std::move(weights));

    const RegionScores scores = aggregate_regions(build_heatmap(boxes, config.input, config.input), kRegionSize);
    SyntheticCalibration out;
    for (const auto &point : reference_operating_points())
    {
        std::optional<RegionMask> mask;
        if (point.frame_sparsity > 0.0)
        {
            mask = static_topk(scores, 1.0 - point.frame_sparsity, kRegionSize);
        }
        const auto w = per_frame_workload(run_frames(net, frames, mask));
        out.targets.push_back(CalibrationTarget{*w, point.energy_mj, point.latency_ms});
    }
    out.result = calibrate(calibration_seeds(), out.targets);
    return out;
}

} // namespace sdmask
