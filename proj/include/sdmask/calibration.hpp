// calibration.hpp - measured workloads and the shipped cost constants
#ifndef SDMASK_CALIBRATION_HPP_
#define SDMASK_CALIBRATION_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdmask/cost_model.hpp"
#include "sdmask/masking.hpp"
#include "sdmask/network.hpp"
#include "sdmask/sdnn.hpp"

namespace sdmask
{

// Runs canvas-sized frames as one sequence through the network in
// sigma-delta form, optionally masked, and returns the event counts.
EventStats run_frames(const Network &net, const std::vector<TensorF> &frames, const std::optional<RegionMask> &mask,
                      const ThresholdOverrides &thresholds = {});

struct OperatingPoint
{
    std::string name;
    double frame_sparsity{0.0};
    double energy_mj{0.0};
    double latency_ms{0.0};
};

// Reference energy/latency pairs the default coefficients are fitted to:
// unmasked and masked (0.58 frame sparsity) detection on driving video.
std::vector<OperatingPoint> reference_operating_points();

struct SyntheticCalibration
{
    std::vector<CalibrationTarget> targets;
    CalibrationResult result;
};

// Measures the default detector (random weights from seed) on synthetic
// video at each reference sparsity and fits the cost coefficients.
SyntheticCalibration calibrate_on_synthetic(std::uint64_t seed = 0, std::size_t frames = 4);

} // namespace sdmask

#endif
