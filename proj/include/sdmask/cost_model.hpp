// cost_model.hpp - energy, latency and derived figures from event counts
//
// Per frame, with counts averaged over the run:
//   energy  = sum_l synops*e_synop + events_out*e_event + neurons*e_static
//   latency = sum_l t_layer + synops*t_synop        (fall-through, additive)
// Energy coefficients are in nJ, t_synop in ns, t_layer in us.
#ifndef SDMASK_COST_MODEL_HPP_
#define SDMASK_COST_MODEL_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdmask/event_stats.hpp"

namespace sdmask
{

struct CostCoefficients
{
    double e_synop_nj{0.0};
    double e_event_nj{0.0};
    double e_static_nj{0.0};
    double t_synop_ns{0.0};
    double t_layer_us{0.0};

    // Throws ConfigError on a negative or non-finite coefficient.
    void validate() const;
    bool operator==(const CostCoefficients &) const = default;
};

std::string coefficients_to_json(const CostCoefficients &c);
CostCoefficients parse_coefficients(const std::string &json_text);
CostCoefficients load_coefficients(const std::filesystem::path &path);
void save_coefficients(const std::filesystem::path &path, const CostCoefficients &c);

// Starting point for calibration.
CostCoefficients calibration_seeds();

// Fitted to the SDNN and masked (static + dynamic) KITTI operating points,
// 23.01 mJ / 2.29 ms and 17.07 mJ / 1.87 ms, using synthetic runs of the
// default detector. Model constants only.
CostCoefficients default_coefficients();

// Per-frame workload, summed over layers.
struct Workload
{
    double synops{0.0};
    double events{0.0};
    double neurons{0.0};
    double layers{0.0};
    double dense_macs{0.0};

    bool operator==(const Workload &) const = default;
};

// nullopt for a run with no frames.
std::optional<Workload> per_frame_workload(const EventStats &stats);

double energy_mj(const Workload &w, const CostCoefficients &c);
double latency_ms(const Workload &w, const CostCoefficients &c);
// mJ x ms = uJ s.
double edp(double energy_mj, double latency_ms);
double throughput_fps(double latency_ms);
// Dense-equivalent ops (2 per MAC) per joule, in GOPS/W.
double gops_per_watt(double dense_macs, double energy_mj);

struct CostReport
{
    double energy_mj{0.0};
    double latency_ms{0.0};
    double throughput_fps{0.0};
    double edp_ujs{0.0};
    double gops_per_watt{0.0};
};

std::optional<CostReport> cost_report(const EventStats &stats, const CostCoefficients &c);

struct CalibrationTarget
{
    Workload workload;
    double energy_mj{0.0};
    double latency_ms{0.0};
};

struct CalibrationResult
{
    CostCoefficients coefficients;
    std::size_t energy_rank{0};
    std::size_t latency_rank{0};
    bool rank_deficient{false};
    std::vector<double> energy_residuals_mj;
    std::vector<double> latency_residuals_ms;
};

// Least-squares fit of the energy and latency coefficients, all kept
// nonnegative. Each coefficient is written as seed * (1 + u); when the
// targets do not pin all of them down, the smallest relative change from
// the seeds is chosen. Ranks are those of the unconstrained systems.
CalibrationResult calibrate(const CostCoefficients &seeds, const std::vector<CalibrationTarget> &targets);

} // namespace sdmask

#endif
