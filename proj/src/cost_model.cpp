#include "sdmask/cost_model.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <json.hpp>

#include "sdmask/error.hpp"
#include "sdmask/image_io.hpp"

namespace sdmask
{

void CostCoefficients::validate() const
{
    for (const double v : {e_synop_nj, e_event_nj, e_static_nj, t_synop_ns, t_layer_us})
    {
        if (!std::isfinite(v) || v < 0.0)
        {
            throw ConfigError("cost coefficients must be finite and nonnegative");
        }
    }
}

std::string coefficients_to_json(const CostCoefficients &c)
{
    nlohmann::ordered_json j;
    j["e_synop_nJ"] = c.e_synop_nj;
    j["e_event_nJ"] = c.e_event_nj;
    j["e_static_nJ"] = c.e_static_nj;
    j["t_synop_ns"] = c.t_synop_ns;
    j["t_layer_us"] = c.t_layer_us;
    return j.dump(2) + "\n";
}

CostCoefficients parse_coefficients(const std::string &json_text)
{
    CostCoefficients c;
    try
    {
        const auto j = nlohmann::json::parse(json_text);
        c.e_synop_nj = j.at("e_synop_nJ").get<double>();
        c.e_event_nj = j.at("e_event_nJ").get<double>();
        c.e_static_nj = j.at("e_static_nJ").get<double>();
        c.t_synop_ns = j.at("t_synop_ns").get<double>();
        c.t_layer_us = j.at("t_layer_us").get<double>();
    }
    catch (const nlohmann::json::exception &e)
    {
        throw ConfigError(std::string("coefficients: ") + e.what());
    }
    c.validate();
    return c;
}

CostCoefficients load_coefficients(const std::filesystem::path &path)
{
    try
    {
        return parse_coefficients(read_file(path));
    }
    catch (const ConfigError &e)
    {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void save_coefficients(const std::filesystem::path &path, const CostCoefficients &c)
{
    write_file(path, coefficients_to_json(c));
}

CostCoefficients calibration_seeds()
{
    return CostCoefficients{0.02, 0.1, 1.0, 0.005, 50.0};
}

CostCoefficients default_coefficients()
{
    // Output of calibrate_on_synthetic(0, 4).
    return CostCoefficients{0.041250022101236045, 0.10088793889582566, 1.3494314634033666, 0.002936525203853231,
                            81.83228740428629};
}

std::optional<Workload> per_frame_workload(const EventStats &stats)
{
    if (stats.frames() == 0)
    {
        return std::nullopt;
    }
    const double frames = static_cast<double>(stats.frames());
    Workload w;
    w.synops = static_cast<double>(stats.total_synops()) / frames;
    w.events = static_cast<double>(stats.total_events()) / frames;
    w.neurons = static_cast<double>(stats.total_neurons());
    w.layers = static_cast<double>(stats.layers().size());
    w.dense_macs = static_cast<double>(stats.total_dense_macs());
    return w;
}

double energy_mj(const Workload &w, const CostCoefficients &c)
{
    const double nj = w.synops * c.e_synop_nj + w.events * c.e_event_nj + w.neurons * c.e_static_nj;
    return nj * 1e-6;
}

double latency_ms(const Workload &w, const CostCoefficients &c)
{
    return w.layers * c.t_layer_us * 1e-3 + w.synops * c.t_synop_ns * 1e-6;
}

double edp(double energy_mj, double latency_ms)
{
    return energy_mj * latency_ms;
}

double throughput_fps(double latency_ms)
{
    if (!(latency_ms > 0.0))
    {
        throw ConfigError("throughput: latency must be positive");
    }
    return 1000.0 / latency_ms;
}

double gops_per_watt(double dense_macs, double energy_mj)
{
    if (!(energy_mj > 0.0))
    {
        throw ConfigError("gops_per_watt: energy must be positive");
    }
    return 2.0 * dense_macs / (energy_mj * 1e-3) / 1e9;
}

std::optional<CostReport> cost_report(const EventStats &stats, const CostCoefficients &c)
{
    const auto w = per_frame_workload(stats);
    if (!w)
    {
        return std::nullopt;
    }
    CostReport r;
    r.energy_mj = energy_mj(*w, c);
    r.latency_ms = latency_ms(*w, c);
    r.throughput_fps = throughput_fps(r.latency_ms);
    r.edp_ujs = edp(r.energy_mj, r.latency_ms);
    r.gops_per_watt = gops_per_watt(w->dense_macs, r.energy_mj);
    return r;
}

namespace
{

struct Fit
{
    Eigen::VectorXd coefficients;
    std::size_t rank{0};
    Eigen::VectorXd residuals;
};

// Solves A * (seed .* (1 + u)) ~= y for the minimum-norm u with every
// coefficient kept nonnegative. Each subset of coefficients pinned at zero
// is tried; the feasible candidate with the smallest residual wins, then
// the one closest to the seeds.
Fit fit_relative(const Eigen::MatrixXd &a, const Eigen::VectorXd &seed, const Eigen::VectorXd &y)
{
    const Eigen::Index n = seed.size();
    Fit best;
    best.rank = static_cast<std::size_t>(
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(a * seed.asDiagonal()).rank());
    double best_residual = 0.0;
    double best_change = 0.0;
    bool found = false;
    const double scale = std::max(1.0, y.norm());
    for (unsigned pinned = 0; pinned < (1U << n); ++pinned)
    {
        Eigen::VectorXd s = seed;
        for (Eigen::Index j = 0; j < n; ++j)
        {
            if ((pinned >> j) & 1U)
            {
                s(j) = 0.0;
            }
        }
        const Eigen::MatrixXd scaled = a * s.asDiagonal();
        const Eigen::VectorXd u =
            Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(scaled).solve(y - a * s);
        const Eigen::VectorXd c = s.cwiseProduct(Eigen::VectorXd::Ones(n) + u);
        if ((c.array() < 0.0).any())
        {
            continue;
        }
        const Eigen::VectorXd r = a * c - y;
        Eigen::VectorXd change(n);
        for (Eigen::Index j = 0; j < n; ++j)
        {
            change(j) = seed(j) > 0.0 ? c(j) / seed(j) - 1.0 : 0.0;
        }
        const double rn = r.norm();
        const double cn = change.norm();
        const double tol = 1e-9 * scale;
        if (!found || rn < best_residual - tol || (rn <= best_residual + tol && cn < best_change))
        {
            found = true;
            best_residual = rn;
            best_change = cn;
            best.coefficients = c;
            best.residuals = r;
        }
    }
    return best;
}

} // namespace

CalibrationResult calibrate(const CostCoefficients &seeds, const std::vector<CalibrationTarget> &targets)
{
    seeds.validate();
    if (targets.empty())
    {
        throw ConfigError("calibrate: no targets");
    }
    const auto n = static_cast<Eigen::Index>(targets.size());
    // Rows in mJ and ms so that coefficients come out in their own units.
    Eigen::MatrixXd ea(n, 3);
    Eigen::VectorXd ey(n);
    Eigen::MatrixXd la(n, 2);
    Eigen::VectorXd ly(n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        const auto &t = targets[static_cast<std::size_t>(i)];
        ea(i, 0) = t.workload.synops * 1e-6;
        ea(i, 1) = t.workload.events * 1e-6;
        ea(i, 2) = t.workload.neurons * 1e-6;
        ey(i) = t.energy_mj;
        la(i, 0) = t.workload.synops * 1e-6;
        la(i, 1) = t.workload.layers * 1e-3;
        ly(i) = t.latency_ms;
    }
    const Fit e = fit_relative(ea, Eigen::Vector3d(seeds.e_synop_nj, seeds.e_event_nj, seeds.e_static_nj), ey);
    const Fit l = fit_relative(la, Eigen::Vector2d(seeds.t_synop_ns, seeds.t_layer_us), ly);

    CalibrationResult r;
    r.coefficients = CostCoefficients{e.coefficients(0), e.coefficients(1), e.coefficients(2), l.coefficients(0),
                                      l.coefficients(1)};
    r.energy_rank = e.rank;
    r.latency_rank = l.rank;
    r.rank_deficient = e.rank < 3 || l.rank < 2;
    r.energy_residuals_mj.assign(e.residuals.data(), e.residuals.data() + e.residuals.size());
    r.latency_residuals_ms.assign(l.residuals.data(), l.residuals.data() + l.residuals.size());
    return r;
}

} // namespace sdmask
