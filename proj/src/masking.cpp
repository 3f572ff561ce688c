#include "sdmask/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "sdmask/image_io.hpp"

namespace sdmask
{

RegionMask::RegionMask(std::size_t rows, std::size_t cols, std::size_t region_size, bool fill)
    : rows_(rows), cols_(cols), region_size_(region_size), keep_(rows * cols, fill ? 1 : 0)
{
    if (rows == 0 || cols == 0 || region_size == 0)
    {
        throw ConfigError("region mask needs positive extents");
    }
}

std::size_t RegionMask::kept_count() const
{
    return static_cast<std::size_t>(std::count(keep_.begin(), keep_.end(), std::uint8_t{1}));
}

double RegionMask::sparsity() const
{
    return keep_.empty() ? 0.0 : 1.0 - static_cast<double>(kept_count()) / static_cast<double>(keep_.size());
}

namespace
{

// Half-open range of unit cells overlapping [lo, hi) with positive length,
// clipped to [0, extent).
std::pair<std::size_t, std::size_t> covered_cells(double lo, double hi, std::size_t extent)
{
    lo = std::max(lo, 0.0);
    hi = std::min(hi, static_cast<double>(extent));
    if (!(hi > lo))
    {
        return {0, 0};
    }
    return {static_cast<std::size_t>(std::floor(lo)), static_cast<std::size_t>(std::ceil(hi))};
}

} // namespace

Heatmap build_heatmap(const std::vector<std::vector<Box>> &annotations, std::size_t height, std::size_t width)
{
    Heatmap h{TensorI32({height, width}), annotations.size()};
    std::vector<std::uint8_t> marked(height * width);
    for (const auto &boxes : annotations)
    {
        std::fill(marked.begin(), marked.end(), 0);
        for (const Box &b : boxes)
        {
            if (b.degenerate())
            {
                continue;
            }
            const auto [y0, y1] = covered_cells(b.y1, b.y2, height);
            const auto [x0, x1] = covered_cells(b.x1, b.x2, width);
            for (std::size_t y = y0; y < y1; ++y)
            {
                std::fill(marked.begin() + static_cast<std::ptrdiff_t>(y * width + x0),
                          marked.begin() + static_cast<std::ptrdiff_t>(y * width + x1), 1);
            }
        }
        for (std::size_t i = 0; i < marked.size(); ++i)
        {
            h.values[i] += marked[i];
        }
    }
    return h;
}

RegionScores aggregate_regions(const Heatmap &heatmap, std::size_t region_size)
{
    const auto &v = heatmap.values;
    if (v.rank() != 2 || region_size == 0 || v.dim(0) % region_size != 0 || v.dim(1) % region_size != 0)
    {
        throw ConfigError("aggregate_regions: region size " + std::to_string(region_size) + " does not divide " +
                          shape_to_string(v.shape()));
    }
    const std::size_t rows = v.dim(0) / region_size;
    const std::size_t cols = v.dim(1) / region_size;
    RegionScores scores({rows, cols});
    std::vector<std::int64_t> sums(rows * cols);
    for (std::size_t y = 0; y < v.dim(0); ++y)
    {
        for (std::size_t x = 0; x < v.dim(1); ++x)
        {
            sums[(y / region_size) * cols + x / region_size] += v(y, x);
        }
    }
    for (std::size_t i = 0; i < sums.size(); ++i)
    {
        scores[i] = static_cast<float>(sums[i]);
    }
    return scores;
}

std::size_t keep_count(double keep_rate, std::size_t total)
{
    const double raw = std::floor(keep_rate * static_cast<double>(total) + 0.5);
    return std::clamp<std::size_t>(raw > 0.0 ? static_cast<std::size_t>(raw) : 0, 1, total);
}

RegionMask static_topk(const RegionScores &scores, double keep_rate, std::size_t region_size)
{
    if (scores.rank() != 2)
    {
        throw ConfigError("static_topk expects [rows, cols] scores");
    }
    const std::size_t total = scores.size();
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    RegionMask mask(scores.dim(0), scores.dim(1), region_size);
    const std::size_t keep = keep_count(keep_rate, total);
    for (std::size_t i = 0; i < keep; ++i)
    {
        mask.set(order[i], true);
    }
    return mask;
}

double sigmoid(double x)
{
    if (x >= 0.0)
    {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

RegionMask dynamic_mask(const RegionScores &logits, double region_threshold, std::size_t region_size)
{
    if (logits.rank() != 2)
    {
        throw ConfigError("dynamic_mask expects [rows, cols] logits");
    }
    RegionMask mask(logits.dim(0), logits.dim(1), region_size);
    for (std::size_t i = 0; i < logits.size(); ++i)
    {
        mask.set(i, sigmoid(static_cast<double>(logits[i])) >= region_threshold);
    }
    return mask;
}

RegionMask combine(const RegionMask &a, const RegionMask &b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.region_size() != b.region_size())
    {
        throw ConfigError("combine: masks differ in grid shape or region size");
    }
    RegionMask out(a.rows(), a.cols(), a.region_size());
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        out.set(i, a.kept(i) || b.kept(i));
    }
    return out;
}

RegionMask refine_mask(const RegionMask &mask, std::size_t region_size)
{
    if (region_size == 0 || mask.region_size() % region_size != 0)
    {
        throw ConfigError("refine_mask: region size " + std::to_string(mask.region_size()) + " is not a multiple of " +
                          std::to_string(region_size));
    }
    const std::size_t f = mask.region_size() / region_size;
    RegionMask out(mask.rows() * f, mask.cols() * f, region_size);
    for (std::size_t r = 0; r < out.rows(); ++r)
    {
        for (std::size_t c = 0; c < out.cols(); ++c)
        {
            out.set(r, c, mask.kept(r / f, c / f));
        }
    }
    return out;
}

TensorF apply_mask(const TensorF &frame, const RegionMask &mask)
{
    const std::size_t p = mask.region_size();
    if (frame.rank() != 3 || frame.dim(1) != mask.rows() * p || frame.dim(2) != mask.cols() * p)
    {
        throw ConfigError("apply_mask: frame " + shape_to_string(frame.shape()) + " does not match a " +
                          std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()) + " grid of " +
                          std::to_string(p) + "-pixel regions");
    }
    TensorF out = frame;
    const std::size_t h = frame.dim(1);
    const std::size_t w = frame.dim(2);
    for (std::size_t c = 0; c < frame.dim(0); ++c)
    {
        for (std::size_t y = 0; y < h; ++y)
        {
            float *row = out.data().data() + (c * h + y) * w;
            for (std::size_t rc = 0; rc < mask.cols(); ++rc)
            {
                if (!mask.kept(y / p, rc))
                {
                    std::fill(row + rc * p, row + (rc + 1) * p, 0.0F);
                }
            }
        }
    }
    return out;
}

RegionMask region_labels(const std::vector<Box> &boxes, std::size_t rows, std::size_t cols, std::size_t region_size,
                         const LetterboxTransform &transform)
{
    RegionMask labels(rows, cols, region_size);
    const double p = static_cast<double>(region_size);
    for (const Box &b : boxes)
    {
        const Box t{transform.to_canvas_x(b.x1), transform.to_canvas_y(b.y1), transform.to_canvas_x(b.x2),
                    transform.to_canvas_y(b.y2)};
        if (t.degenerate())
        {
            continue;
        }
        const auto [r0, r1] = covered_cells(t.y1 / p, t.y2 / p, rows);
        const auto [c0, c1] = covered_cells(t.x1 / p, t.x2 / p, cols);
        for (std::size_t r = r0; r < r1; ++r)
        {
            for (std::size_t c = c0; c < c1; ++c)
            {
                labels.set(r, c, true);
            }
        }
    }
    return labels;
}

std::filesystem::path static_mask_sidecar_path(const std::filesystem::path &pgm_path)
{
    auto p = pgm_path;
    return p.replace_extension(".json");
}

void save_static_mask(const std::filesystem::path &pgm_path, const StaticMaskArtifact &artifact)
{
    const RegionMask &m = artifact.mask;
    GrayImage img{m.cols(), m.rows(), std::vector<std::uint8_t>(m.size())};
    for (std::size_t i = 0; i < m.size(); ++i)
    {
        img.pixels[i] = m.kept(i) ? 255 : 0;
    }
    write_pgm(pgm_path, img);
    nlohmann::ordered_json side;
    side["p"] = m.region_size();
    side["k_s"] = artifact.keep_rate;
    side["source_manifest"] = artifact.source_manifest;
    write_file(static_mask_sidecar_path(pgm_path), side.dump(2) + "\n");
}

StaticMaskArtifact load_static_mask(const std::filesystem::path &pgm_path)
{
    const GrayImage img = read_pgm(pgm_path);
    const auto side_path = static_mask_sidecar_path(pgm_path);
    nlohmann::json side;
    try
    {
        side = nlohmann::json::parse(read_file(side_path));
    }
    catch (const nlohmann::json::exception &e)
    {
        throw FormatError(side_path.string() + ": " + e.what());
    }
    StaticMaskArtifact a;
    try
    {
        a.mask = RegionMask(img.height, img.width, side.at("p").get<std::size_t>());
        a.keep_rate = side.at("k_s").get<double>();
        a.source_manifest = side.value("source_manifest", std::string{});
    }
    catch (const nlohmann::json::exception &e)
    {
        throw FormatError(side_path.string() + ": " + e.what());
    }
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
    {
        if (img.pixels[i] != 0 && img.pixels[i] != 255)
        {
            throw FormatError(pgm_path.string() + ": mask pixels must be 0 or 255");
        }
        a.mask.set(i, img.pixels[i] == 255);
    }
    return a;
}

} // namespace sdmask
