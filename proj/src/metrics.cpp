#include "sdmask/metrics.hpp"

#include <algorithm>
#include <map>

#include "sdmask/error.hpp"

namespace sdmask
{

std::vector<double> event_rate(const EventStats &stats)
{
    std::vector<double> out;
    for (const auto &l : stats.layers())
    {
        if (l.neurons == 0)
        {
            throw ConfigError("event_rate: layer '" + l.name + "' has no neurons");
        }
        if (stats.frames() == 0)
        {
            out.push_back(0.0);
            continue;
        }
        out.push_back(static_cast<double>(l.events_out) /
                      (static_cast<double>(l.neurons) * static_cast<double>(stats.frames())));
    }
    return out;
}

double frame_sparsity(const RegionMask &mask)
{
    return mask.sparsity();
}

double miou(const RegionMask &pred, const RegionMask &gt)
{
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
    {
        throw ConfigError("miou: grids differ in shape");
    }
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
    {
        inter += pred.kept(i) && gt.kept(i) ? 1 : 0;
        uni += pred.kept(i) || gt.kept(i) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<double> mean_miou(const std::vector<RegionMask> &pred, const std::vector<RegionMask> &gt)
{
    if (pred.size() != gt.size())
    {
        throw ConfigError("mean_miou: " + std::to_string(pred.size()) + " predictions vs " +
                          std::to_string(gt.size()) + " labels");
    }
    if (pred.empty())
    {
        return std::nullopt;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
    {
        sum += miou(pred[i], gt[i]);
    }
    return sum / static_cast<double>(pred.size());
}

double average_precision(const std::vector<double> &recall, const std::vector<double> &precision)
{
    if (recall.size() != precision.size())
    {
        throw ConfigError("average_precision: curve lengths differ");
    }
    std::vector<double> envelope = precision;
    for (std::size_t i = envelope.size(); i-- > 1;)
    {
        envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
    }
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < recall.size(); ++i)
    {
        ap += (recall[i] - prev_recall) * envelope[i];
        prev_recall = recall[i];
    }
    return ap;
}

std::optional<double> map50(const std::vector<std::vector<Detection>> &detections,
                            const std::vector<std::vector<GroundTruth>> &ground_truth)
{
    if (detections.size() != ground_truth.size())
    {
        throw ConfigError("map50: " + std::to_string(detections.size()) + " detection frames vs " +
                          std::to_string(ground_truth.size()) + " ground-truth frames");
    }
    std::map<std::size_t, std::size_t> gt_count;
    for (const auto &frame : ground_truth)
    {
        for (const auto &g : frame)
        {
            ++gt_count[g.class_id];
        }
    }
    if (gt_count.empty())
    {
        return std::nullopt;
    }

    struct Ranked
    {
        double confidence;
        std::size_t frame;
        Box box;
    };
    double sum = 0.0;
    for (const auto &[cls, total] : gt_count)
    {
        std::vector<Ranked> ranked;
        for (std::size_t f = 0; f < detections.size(); ++f)
        {
            for (const auto &d : detections[f])
            {
                if (d.class_id == cls)
                {
                    ranked.push_back({d.confidence, f, d.box});
                }
            }
        }
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const Ranked &a, const Ranked &b) { return a.confidence > b.confidence; });

        std::vector<std::vector<bool>> matched(ground_truth.size());
        for (std::size_t f = 0; f < ground_truth.size(); ++f)
        {
            matched[f].assign(ground_truth[f].size(), false);
        }
        std::vector<double> recall;
        std::vector<double> precision;
        std::size_t tp = 0;
        for (std::size_t i = 0; i < ranked.size(); ++i)
        {
            const auto &gts = ground_truth[ranked[i].frame];
            double best_iou = 0.5;
            std::optional<std::size_t> best;
            for (std::size_t g = 0; g < gts.size(); ++g)
            {
                if (gts[g].class_id != cls || matched[ranked[i].frame][g])
                {
                    continue;
                }
                const double v = iou(ranked[i].box, gts[g].box);
                if (v >= best_iou && (!best || v > best_iou))
                {
                    best_iou = v;
                    best = g;
                }
            }
            if (best)
            {
                matched[ranked[i].frame][*best] = true;
                ++tp;
            }
            recall.push_back(static_cast<double>(tp) / static_cast<double>(total));
            precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
        }
        sum += average_precision(recall, precision);
    }
    return sum / static_cast<double>(gt_count.size());
}

} // namespace sdmask
