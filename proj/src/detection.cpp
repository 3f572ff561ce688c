#include "sdmask/detection.hpp"

#include <algorithm>
#include <cmath>

#include "sdmask/error.hpp"
#include "sdmask/masking.hpp"

namespace sdmask
{

std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold)
{
    std::stable_sort(detections.begin(), detections.end(),
                     [](const Detection &a, const Detection &b) { return a.confidence > b.confidence; });
    std::vector<Detection> kept;
    for (const auto &d : detections)
    {
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection &k) {
            return k.class_id == d.class_id && iou(k.box, d.box) > iou_threshold;
        });
        if (!suppressed)
        {
            kept.push_back(d);
        }
    }
    return kept;
}

std::vector<Detection> decode_detections(const TensorF &head, const HeadSpec &spec, std::size_t input_size,
                                         double conf_thresh, double nms_iou)
{
    const std::size_t per_anchor = 5 + spec.classes;
    if (head.rank() != 3 || head.dim(0) != spec.channels() || head.dim(1) != head.dim(2) || head.dim(1) == 0)
    {
        throw ConfigError("decode_detections: head shape " + shape_to_string(head.shape()) + " does not match " +
                          std::to_string(spec.anchors.size()) + " anchors x (5 + " + std::to_string(spec.classes) +
                          ")");
    }
    const std::size_t grid = head.dim(1);
    const double stride = static_cast<double>(input_size) / static_cast<double>(grid);
    const double extent = static_cast<double>(input_size);
    // exp() of anything above this would exceed any canvas anyway.
    constexpr double kMaxLogSize = 30.0;

    std::vector<std::vector<Detection>> by_class(spec.classes);
    for (std::size_t a = 0; a < spec.anchors.size(); ++a)
    {
        const std::size_t base = a * per_anchor;
        for (std::size_t gy = 0; gy < grid; ++gy)
        {
            for (std::size_t gx = 0; gx < grid; ++gx)
            {
                const double obj = sigmoid(head(base + 4, gy, gx));
                std::size_t best = 0;
                double best_logit = head(base + 5, gy, gx);
                for (std::size_t c = 1; c < spec.classes; ++c)
                {
                    const double v = head(base + 5 + c, gy, gx);
                    if (v > best_logit)
                    {
                        best_logit = v;
                        best = c;
                    }
                }
                const double conf = obj * sigmoid(best_logit);
                if (!(conf > conf_thresh))
                {
                    continue;
                }
                const double cx = (static_cast<double>(gx) + sigmoid(head(base, gy, gx))) * stride;
                const double cy = (static_cast<double>(gy) + sigmoid(head(base + 1, gy, gx))) * stride;
                const double w = spec.anchors[a][0] * std::exp(std::min<double>(head(base + 2, gy, gx), kMaxLogSize));
                const double h = spec.anchors[a][1] * std::exp(std::min<double>(head(base + 3, gy, gx), kMaxLogSize));
                Box box{std::clamp(cx - w / 2.0, 0.0, extent), std::clamp(cy - h / 2.0, 0.0, extent),
                        std::clamp(cx + w / 2.0, 0.0, extent), std::clamp(cy + h / 2.0, 0.0, extent)};
                if (box.degenerate())
                {
                    continue;
                }
                by_class[best].push_back(Detection{box, best, conf});
            }
        }
    }

    std::vector<Detection> out;
    for (auto &dets : by_class)
    {
        auto kept = nms(std::move(dets), nms_iou);
        out.insert(out.end(), kept.begin(), kept.end());
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Detection &a, const Detection &b) { return a.confidence > b.confidence; });
    return out;
}

} // namespace sdmask
