// metrics.hpp - mask and detection quality, event rates
#ifndef SDMASK_METRICS_HPP_
#define SDMASK_METRICS_HPP_

#include <cstddef>
#include <optional>
#include <vector>

#include "sdmask/box.hpp"
#include "sdmask/detection.hpp"
#include "sdmask/event_stats.hpp"
#include "sdmask/masking.hpp"

namespace sdmask
{

// events_out / neurons per layer, averaged over the accumulated frames.
std::vector<double> event_rate(const EventStats &stats);

double frame_sparsity(const RegionMask &mask);

// |pred & gt| / |pred | gt|; 1 when both are empty.
double miou(const RegionMask &pred, const RegionMask &gt);
// Mean over frame pairs; nullopt for an empty list.
std::optional<double> mean_miou(const std::vector<RegionMask> &pred, const std::vector<RegionMask> &gt);

struct GroundTruth
{
    Box box;
    std::size_t class_id{0};
};

// Area under the precision envelope of a precision/recall curve given in
// ranking order.
double average_precision(const std::vector<double> &recall, const std::vector<double> &precision);

// mAP at IoU 0.5 over frames. Per class, detections are ranked by
// confidence (stable, so earlier frames and list positions win ties) and
// each is matched to the best-IoU still-unmatched ground truth of its class
// in the same frame. Classes without ground truth are skipped; nullopt when
// no class has any.
std::optional<double> map50(const std::vector<std::vector<Detection>> &detections,
                            const std::vector<std::vector<GroundTruth>> &ground_truth);

} // namespace sdmask

#endif
