// detection.hpp - YOLO-style head decode and per-class NMS
#ifndef SDMASK_DETECTION_HPP_
#define SDMASK_DETECTION_HPP_

#include <cstddef>
#include <vector>

#include "sdmask/box.hpp"
#include "sdmask/network.hpp"
#include "sdmask/tensor.hpp"

namespace sdmask
{

struct Detection
{
    Box box; // 448-canvas pixels
    std::size_t class_id{0};
    double confidence{0.0};

    bool operator==(const Detection &) const = default;
};

// head is [anchors * (5 + classes), grid, grid] holding real-valued logits,
// channel order per anchor: tx, ty, tw, th, objectness, class scores.
// Returns detections with confidence > conf_thresh after greedy per-class
// NMS (a box is dropped when its IoU with a kept box exceeds nms_iou),
// sorted by descending confidence.
std::vector<Detection> decode_detections(const TensorF &head, const HeadSpec &spec, std::size_t input_size,
                                         double conf_thresh, double nms_iou = 0.5);

// Greedy NMS on one class; input order breaks confidence ties.
std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold);

} // namespace sdmask

#endif
