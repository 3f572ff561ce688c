// manifest.hpp - JSON-Lines dataset manifests
//
// One record per line:
//   {"seq_id": "0001", "frame_index": 0, "image_path": "0001/000000.ppm",
//    "split": "train", "boxes": [[x1, y1, x2, y2, class_id], ...]}
// Relative image paths resolve against the manifest's directory. Boxes are
// in original image pixels.
#ifndef SDMASK_MANIFEST_HPP_
#define SDMASK_MANIFEST_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdmask/metrics.hpp"
#include "sdmask/tensor.hpp"

namespace sdmask
{

enum class Split : std::uint8_t
{
    train,
    val,
};

struct FrameRecord
{
    std::string seq_id;
    std::int64_t frame_index{0};
    std::filesystem::path image_path;
    Split split{Split::train};
    std::vector<GroundTruth> boxes;

    // Decodes the PPM on demand.
    [[nodiscard]] TensorF load_image() const;
};

struct Sequence
{
    std::string id;
    std::vector<FrameRecord> frames;
};

struct Manifest
{
    std::filesystem::path path;
    std::vector<Sequence> sequences; // first-appearance order

    [[nodiscard]] std::size_t frame_count() const;
    // Sequences restricted to frames of one split; empty ones are dropped.
    [[nodiscard]] std::vector<Sequence> split(Split s) const;
};

std::string split_name(Split s);
Split parse_split(const std::string &s);

// Errors name the line number for malformed records, the seq_id for
// non-increasing frame indices and the path for missing images.
Manifest parse_manifest(const std::string &text, const std::filesystem::path &base_dir,
                        bool check_files = true);
Manifest load_manifest(const std::filesystem::path &path);

std::string manifest_line(const FrameRecord &record, const std::filesystem::path &base_dir);

} // namespace sdmask

#endif
