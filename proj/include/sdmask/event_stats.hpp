// event_stats.hpp - per-layer event accounting
#ifndef SDMASK_EVENT_STATS_HPP_
#define SDMASK_EVENT_STATS_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sdmask
{

// Counts for one layer. `neurons` and `dense_macs` are per frame; the event
// and synop counters are summed over however many frames were accumulated.
struct LayerStats
{
    std::string name;
    std::uint64_t neurons{0};
    std::uint64_t events_in{0};
    std::uint64_t events_out{0};
    std::uint64_t synops{0};
    std::uint64_t dense_macs{0};

    bool operator==(const LayerStats &) const = default;
};

using FrameStats = std::vector<LayerStats>;

// Dense multiply-accumulate count of one layer.
struct LayerMacs
{
    std::string name;
    std::uint64_t macs{0};
};

std::uint64_t total_macs(const std::vector<LayerMacs> &layers);

class EventStats
{
public:
    EventStats() = default;

    // Adds one frame; the layer list must match earlier frames.
    void add_frame(const FrameStats &frame);
    // Adds another run's totals; layer lists must match.
    void merge(const EventStats &other);

    [[nodiscard]] const std::vector<LayerStats> &layers() const noexcept { return layers_; }
    [[nodiscard]] std::uint64_t frames() const noexcept { return frames_; }

    [[nodiscard]] std::uint64_t total_synops() const;
    [[nodiscard]] std::uint64_t total_events() const;
    [[nodiscard]] std::uint64_t total_neurons() const;
    [[nodiscard]] std::uint64_t total_dense_macs() const;

    bool operator==(const EventStats &) const = default;

private:
    std::vector<LayerStats> layers_;
    std::uint64_t frames_{0};
};

} // namespace sdmask

#endif
