#include "sdmask/event_stats.hpp"

#include "sdmask/error.hpp"

namespace sdmask
{

namespace
{

void require_same_layers(const std::vector<LayerStats> &a, const std::vector<LayerStats> &b)
{
    if (a.size() != b.size())
    {
        throw ConfigError("event stats: layer count mismatch");
    }
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        if (a[i].name != b[i].name || a[i].neurons != b[i].neurons || a[i].dense_macs != b[i].dense_macs)
        {
            throw ConfigError("event stats: layer '" + a[i].name + "' does not match '" + b[i].name + "'");
        }
    }
}

} // namespace

std::uint64_t total_macs(const std::vector<LayerMacs> &layers)
{
    std::uint64_t n = 0;
    for (const auto &l : layers)
    {
        n += l.macs;
    }
    return n;
}

void EventStats::add_frame(const FrameStats &frame)
{
    if (frames_ == 0 && layers_.empty())
    {
        layers_ = frame;
        for (auto &l : layers_)
        {
            l.events_in = l.events_out = l.synops = 0;
        }
    }
    require_same_layers(layers_, frame);
    for (std::size_t i = 0; i < frame.size(); ++i)
    {
        layers_[i].events_in += frame[i].events_in;
        layers_[i].events_out += frame[i].events_out;
        layers_[i].synops += frame[i].synops;
    }
    ++frames_;
}

void EventStats::merge(const EventStats &other)
{
    if (other.frames_ == 0 && other.layers_.empty())
    {
        return;
    }
    if (frames_ == 0 && layers_.empty())
    {
        *this = other;
        return;
    }
    require_same_layers(layers_, other.layers_);
    for (std::size_t i = 0; i < layers_.size(); ++i)
    {
        layers_[i].events_in += other.layers_[i].events_in;
        layers_[i].events_out += other.layers_[i].events_out;
        layers_[i].synops += other.layers_[i].synops;
    }
    frames_ += other.frames_;
}

std::uint64_t EventStats::total_synops() const
{
    std::uint64_t n = 0;
    for (const auto &l : layers_)
    {
        n += l.synops;
    }
    return n;
}

std::uint64_t EventStats::total_events() const
{
    std::uint64_t n = 0;
    for (const auto &l : layers_)
    {
        n += l.events_out;
    }
    return n;
}

std::uint64_t EventStats::total_neurons() const
{
    std::uint64_t n = 0;
    for (const auto &l : layers_)
    {
        n += l.neurons;
    }
    return n;
}

std::uint64_t EventStats::total_dense_macs() const
{
    std::uint64_t n = 0;
    for (const auto &l : layers_)
    {
        n += l.dense_macs;
    }
    return n;
}

} // namespace sdmask
