#include "sdmask/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "sdmask/rng.hpp"

namespace sdmask
{

namespace
{

struct Mover
{
    double x, y, w, h, vx, vy;
    float colour[3];
    std::size_t cls;
};

} // namespace

std::vector<SyntheticFrame> synthetic_video(const SyntheticVideoOptions &o)
{
    Rng rng(o.seed);
    const std::size_t w = o.width;
    const std::size_t h = o.height;
    constexpr std::size_t kBlock = 8;

    const auto scroll = [&](std::size_t f) {
        return static_cast<std::size_t>(std::llround(std::fabs(o.pan) * static_cast<double>(f)));
    };
    const std::size_t span = w + scroll(o.frames);
    const std::size_t bw = (span + kBlock - 1) / kBlock;
    const std::size_t bh = (h + kBlock - 1) / kBlock;
    std::vector<float> texture(3 * bw * bh);
    for (float &t : texture)
    {
        t = static_cast<float>(rng.uniform(-30.0, 30.0));
    }
    const auto background = [&](std::size_t f) {
        TensorF bg({3, h, w});
        const std::size_t off = scroll(f);
        for (std::size_t c = 0; c < 3; ++c)
        {
            for (std::size_t y = 0; y < h; ++y)
            {
                for (std::size_t x = 0; x < w; ++x)
                {
                    const double ramp = 60.0 + 100.0 * static_cast<double>(y) / static_cast<double>(h) +
                                        20.0 * static_cast<double>(c);
                    const double v = ramp + texture[(c * bh + y / kBlock) * bw + (x + off) / kBlock];
                    bg(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 255.0));
                }
            }
        }
        return bg;
    };

    std::vector<Mover> movers;
    for (std::size_t i = 0; i < o.objects; ++i)
    {
        Mover m{};
        m.w = rng.uniform(0.08, 0.25) * static_cast<double>(w);
        m.h = rng.uniform(0.08, 0.25) * static_cast<double>(h);
        m.x = rng.uniform(0.0, static_cast<double>(w) - m.w);
        m.y = rng.uniform(0.0, static_cast<double>(h) - m.h);
        m.vx = rng.uniform(-o.max_speed, o.max_speed);
        m.vy = rng.uniform(-o.max_speed, o.max_speed);
        for (float &c : m.colour)
        {
            c = static_cast<float>(rng.uniform(20.0, 255.0));
        }
        m.cls = static_cast<std::size_t>(rng.below(3));
        movers.push_back(m);
    }

    std::vector<SyntheticFrame> out;
    for (std::size_t f = 0; f < o.frames; ++f)
    {
        SyntheticFrame frame{background(f), {}, {}};
        for (const auto &m : movers)
        {
            const double x0 = m.x + m.vx * static_cast<double>(f);
            const double y0 = m.y + m.vy * static_cast<double>(f);
            const Box box{std::clamp(std::round(x0), 0.0, static_cast<double>(w)),
                          std::clamp(std::round(y0), 0.0, static_cast<double>(h)),
                          std::clamp(std::round(x0 + m.w), 0.0, static_cast<double>(w)),
                          std::clamp(std::round(y0 + m.h), 0.0, static_cast<double>(h))};
            if (box.degenerate())
            {
                continue;
            }
            for (std::size_t c = 0; c < 3; ++c)
            {
                for (auto y = static_cast<std::size_t>(box.y1); y < static_cast<std::size_t>(box.y2); ++y)
                {
                    for (auto x = static_cast<std::size_t>(box.x1); x < static_cast<std::size_t>(box.x2); ++x)
                    {
                        frame.image(c, y, x) = m.colour[c];
                    }
                }
            }
            frame.boxes.push_back(box);
            frame.classes.push_back(m.cls);
        }
        if (o.noise > 0.0)
        {
            for (float &v : frame.image.data())
            {
                v = static_cast<float>(std::clamp(std::round(v + rng.normal(0.0, o.noise)), 0.0, 255.0));
            }
        }
        out.push_back(std::move(frame));
    }
    return out;
}

} // namespace sdmask
