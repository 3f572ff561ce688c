#include "sdmask/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "sdmask/error.hpp"
#include "sdmask/metrics.hpp"
#include "sdmask/tensor_ops.hpp"

namespace sdmask
{

std::string mask_mode_name(MaskMode mode)
{
    switch (mode)
    {
    case MaskMode::none:
        return "none";
    case MaskMode::static_only:
        return "static";
    case MaskMode::dynamic_only:
        return "dynamic";
    case MaskMode::combined:
        return "combined";
    }
    return "none";
}

MaskMode parse_mask_mode(const std::string &name)
{
    for (const MaskMode m : {MaskMode::none, MaskMode::static_only, MaskMode::dynamic_only, MaskMode::combined})
    {
        if (mask_mode_name(m) == name)
        {
            return m;
        }
    }
    throw ConfigError("unknown mask mode '" + name + "' (expected none, static, dynamic or combined)");
}

MaskGenerator::MaskGenerator(MaskMode mode, std::size_t canvas, std::optional<RegionMask> static_mask,
                             std::optional<MGNetParams> mgnet, double region_threshold)
    : mode_(mode), canvas_(canvas), static_mask_(std::move(static_mask)), mgnet_(std::move(mgnet)),
      region_threshold_(region_threshold)
{
    const bool needs_static = mode == MaskMode::static_only || mode == MaskMode::combined;
    const bool needs_dynamic = mode == MaskMode::dynamic_only || mode == MaskMode::combined;
    if (needs_static)
    {
        if (!static_mask_)
        {
            throw ConfigError("mask mode " + mask_mode_name(mode) + " needs a static mask");
        }
        if (static_mask_->region_size() != kRegionSize || static_mask_->rows() * kRegionSize != canvas ||
            static_mask_->cols() * kRegionSize != canvas)
        {
            throw ConfigError("static mask grid " + std::to_string(static_mask_->rows()) + "x" +
                              std::to_string(static_mask_->cols()) + " does not tile a " + std::to_string(canvas) +
                              " canvas with " + std::to_string(kRegionSize) + "-pixel regions");
        }
    }
    if (needs_dynamic)
    {
        if (!mgnet_)
        {
            throw ConfigError("mask mode " + mask_mode_name(mode) + " needs MGNet weights");
        }
        if (mgnet_->config.image * 2 != canvas)
        {
            throw ConfigError("MGNet input " + std::to_string(mgnet_->config.image) + " is not half the canvas");
        }
        if (!(region_threshold > 0.0 && region_threshold < 1.0))
        {
            throw ConfigError("t_reg must lie in (0, 1)");
        }
    }
}

TensorF mgnet_input(const TensorF &canvas)
{
    TensorF x = avg_downsample2x(canvas);
    for (float &v : x.data())
    {
        v = v * (1.0F / 255.0F);
    }
    return x;
}

RegionMask MaskGenerator::dynamic_part(const TensorF &canvas) const
{
    if (!mgnet_)
    {
        throw ConfigError("dynamic mask needs MGNet weights");
    }
    const MGNetOutput out = mgnet_forward(mgnet_input(canvas), *mgnet_);
    const std::size_t region = canvas_ / mgnet_->config.grid();
    return refine_mask(dynamic_mask(out.logits, region_threshold_, region), kRegionSize);
}

RegionMask MaskGenerator::operator()(const TensorF &canvas) const
{
    const std::size_t grid = canvas_ / kRegionSize;
    switch (mode_)
    {
    case MaskMode::none:
        return RegionMask(grid, grid, kRegionSize, true);
    case MaskMode::static_only:
        return *static_mask_;
    case MaskMode::dynamic_only:
        return dynamic_part(canvas);
    case MaskMode::combined:
        return combine(*static_mask_, dynamic_part(canvas));
    }
    return RegionMask(grid, grid, kRegionSize, true);
}

Box to_canvas(const Box &box, const LetterboxTransform &t)
{
    return Box{t.to_canvas_x(box.x1), t.to_canvas_y(box.y1), t.to_canvas_x(box.x2), t.to_canvas_y(box.y2)};
}

template <typename T> GrayImage delta_image(const Tensor<T> &events)
{
    if (events.rank() != 3)
    {
        throw ConfigError("delta_image expects [C, H, W] events");
    }
    const std::size_t c = events.dim(0);
    const std::size_t h = events.dim(1);
    const std::size_t w = events.dim(2);
    std::vector<double> mag(h * w, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch)
    {
        for (std::size_t i = 0; i < h * w; ++i)
        {
            mag[i] = std::max(mag[i], std::fabs(static_cast<double>(events[ch * h * w + i])));
        }
    }
    const double peak = *std::max_element(mag.begin(), mag.end());
    GrayImage img{w, h, std::vector<std::uint8_t>(h * w, 0)};
    if (peak > 0.0)
    {
        for (std::size_t i = 0; i < h * w; ++i)
        {
            if (mag[i] > 0.0)
            {
                img.pixels[i] = static_cast<std::uint8_t>(std::max(1.0, std::round(255.0 * mag[i] / peak)));
            }
        }
    }
    return img;
}

template GrayImage delta_image<float>(const Tensor<float> &);
template GrayImage delta_image<std::int32_t>(const Tensor<std::int32_t> &);

void RunConfig::validate() const
{
    if (!(keep_rate > 0.0 && keep_rate <= 1.0))
    {
        throw ConfigError("k_s must lie in (0, 1]");
    }
    if (!(region_threshold > 0.0 && region_threshold < 1.0))
    {
        throw ConfigError("t_reg must lie in (0, 1)");
    }
    if (jobs == 0)
    {
        throw ConfigError("jobs must be at least 1");
    }
    coefficients.validate();
}

namespace
{

struct SequenceResult
{
    EventStats stats;
    std::vector<FrameResult> frames;
    std::vector<RegionMask> masks;
    std::vector<RegionMask> labels;
    std::vector<DeltaDump> dumps;
};

template <typename T>
SequenceResult run_sequence(const Sequence &seq, const Network &net, const MaskGenerator &masker,
                            const RunConfig &config)
{
    SequenceResult out;
    Sdnn<T> sdnn(net, config.thresholds);
    const std::size_t canvas = net.config().input;
    const std::size_t grid = canvas / kRegionSize;
    for (const auto &record : seq.frames)
    {
        const TensorF image = record.load_image();
        if (image.dim(0) != net.config().input_channels)
        {
            throw ConfigError(record.image_path.string() + ": channel count does not match the network input");
        }
        LetterboxResult boxed = letterbox(image, canvas);
        const RegionMask mask = masker(boxed.image);
        TensorF masked = config.mode == MaskMode::none ? boxed.image : apply_mask(boxed.image, mask);
        SdnnStep<T> step = sdnn.step(masked);

        TensorF head;
        if constexpr (std::is_same_v<T, float>)
        {
            head = std::move(step.head);
        }
        else
        {
            head = dequantize_head(net, step.head);
        }

        FrameResult fr;
        fr.seq_id = record.seq_id;
        fr.frame_index = record.frame_index;
        fr.detections = decode_detections(head, net.config().head, canvas, config.conf_thresh);
        for (const auto &g : record.boxes)
        {
            const Box b = to_canvas(g.box, boxed.transform);
            if (!b.degenerate())
            {
                fr.ground_truth.push_back(GroundTruth{b, g.class_id});
            }
        }
        fr.sparsity = frame_sparsity(mask);
        fr.input_events = step.input_events.nonzero_count;
        out.stats.add_frame(step.stats);

        if (config.mode != MaskMode::none)
        {
            std::vector<Box> boxes;
            for (const auto &g : record.boxes)
            {
                boxes.push_back(g.box);
            }
            out.labels.push_back(region_labels(boxes, grid, grid, kRegionSize, boxed.transform));
            out.masks.push_back(mask);
        }
        if (config.dump_frames.count({record.seq_id, record.frame_index}) != 0)
        {
            out.dumps.push_back(DeltaDump{record.seq_id, record.frame_index, std::move(boxed.image), std::move(masked),
                                          delta_image(step.input_events.values)});
        }
        out.frames.push_back(std::move(fr));
    }
    return out;
}

} // namespace

RunResult run_pipeline(const std::vector<Sequence> &all_sequences, const RunInputs &inputs, const RunConfig &config)
{
    config.validate();
    if (inputs.network == nullptr)
    {
        throw ConfigError("run: no network");
    }
    const Network &net = *inputs.network;
    const MaskGenerator masker(config.mode, net.config().input, inputs.static_mask, inputs.mgnet,
                               config.region_threshold);

    std::vector<Sequence> sequences;
    if (config.split)
    {
        for (const auto &seq : all_sequences)
        {
            Sequence filtered{seq.id, {}};
            std::copy_if(seq.frames.begin(), seq.frames.end(), std::back_inserter(filtered.frames),
                         [&](const FrameRecord &f) { return f.split == *config.split; });
            if (!filtered.frames.empty())
            {
                sequences.push_back(std::move(filtered));
            }
        }
    }
    else
    {
        sequences = all_sequences;
    }

    std::vector<std::optional<SequenceResult>> results(sequences.size());
    std::vector<std::exception_ptr> errors(sequences.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < sequences.size(); i = next++)
        {
            try
            {
                results[i] = net.quantized() ? run_sequence<std::int32_t>(sequences[i], net, masker, config)
                                             : run_sequence<float>(sequences[i], net, masker, config);
            }
            catch (...)
            {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::min(config.jobs, std::max<std::size_t>(sequences.size(), 1));
    if (workers <= 1)
    {
        worker();
    }
    else
    {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
        {
            pool.emplace_back(worker);
        }
        for (auto &t : pool)
        {
            t.join();
        }
    }

    RunResult run;
    run.mode = config.mode;
    std::vector<RegionMask> masks;
    std::vector<RegionMask> labels;
    double sparsity_sum = 0.0;
    double seq_mean_sum = 0.0;
    std::size_t seq_count = 0;
    for (std::size_t i = 0; i < sequences.size(); ++i)
    {
        if (errors[i])
        {
            try
            {
                std::rethrow_exception(errors[i]);
            }
            catch (const std::exception &e)
            {
                run.error = "sequence '" + sequences[i].id + "': " + e.what();
            }
            break;
        }
        SequenceResult &r = *results[i];
        run.stats.merge(r.stats);
        double seq_sum = 0.0;
        for (auto &f : r.frames)
        {
            sparsity_sum += f.sparsity;
            seq_sum += f.sparsity;
            run.frames.push_back(std::move(f));
        }
        if (!r.frames.empty())
        {
            seq_mean_sum += seq_sum / static_cast<double>(r.frames.size());
            ++seq_count;
        }
        masks.insert(masks.end(), r.masks.begin(), r.masks.end());
        labels.insert(labels.end(), r.labels.begin(), r.labels.end());
        for (auto &d : r.dumps)
        {
            run.dumps.push_back(std::move(d));
        }
    }

    if (!run.frames.empty())
    {
        run.frame_sparsity = sparsity_sum / static_cast<double>(run.frames.size());
        run.frame_sparsity_seq_mean = seq_mean_sum / static_cast<double>(seq_count);
        run.cost = cost_report(run.stats, config.coefficients);
        std::vector<std::vector<Detection>> dets;
        std::vector<std::vector<GroundTruth>> gts;
        for (const auto &f : run.frames)
        {
            dets.push_back(f.detections);
            gts.push_back(f.ground_truth);
        }
        run.map50 = map50(dets, gts);
    }
    run.miou = mean_miou(masks, labels);
    return run;
}

RegionMask build_static_mask(const std::vector<Sequence> &sequences, double keep_rate, std::size_t canvas,
                             std::size_t region_size)
{
    if (!(keep_rate > 0.0 && keep_rate <= 1.0))
    {
        throw ConfigError("k_s must lie in (0, 1]");
    }
    std::vector<std::vector<Box>> annotations;
    for (const auto &seq : sequences)
    {
        for (const auto &f : seq.frames)
        {
            const PnmSize size = read_pnm_size(f.image_path);
            const LetterboxTransform t = letterbox_transform(size.width, size.height, canvas);
            std::vector<Box> boxes;
            for (const auto &g : f.boxes)
            {
                boxes.push_back(to_canvas(g.box, t));
            }
            annotations.push_back(std::move(boxes));
        }
    }
    const Heatmap heat = build_heatmap(annotations, canvas, canvas);
    return static_topk(aggregate_regions(heat, region_size), keep_rate, region_size);
}

HeadDataset head_dataset_from(const std::vector<Sequence> &sequences, const MGNetParams &params, std::size_t canvas)
{
    const std::size_t grid = params.config.grid();
    if (params.config.image * 2 != canvas)
    {
        throw ConfigError("MGNet input " + std::to_string(params.config.image) + " is not half the canvas");
    }
    std::vector<TensorF> features;
    std::vector<RegionMask> labels;
    for (const auto &seq : sequences)
    {
        for (const auto &f : seq.frames)
        {
            const LetterboxResult boxed = letterbox(f.load_image(), canvas);
            features.push_back(mgnet_forward(mgnet_input(boxed.image), params).cls_attention);
            std::vector<Box> boxes;
            for (const auto &g : f.boxes)
            {
                boxes.push_back(g.box);
            }
            labels.push_back(region_labels(boxes, grid, grid, canvas / grid, boxed.transform));
        }
    }
    return make_head_dataset(features, labels);
}

} // namespace sdmask
