// sdmask - command line front end
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sdmask/calibration.hpp"
#include "sdmask/cost_model.hpp"
#include "sdmask/error.hpp"
#include "sdmask/image_io.hpp"
#include "sdmask/manifest.hpp"
#include "sdmask/masking.hpp"
#include "sdmask/metrics.hpp"
#include "sdmask/mgnet.hpp"
#include "sdmask/network.hpp"
#include "sdmask/pipeline.hpp"
#include "sdmask/report.hpp"
#include "sdmask/synthetic.hpp"
#include "sdmask/tensor_ops.hpp"
#include "sdmask/weights_io.hpp"

namespace fs = std::filesystem;
using namespace sdmask;

namespace
{

struct Options
{
    std::string manifest;
    std::string weights;
    std::string config;
    std::string mask{"none"};
    std::string static_mask;
    double ks{0.2};
    double treg{0.1};
    std::optional<double> theta;
    std::optional<double> input_theta;
    std::string coeff;
    std::string out;
    std::uint64_t seed{0};
    std::size_t jobs{1};
    std::string split{"val"};
    double conf{0.05};
    std::string seq;
    std::int64_t frame{0};
    std::string detections;
    std::string targets;
    bool synthetic{false};
    std::size_t frames{4};
    std::size_t epochs{200};
    double lr{0.1};
};

std::optional<Split> split_filter(const std::string &s)
{
    if (s == "all")
    {
        return std::nullopt;
    }
    return parse_split(s);
}

std::vector<Sequence> select(const Manifest &m, const std::string &split)
{
    const auto s = split_filter(split);
    return s ? m.split(*s) : m.sequences;
}

NetworkConfig network_config(const Options &o)
{
    return o.config.empty() ? default_yolo_kp_config() : load_config(o.config);
}

std::vector<TensorF> sample_canvases(const std::vector<Sequence> &sequences, std::size_t canvas, std::size_t limit)
{
    std::vector<TensorF> out;
    for (const auto &seq : sequences)
    {
        if (out.size() == limit || seq.frames.empty())
        {
            break;
        }
        out.push_back(letterbox(seq.frames.front().load_image(), canvas).image);
    }
    return out;
}

struct Models
{
    NetworkConfig config;
    NetworkWeights detector;
    std::optional<MGNetParams> mgnet;
};

// Fresh weights: He-initialised detector quantised on sample frames and a
// randomly initialised MGNet.
Models init_models(const NetworkConfig &config, std::uint64_t seed, std::vector<TensorF> samples)
{
    if (samples.empty())
    {
        SyntheticVideoOptions v;
        v.width = config.input;
        v.height = config.input;
        v.frames = 1;
        v.seed = seed + 1;
        samples.push_back(synthetic_video(v).front().image);
    }
    Models m{config, init_network_weights(config, seed), std::nullopt};
    m.detector.quant = calibrate_quantization(config, m.detector, samples);
    MGNetConfig mc;
    mc.image = config.input / 2;
    m.mgnet = init_mgnet_params(mc, seed + 1);
    return m;
}

Models load_models(const Options &o, const std::vector<Sequence> &sequences)
{
    const NetworkConfig config = network_config(o);
    if (o.weights.empty())
    {
        return init_models(config, o.seed, sample_canvases(sequences, config.input, 4));
    }
    const WeightsContainer c = WeightsContainer::load(o.weights);
    Models m{config, load_network_weights(c, config), std::nullopt};
    if (has_mgnet_params(c))
    {
        m.mgnet = load_mgnet_params(c);
    }
    return m;
}

MaskMode mask_mode(const Options &o)
{
    return parse_mask_mode(o.mask);
}

bool needs_static(MaskMode m)
{
    return m == MaskMode::static_only || m == MaskMode::combined;
}

std::optional<RegionMask> static_mask_for(const Options &o, const Manifest &manifest, MaskMode mode)
{
    if (!needs_static(mode))
    {
        return std::nullopt;
    }
    if (!o.static_mask.empty())
    {
        return load_static_mask(o.static_mask).mask;
    }
    return build_static_mask(manifest.split(Split::train), o.ks);
}

RunConfig run_config(const Options &o)
{
    RunConfig rc;
    rc.mode = mask_mode(o);
    rc.keep_rate = o.ks;
    rc.region_threshold = o.treg;
    rc.thresholds.layers = o.theta;
    rc.thresholds.input = o.input_theta;
    if (!o.coeff.empty())
    {
        rc.coefficients = load_coefficients(o.coeff);
    }
    rc.conf_thresh = o.conf;
    rc.split = split_filter(o.split);
    rc.jobs = o.jobs;
    return rc;
}

void print_json(const nlohmann::ordered_json &j, const std::string &out)
{
    const std::string text = j.dump(2) + "\n";
    if (!out.empty())
    {
        write_file(out, text);
    }
    std::cout << text;
}

int cmd_init_weights(const Options &o)
{
    const NetworkConfig config = network_config(o);
    std::vector<TensorF> samples;
    if (!o.manifest.empty())
    {
        samples = sample_canvases(select(load_manifest(o.manifest), "train"), config.input, 4);
    }
    const Models m = init_models(config, o.seed, std::move(samples));
    WeightsContainer c;
    store_network_weights(c, m.detector);
    store_mgnet_params(c, *m.mgnet);
    c.save(o.out);
    std::cout << "wrote " << o.out << " (" << c.entries().size() << " tensors)\n";
    return 0;
}

int cmd_build_static_mask(const Options &o)
{
    const Manifest manifest = load_manifest(o.manifest);
    const RegionMask mask = build_static_mask(manifest.split(Split::train), o.ks);
    save_static_mask(o.out, StaticMaskArtifact{mask, o.ks, fs::path(o.manifest).filename().string()});
    std::cout << "kept " << mask.kept_count() << " of " << mask.size() << " regions, frame sparsity "
              << frame_sparsity(mask) << "\n";
    return 0;
}

int cmd_run(const Options &o)
{
    const Manifest manifest = load_manifest(o.manifest);
    const RunConfig rc = run_config(o);
    const Models models = load_models(o, manifest.sequences);
    const Network net(models.config, models.detector);
    RunInputs in{&net, static_mask_for(o, manifest, rc.mode), models.mgnet};
    const RunResult run = run_pipeline(manifest.sequences, in, rc);
    write_report(o.out, run);
    std::cout << summary_json(run);
    if (run.error)
    {
        std::cerr << "error: " << *run.error << "\n";
        return 1;
    }
    return 0;
}

int cmd_dump_delta(const Options &o)
{
    const Manifest manifest = load_manifest(o.manifest);
    std::optional<Sequence> target;
    for (const auto &seq : manifest.sequences)
    {
        if (seq.id == o.seq)
        {
            Sequence upto{seq.id, {}};
            for (const auto &f : seq.frames)
            {
                if (f.frame_index <= o.frame)
                {
                    upto.frames.push_back(f);
                }
            }
            if (!upto.frames.empty() && upto.frames.back().frame_index == o.frame)
            {
                target = std::move(upto);
            }
        }
    }
    if (!target)
    {
        throw ConfigError("no frame " + std::to_string(o.frame) + " in sequence '" + o.seq + "'");
    }
    RunConfig rc = run_config(o);
    rc.split.reset();
    rc.dump_frames.insert({o.seq, o.frame});
    const Models models = load_models(o, manifest.sequences);
    const Network net(models.config, models.detector);
    RunInputs in{&net, static_mask_for(o, manifest, rc.mode), models.mgnet};
    const RunResult run = run_pipeline({*target}, in, rc);
    if (run.error)
    {
        throw Error(*run.error);
    }
    for (const auto &d : run.dumps)
    {
        write_dump(o.out, d);
        const DumpPaths p = dump_paths(o.out, d.seq_id, d.frame_index);
        std::cout << p.input.string() << "\n" << p.masked.string() << "\n" << p.delta.string() << "\n";
    }
    return 0;
}

int cmd_eval_miou(const Options &o)
{
    const Manifest manifest = load_manifest(o.manifest);
    const MaskMode mode = mask_mode(o);
    std::optional<MGNetParams> mgnet;
    if (mode == MaskMode::dynamic_only || mode == MaskMode::combined)
    {
        if (o.weights.empty())
        {
            throw ConfigError("dynamic masks need --weights with MGNet parameters");
        }
        mgnet = load_mgnet_params(WeightsContainer::load(o.weights));
    }
    const std::size_t canvas = 448;
    const MaskGenerator masker(mode, canvas, static_mask_for(o, manifest, mode), mgnet, o.treg);
    std::vector<RegionMask> pred;
    std::vector<RegionMask> labels;
    double sparsity = 0.0;
    for (const auto &seq : select(manifest, o.split))
    {
        for (const auto &f : seq.frames)
        {
            const LetterboxResult boxed = letterbox(f.load_image(), canvas);
            pred.push_back(masker(boxed.image));
            sparsity += frame_sparsity(pred.back());
            std::vector<Box> boxes;
            for (const auto &g : f.boxes)
            {
                boxes.push_back(g.box);
            }
            labels.push_back(region_labels(boxes, canvas / kRegionSize, canvas / kRegionSize, kRegionSize,
                                           boxed.transform));
        }
    }
    nlohmann::ordered_json j;
    j["mask_mode"] = mask_mode_name(mode);
    j["frames"] = pred.size();
    const auto m = mean_miou(pred, labels);
    j["miou"] = m ? nlohmann::ordered_json(*m) : nlohmann::ordered_json(nullptr);
    j["frame_sparsity"] = pred.empty() ? nlohmann::ordered_json(nullptr)
                                       : nlohmann::ordered_json(sparsity / static_cast<double>(pred.size()));
    print_json(j, o.out);
    return 0;
}

int cmd_eval_map(const Options &o)
{
    const Manifest manifest = load_manifest(o.manifest);
    const auto frames = parse_detections_jsonl(read_file(o.detections));
    std::map<std::pair<std::string, std::int64_t>, const FrameResult *> by_key;
    for (const auto &f : frames)
    {
        by_key[{f.seq_id, f.frame_index}] = &f;
    }
    std::vector<std::vector<Detection>> dets;
    std::vector<std::vector<GroundTruth>> gts;
    for (const auto &seq : select(manifest, o.split))
    {
        for (const auto &f : seq.frames)
        {
            const PnmSize size = read_pnm_size(f.image_path);
            const LetterboxTransform t = letterbox_transform(size.width, size.height, 448);
            std::vector<GroundTruth> gt;
            for (const auto &g : f.boxes)
            {
                const Box b = to_canvas(g.box, t);
                if (!b.degenerate())
                {
                    gt.push_back({b, g.class_id});
                }
            }
            gts.push_back(std::move(gt));
            const auto it = by_key.find({f.seq_id, f.frame_index});
            dets.push_back(it == by_key.end() ? std::vector<Detection>{} : it->second->detections);
        }
    }
    nlohmann::ordered_json j;
    j["frames"] = gts.size();
    const auto m = map50(dets, gts);
    j["map50"] = m ? nlohmann::ordered_json(*m) : nlohmann::ordered_json(nullptr);
    print_json(j, o.out);
    return 0;
}

int cmd_calibrate(const Options &o)
{
    const CostCoefficients seeds = o.coeff.empty() ? calibration_seeds() : load_coefficients(o.coeff);
    std::vector<CalibrationTarget> targets;
    if (o.synthetic)
    {
        targets = calibrate_on_synthetic(o.seed, o.frames).targets;
    }
    else
    {
        if (o.targets.empty())
        {
            throw ConfigError("calibrate needs --targets or --synthetic");
        }
        const fs::path base = fs::path(o.targets).parent_path();
        try
        {
            for (const auto &t : nlohmann::json::parse(read_file(o.targets)))
            {
                const fs::path run = t.at("run").get<std::string>();
                targets.push_back(CalibrationTarget{workload_from_report(run.is_absolute() ? run : base / run),
                                                    t.at("energy_mJ").get<double>(), t.at("latency_ms").get<double>()});
            }
        }
        catch (const nlohmann::json::exception &e)
        {
            throw ConfigError(o.targets + ": " + e.what());
        }
    }
    const CalibrationResult r = calibrate(seeds, targets);
    if (!o.out.empty())
    {
        save_coefficients(o.out, r.coefficients);
    }
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(coefficients_to_json(r.coefficients));
    j["energy_rank"] = r.energy_rank;
    j["latency_rank"] = r.latency_rank;
    j["rank_deficient"] = r.rank_deficient;
    j["energy_residuals_mJ"] = r.energy_residuals_mj;
    j["latency_residuals_ms"] = r.latency_residuals_ms;
    j["targets"] = nlohmann::ordered_json::array();
    for (const auto &t : targets)
    {
        j["targets"].push_back({{"synops", t.workload.synops},
                                {"events", t.workload.events},
                                {"neurons", t.workload.neurons},
                                {"layers", t.workload.layers},
                                {"energy_mJ", t.energy_mj},
                                {"latency_ms", t.latency_ms}});
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_train_head(const Options &o)
{
    const Manifest manifest = load_manifest(o.manifest);
    WeightsContainer c = WeightsContainer::load(o.weights);
    MGNetParams params = load_mgnet_params(c);
    const HeadDataset data = head_dataset_from(manifest.split(Split::train), params);
    HeadTrainingOptions opt;
    opt.epochs = o.epochs;
    opt.learning_rate = o.lr;
    const HeadTrainingResult r =
        train_region_head(data, init_region_head(params.config.patches(), o.seed), opt);
    assign_region_head(params, r.head);
    store_mgnet_params(c, params);
    c.save(o.out.empty() ? o.weights : o.out);
    std::cout << "final loss " << r.final_loss << "\n";
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Sigma-delta detector simulator with region masking"};
    app.require_subcommand(1);
    Options o;

    const auto manifest = [&](CLI::App *s, bool required) {
        auto *opt = s->add_option("--manifest", o.manifest, "JSON-Lines dataset manifest");
        if (required)
        {
            opt->required();
        }
    };
    const auto model = [&](CLI::App *s) {
        s->add_option("--weights", o.weights, "SDNNW1 weights (random from --seed when omitted)");
        s->add_option("--config", o.config, "network config JSON (default detector when omitted)");
        s->add_option("--seed", o.seed, "seed for random initialisation");
    };
    const auto masking = [&](CLI::App *s) {
        s->add_option("--mask", o.mask, "mask mode")->check(CLI::IsMember({"none", "static", "dynamic", "combined"}));
        s->add_option("--static-mask", o.static_mask, "static mask PGM (built from the train split when omitted)");
        s->add_option("--ks", o.ks, "static keep rate");
        s->add_option("--treg", o.treg, "dynamic region threshold");
    };
    const auto running = [&](CLI::App *s) {
        s->add_option("--theta", o.theta, "threshold for every layer");
        s->add_option("--input-theta", o.input_theta, "threshold of the input encoder");
        s->add_option("--coeff", o.coeff, "cost coefficients JSON");
        s->add_option("--jobs", o.jobs, "worker threads (sequences run in parallel)");
        s->add_option("--conf", o.conf, "detection confidence threshold");
    };
    const auto split = [&](CLI::App *s, const std::string &def) {
        o.split = def;
        s->add_option("--split", o.split, "train, val or all")->check(CLI::IsMember({"train", "val", "all"}));
    };

    auto *init = app.add_subcommand("init-weights", "write randomly initialised detector and MGNet weights");
    manifest(init, false);
    init->add_option("--config", o.config, "network config JSON");
    init->add_option("--seed", o.seed, "seed");
    init->add_option("--out", o.out, "output weights file")->required();

    auto *bsm = app.add_subcommand("build-static-mask", "accumulate train boxes into a static mask");
    manifest(bsm, true);
    bsm->add_option("--ks", o.ks, "keep rate");
    bsm->add_option("--out", o.out, "output PGM (sidecar JSON written alongside)")->required();

    auto *run = app.add_subcommand("run", "run the masked sigma-delta detector over a manifest");
    manifest(run, true);
    model(run);
    masking(run);
    running(run);
    split(run, "val");
    run->add_option("--out", o.out, "output directory")->required();

    auto *dump = app.add_subcommand("dump-delta", "write input, masked and delta images for one frame");
    manifest(dump, true);
    model(dump);
    masking(dump);
    running(dump);
    dump->add_option("--seq", o.seq, "sequence id")->required();
    dump->add_option("--frame", o.frame, "frame index")->required();
    dump->add_option("--out", o.out, "output directory")->required();

    auto *miou = app.add_subcommand("eval-miou", "score masks against box-derived region labels");
    manifest(miou, true);
    miou->add_option("--weights", o.weights, "weights holding MGNet parameters");
    masking(miou);
    split(miou, "val");
    miou->add_option("--out", o.out, "optional JSON output");

    auto *emap = app.add_subcommand("eval-map", "mAP@0.5 of a detections file");
    manifest(emap, true);
    emap->add_option("--detections", o.detections, "detections.jsonl from a run")->required();
    split(emap, "val");
    emap->add_option("--out", o.out, "optional JSON output");

    auto *cal = app.add_subcommand("calibrate", "fit cost coefficients to energy/latency targets");
    cal->add_option("--targets", o.targets, "JSON list of {run, energy_mJ, latency_ms}");
    cal->add_flag("--synthetic", o.synthetic, "measure the default detector on synthetic video instead");
    cal->add_option("--coeff", o.coeff, "seed coefficients JSON");
    cal->add_option("--seed", o.seed, "seed for --synthetic");
    cal->add_option("--frames", o.frames, "synthetic frames per operating point");
    cal->add_option("--out", o.out, "output coefficients JSON");

    auto *train = app.add_subcommand("train-head", "train the MGNet region head on the train split");
    manifest(train, true);
    train->add_option("--weights", o.weights, "weights file")->required();
    train->add_option("--epochs", o.epochs, "gradient steps");
    train->add_option("--lr", o.lr, "learning rate");
    train->add_option("--seed", o.seed, "head initialisation seed");
    train->add_option("--out", o.out, "output weights (default: overwrite --weights)");

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (init->parsed())
        {
            return cmd_init_weights(o);
        }
        if (bsm->parsed())
        {
            return cmd_build_static_mask(o);
        }
        if (run->parsed())
        {
            return cmd_run(o);
        }
        if (dump->parsed())
        {
            return cmd_dump_delta(o);
        }
        if (miou->parsed())
        {
            return cmd_eval_miou(o);
        }
        if (emap->parsed())
        {
            return cmd_eval_map(o);
        }
        if (cal->parsed())
        {
            return cmd_calibrate(o);
        }
        if (train->parsed())
        {
            return cmd_train_head(o);
        }
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
