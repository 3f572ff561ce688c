#include "sdmask/report.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "sdmask/error.hpp"
#include "sdmask/image_io.hpp"
#include "sdmask/metrics.hpp"

namespace sdmask
{

using nlohmann::ordered_json;

namespace
{

ordered_json optional_number(const std::optional<double> &v)
{
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::string fixed(double v, int decimals)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

} // namespace

std::string summary_json(const RunResult &run)
{
    ordered_json j;
    j["mask_mode"] = mask_mode_name(run.mode);
    j["frames"] = run.frames.size();
    j["frame_sparsity"] = optional_number(run.frame_sparsity);
    j["frame_sparsity_seq_mean"] = optional_number(run.frame_sparsity_seq_mean);
    const auto &c = run.cost;
    j["energy_mJ"] = optional_number(c ? std::optional(c->energy_mj) : std::nullopt);
    j["latency_ms"] = optional_number(c ? std::optional(c->latency_ms) : std::nullopt);
    j["throughput_fps"] = optional_number(c ? std::optional(c->throughput_fps) : std::nullopt);
    j["edp_uJs"] = optional_number(c ? std::optional(c->edp_ujs) : std::nullopt);
    j["gops_per_watt"] = optional_number(c ? std::optional(c->gops_per_watt) : std::nullopt);
    j["map50"] = optional_number(run.map50);
    j["miou"] = optional_number(run.miou);
    j["complete"] = !run.error.has_value();
    if (run.error)
    {
        j["error"] = *run.error;
    }
    return j.dump(2) + "\n";
}

std::string layers_csv(const EventStats &stats)
{
    std::ostringstream out;
    out << "layer,neurons,events,synops,event_rate,dense_macs\n";
    const auto rates = event_rate(stats);
    for (std::size_t i = 0; i < stats.layers().size(); ++i)
    {
        const auto &l = stats.layers()[i];
        out << l.name << ',' << l.neurons << ',' << l.events_out << ',' << l.synops << ',' << fixed(rates[i], 6) << ','
            << l.dense_macs << '\n';
    }
    return out.str();
}

std::string detections_jsonl(const RunResult &run)
{
    std::string out;
    for (const auto &f : run.frames)
    {
        ordered_json j;
        j["seq_id"] = f.seq_id;
        j["frame_index"] = f.frame_index;
        j["detections"] = ordered_json::array();
        for (const auto &d : f.detections)
        {
            j["detections"].push_back(
                {{"box", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}}, {"class_id", d.class_id}, {"confidence", d.confidence}});
        }
        out += j.dump() + "\n";
    }
    return out;
}

DumpPaths dump_paths(const std::filesystem::path &dir, const std::string &seq_id, std::int64_t frame_index)
{
    const std::string stem = seq_id + "_" + std::to_string(frame_index);
    return DumpPaths{dir / (stem + "_input.ppm"), dir / (stem + "_masked.ppm"), dir / (stem + "_delta.pgm")};
}

void write_dump(const std::filesystem::path &dir, const DeltaDump &dump)
{
    std::filesystem::create_directories(dir);
    const DumpPaths p = dump_paths(dir, dump.seq_id, dump.frame_index);
    write_ppm(p.input, dump.input);
    write_ppm(p.masked, dump.masked);
    write_pgm(p.delta, dump.delta);
}

Workload workload_from_report(const std::filesystem::path &run_dir)
{
    const auto summary_path = run_dir / "summary.json";
    const auto csv_path = run_dir / "layers.csv";
    std::size_t frames = 0;
    try
    {
        frames = nlohmann::json::parse(read_file(summary_path)).at("frames").get<std::size_t>();
    }
    catch (const nlohmann::json::exception &e)
    {
        throw FormatError(summary_path.string() + ": " + e.what());
    }
    if (frames == 0)
    {
        throw ConfigError(summary_path.string() + ": run has no frames");
    }
    std::istringstream in(read_file(csv_path));
    std::string line;
    std::getline(in, line);
    if (line != "layer,neurons,events,synops,event_rate,dense_macs")
    {
        throw FormatError(csv_path.string() + ": unexpected header");
    }
    Workload w;
    std::size_t line_no = 1;
    while (std::getline(in, line))
    {
        ++line_no;
        std::vector<std::string> cells;
        std::istringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ','))
        {
            cells.push_back(cell);
        }
        if (cells.size() != 6)
        {
            throw FormatError(csv_path.string() + ": line " + std::to_string(line_no) + " has " +
                              std::to_string(cells.size()) + " fields");
        }
        try
        {
            w.neurons += std::stod(cells[1]);
            w.events += std::stod(cells[2]) / static_cast<double>(frames);
            w.synops += std::stod(cells[3]) / static_cast<double>(frames);
            w.dense_macs += std::stod(cells[5]);
        }
        catch (const std::exception &)
        {
            throw FormatError(csv_path.string() + ": line " + std::to_string(line_no) + " is not numeric");
        }
        w.layers += 1.0;
    }
    return w;
}

std::vector<FrameResult> parse_detections_jsonl(const std::string &text)
{
    std::vector<FrameResult> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
        {
            continue;
        }
        try
        {
            const auto j = nlohmann::json::parse(line);
            FrameResult f;
            f.seq_id = j.at("seq_id").get<std::string>();
            f.frame_index = j.at("frame_index").get<std::int64_t>();
            for (const auto &d : j.at("detections"))
            {
                const auto &b = d.at("box");
                f.detections.push_back(Detection{
                    Box{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()},
                    d.at("class_id").get<std::size_t>(), d.at("confidence").get<double>()});
            }
            out.push_back(std::move(f));
        }
        catch (const nlohmann::json::exception &e)
        {
            throw FormatError("detections line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_report(const std::filesystem::path &out_dir, const RunResult &run)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
    {
        throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    }
    write_file(out_dir / "summary.json", summary_json(run));
    write_file(out_dir / "layers.csv", layers_csv(run.stats));
    write_file(out_dir / "detections.jsonl", detections_jsonl(run));
    for (const auto &d : run.dumps)
    {
        write_dump(out_dir / "dumps", d);
    }
}

} // namespace sdmask
