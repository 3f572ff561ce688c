// report.hpp - run outputs on disk
//
//   summary.json      headline metrics, null where a run has nothing to say
//   layers.csv        layer,neurons,events,synops,event_rate,dense_macs
//   detections.jsonl  one line per frame
//   dumps/            <seq>_<frame>_{input,masked}.ppm and _delta.pgm
#ifndef SDMASK_REPORT_HPP_
#define SDMASK_REPORT_HPP_

#include <filesystem>
#include <string>

#include "sdmask/cost_model.hpp"
#include "sdmask/event_stats.hpp"
#include "sdmask/pipeline.hpp"

namespace sdmask
{

std::string summary_json(const RunResult &run);
// events and synops are run totals; event_rate is per neuron per frame.
std::string layers_csv(const EventStats &stats);
std::string detections_jsonl(const RunResult &run);

struct DumpPaths
{
    std::filesystem::path input;
    std::filesystem::path masked;
    std::filesystem::path delta;
};

DumpPaths dump_paths(const std::filesystem::path &dir, const std::string &seq_id, std::int64_t frame_index);
void write_dump(const std::filesystem::path &dir, const DeltaDump &dump);

// Per-frame workload of a written run (summary.json frames + layers.csv).
Workload workload_from_report(const std::filesystem::path &run_dir);
std::vector<FrameResult> parse_detections_jsonl(const std::string &text);

// Writes summary.json, layers.csv, detections.jsonl and any dumps.
void write_report(const std::filesystem::path &out_dir, const RunResult &run);

} // namespace sdmask

#endif
