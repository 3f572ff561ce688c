#include "sdmask/manifest.hpp"

#include <map>
#include <sstream>

#include <json.hpp>

#include "sdmask/error.hpp"
#include "sdmask/image_io.hpp"

namespace sdmask
{

TensorF FrameRecord::load_image() const
{
    return read_ppm(image_path);
}

std::size_t Manifest::frame_count() const
{
    std::size_t n = 0;
    for (const auto &s : sequences)
    {
        n += s.frames.size();
    }
    return n;
}

std::vector<Sequence> Manifest::split(Split s) const
{
    std::vector<Sequence> out;
    for (const auto &seq : sequences)
    {
        Sequence filtered{seq.id, {}};
        for (const auto &f : seq.frames)
        {
            if (f.split == s)
            {
                filtered.frames.push_back(f);
            }
        }
        if (!filtered.frames.empty())
        {
            out.push_back(std::move(filtered));
        }
    }
    return out;
}

std::string split_name(Split s)
{
    return s == Split::train ? "train" : "val";
}

Split parse_split(const std::string &s)
{
    if (s == "train")
    {
        return Split::train;
    }
    if (s == "val")
    {
        return Split::val;
    }
    throw ConfigError("unknown split '" + s + "' (expected train or val)");
}

namespace
{

FrameRecord parse_record(const std::string &line, const std::filesystem::path &base_dir)
{
    const auto j = nlohmann::json::parse(line);
    if (!j.is_object())
    {
        throw FormatError("record is not a JSON object");
    }
    FrameRecord r;
    r.seq_id = j.at("seq_id").get<std::string>();
    r.frame_index = j.at("frame_index").get<std::int64_t>();
    const std::filesystem::path image = j.at("image_path").get<std::string>();
    r.image_path = image.is_absolute() ? image : base_dir / image;
    r.split = parse_split(j.at("split").get<std::string>());
    if (j.contains("boxes"))
    {
        for (const auto &b : j.at("boxes"))
        {
            if (!b.is_array() || b.size() != 5)
            {
                throw FormatError("box must be [x1, y1, x2, y2, class_id]");
            }
            const auto cls = b[4].get<std::int64_t>();
            if (cls < 0)
            {
                throw FormatError("class_id must be nonnegative");
            }
            r.boxes.push_back(GroundTruth{
                Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()},
                static_cast<std::size_t>(cls)});
        }
    }
    return r;
}

} // namespace

Manifest parse_manifest(const std::string &text, const std::filesystem::path &base_dir, bool check_files)
{
    Manifest m;
    std::map<std::string, std::size_t> index;
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
        FrameRecord r;
        try
        {
            r = parse_record(line, base_dir);
        }
        catch (const nlohmann::json::exception &e)
        {
            throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        catch (const Error &e)
        {
            throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        if (check_files && !std::filesystem::is_regular_file(r.image_path))
        {
            throw IoError("manifest line " + std::to_string(line_no) + ": missing image " + r.image_path.string());
        }
        auto [it, inserted] = index.emplace(r.seq_id, m.sequences.size());
        if (inserted)
        {
            m.sequences.push_back(Sequence{r.seq_id, {}});
        }
        auto &seq = m.sequences[it->second];
        if (!seq.frames.empty() && r.frame_index <= seq.frames.back().frame_index)
        {
            throw FormatError("manifest line " + std::to_string(line_no) + ": sequence '" + r.seq_id +
                              "' frame_index " + std::to_string(r.frame_index) + " does not increase after " +
                              std::to_string(seq.frames.back().frame_index));
        }
        seq.frames.push_back(std::move(r));
    }
    return m;
}

Manifest load_manifest(const std::filesystem::path &path)
{
    Manifest m = parse_manifest(read_file(path), path.parent_path());
    m.path = path;
    return m;
}

std::string manifest_line(const FrameRecord &record, const std::filesystem::path &base_dir)
{
    nlohmann::ordered_json j;
    j["seq_id"] = record.seq_id;
    j["frame_index"] = record.frame_index;
    j["image_path"] = base_dir.empty() ? record.image_path.generic_string()
                                       : record.image_path.lexically_relative(base_dir).generic_string();
    j["split"] = split_name(record.split);
    j["boxes"] = nlohmann::ordered_json::array();
    for (const auto &b : record.boxes)
    {
        j["boxes"].push_back({b.box.x1, b.box.y1, b.box.x2, b.box.y2, b.class_id});
    }
    return j.dump() + "\n";
}

} // namespace sdmask
