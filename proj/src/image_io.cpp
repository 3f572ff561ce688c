#include "sdmask/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "sdmask/quant.hpp"

namespace sdmask
{

namespace
{

struct PnmHeader
{
    char kind{0};
    std::size_t width{0};
    std::size_t height{0};
    std::size_t data_offset{0};
};

class HeaderReader
{
public:
    explicit HeaderReader(const std::string &bytes) : bytes_(bytes) {}

    std::size_t number()
    {
        skip_space_and_comments();
        std::size_t v = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_])))
        {
            v = v * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
            ++pos_;
            if (++digits > 9)
            {
                throw FormatError("pnm: header number too large");
            }
        }
        if (digits == 0)
        {
            throw FormatError("pnm: expected a number in header");
        }
        return v;
    }

    std::size_t single_whitespace()
    {
        if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
        {
            throw FormatError("pnm: missing whitespace after maxval");
        }
        return ++pos_;
    }

    std::size_t pos_{2};

private:
    void skip_space_and_comments()
    {
        while (pos_ < bytes_.size())
        {
            const char ch = bytes_[pos_];
            if (ch == '#')
            {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n')
                {
                    ++pos_;
                }
            }
            else if (std::isspace(static_cast<unsigned char>(ch)))
            {
                ++pos_;
            }
            else
            {
                break;
            }
        }
    }

    const std::string &bytes_;
};

PnmHeader parse_header(const std::string &bytes)
{
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    {
        throw FormatError("pnm: expected P5 or P6 magic");
    }
    HeaderReader r(bytes);
    PnmHeader h;
    h.kind = bytes[1];
    h.width = r.number();
    h.height = r.number();
    const std::size_t maxval = r.number();
    if (h.width == 0 || h.height == 0)
    {
        throw FormatError("pnm: zero image extent");
    }
    if (maxval != 255)
    {
        throw FormatError("pnm: only maxval 255 is supported, got " + std::to_string(maxval));
    }
    h.data_offset = r.single_whitespace();
    const std::size_t channels = h.kind == '6' ? 3 : 1;
    if (bytes.size() - h.data_offset < h.width * h.height * channels)
    {
        throw FormatError("pnm: truncated pixel data");
    }
    return h;
}

std::uint8_t to_byte(float v)
{
    return static_cast<std::uint8_t>(std::clamp(round_half_even(static_cast<double>(v)), 0.0, 255.0));
}

} // namespace

std::string encode_ppm(const TensorF &rgb)
{
    if (rgb.rank() != 3 || rgb.dim(0) != 3)
    {
        throw ConfigError("encode_ppm expects [3,H,W], got " + shape_to_string(rgb.shape()));
    }
    const std::size_t h = rgb.dim(1);
    const std::size_t w = rgb.dim(2);
    std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    out.reserve(out.size() + 3 * w * h);
    for (std::size_t y = 0; y < h; ++y)
    {
        for (std::size_t x = 0; x < w; ++x)
        {
            for (std::size_t c = 0; c < 3; ++c)
            {
                out.push_back(static_cast<char>(to_byte(rgb(c, y, x))));
            }
        }
    }
    return out;
}

std::string encode_pgm(const GrayImage &image)
{
    if (image.pixels.size() != image.width * image.height || image.width == 0 || image.height == 0)
    {
        throw ConfigError("encode_pgm: pixel buffer does not match extent");
    }
    std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.append(image.pixels.begin(), image.pixels.end());
    return out;
}

TensorF decode_ppm(const std::string &bytes)
{
    const PnmHeader h = parse_header(bytes);
    if (h.kind != '6')
    {
        throw FormatError("pnm: expected P6 (RGB) image");
    }
    TensorF rgb({3, h.height, h.width});
    const auto *p = reinterpret_cast<const unsigned char *>(bytes.data() + h.data_offset);
    for (std::size_t y = 0; y < h.height; ++y)
    {
        for (std::size_t x = 0; x < h.width; ++x)
        {
            for (std::size_t c = 0; c < 3; ++c)
            {
                rgb(c, y, x) = static_cast<float>(*p++);
            }
        }
    }
    return rgb;
}

GrayImage decode_pgm(const std::string &bytes)
{
    const PnmHeader h = parse_header(bytes);
    if (h.kind != '5')
    {
        throw FormatError("pnm: expected P5 (gray) image");
    }
    GrayImage g{h.width, h.height, {}};
    const auto *p = reinterpret_cast<const unsigned char *>(bytes.data() + h.data_offset);
    g.pixels.assign(p, p + h.width * h.height);
    return g;
}

std::string read_file(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path &path, const std::string &bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
    {
        throw IoError("cannot write " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
    {
        throw IoError("write failed: " + path.string());
    }
}

TensorF read_ppm(const std::filesystem::path &path)
{
    try
    {
        return decode_ppm(read_file(path));
    }
    catch (const FormatError &e)
    {
        throw FormatError(path.string() + ": " + e.what());
    }
}

GrayImage read_pgm(const std::filesystem::path &path)
{
    try
    {
        return decode_pgm(read_file(path));
    }
    catch (const FormatError &e)
    {
        throw FormatError(path.string() + ": " + e.what());
    }
}

PnmSize read_pnm_size(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw IoError("cannot open " + path.string());
    }
    std::string head(256, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head.size()));
    head.resize(static_cast<std::size_t>(in.gcount()));
    if (head.size() < 2 || head[0] != 'P' || (head[1] != '5' && head[1] != '6'))
    {
        throw FormatError(path.string() + ": expected P5 or P6 magic");
    }
    HeaderReader r(head);
    PnmSize s;
    s.width = r.number();
    s.height = r.number();
    return s;
}

void write_ppm(const std::filesystem::path &path, const TensorF &rgb)
{
    write_file(path, encode_ppm(rgb));
}

void write_pgm(const std::filesystem::path &path, const GrayImage &image)
{
    write_file(path, encode_pgm(image));
}

} // namespace sdmask
