#include "sdmask/weights_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "sdmask/image_io.hpp"

namespace sdmask
{

namespace
{

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T> void put_le(std::string &out, T value)
{
    static_assert(std::is_trivially_copyable_v<T>);
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
    {
        std::reverse(bytes, bytes + sizeof(T));
    }
    out.append(bytes, sizeof(T));
}

class Reader
{
public:
    explicit Reader(const std::string &bytes) : bytes_(bytes) {}

    [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }
    [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }

    template <typename T> T get()
    {
        need(sizeof(T));
        char bytes[sizeof(T)];
        std::memcpy(bytes, bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big)
        {
            std::reverse(bytes, bytes + sizeof(T));
        }
        pos_ += sizeof(T);
        T v;
        std::memcpy(&v, bytes, sizeof(T));
        return v;
    }

    std::string take(std::size_t n)
    {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n)
        {
            throw FormatError("weights: truncated container at byte " + std::to_string(pos_));
        }
    }

    const std::string &bytes_;
    std::size_t pos_{0};
};

template <typename T> Tensor<T> read_payload(Reader &r, Shape shape)
{
    // Checked before allocating so a corrupt header cannot request huge buffers.
    std::size_t count = 1;
    for (const std::size_t d : shape)
    {
        if (count > r.remaining() / d)
        {
            throw FormatError("weights: payload of shape " + shape_to_string(shape) + " exceeds the container");
        }
        count *= d;
    }
    if (count > r.remaining() / sizeof(T))
    {
        throw FormatError("weights: payload of shape " + shape_to_string(shape) + " exceeds the container");
    }
    std::vector<T> data(shape_size(shape));
    for (T &v : data)
    {
        v = r.get<T>();
    }
    return Tensor<T>(std::move(shape), std::move(data));
}

} // namespace

void WeightsContainer::set(const std::string &name, AnyTensor tensor)
{
    for (auto &[n, t] : entries_)
    {
        if (n == name)
        {
            t = std::move(tensor);
            return;
        }
    }
    entries_.emplace_back(name, std::move(tensor));
}

bool WeightsContainer::contains(const std::string &name) const
{
    return std::any_of(entries_.begin(), entries_.end(), [&](const auto &e) { return e.first == name; });
}

const AnyTensor &WeightsContainer::at(const std::string &name) const
{
    for (const auto &[n, t] : entries_)
    {
        if (n == name)
        {
            return t;
        }
    }
    throw FormatError("weights: missing tensor '" + name + "'");
}

std::string WeightsContainer::serialize() const
{
    std::string out(kWeightsMagic, sizeof(kWeightsMagic));
    for (const auto &[name, tensor] : entries_)
    {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        std::visit(
            [&](const auto &t) {
                put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype()));
                put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
                for (const std::size_t d : t.shape())
                {
                    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
                }
                for (const auto v : t.data())
                {
                    put_le(out, v);
                }
            },
            tensor);
    }
    return out;
}

WeightsContainer WeightsContainer::deserialize(const std::string &bytes)
{
    if (bytes.size() < sizeof(kWeightsMagic) || std::memcmp(bytes.data(), kWeightsMagic, sizeof(kWeightsMagic)) != 0)
    {
        throw FormatError("weights: bad magic, expected SDNNW1");
    }
    Reader r(bytes);
    r.take(sizeof(kWeightsMagic));
    WeightsContainer c;
    while (!r.done())
    {
        const auto name_len = r.get<std::uint32_t>();
        std::string name = r.take(name_len);
        const auto dtype = r.get<std::uint8_t>();
        const auto ndim = r.get<std::uint32_t>();
        if (ndim > 8)
        {
            throw FormatError("weights: tensor '" + name + "' has implausible rank " + std::to_string(ndim));
        }
        Shape shape(ndim);
        for (auto &d : shape)
        {
            d = r.get<std::uint32_t>();
            if (d == 0)
            {
                throw FormatError("weights: tensor '" + name + "' has a zero extent");
            }
        }
        switch (static_cast<DType>(dtype))
        {
        case DType::f32:
            c.set(name, read_payload<float>(r, std::move(shape)));
            break;
        case DType::i8:
            c.set(name, read_payload<std::int8_t>(r, std::move(shape)));
            break;
        case DType::i32:
            c.set(name, read_payload<std::int32_t>(r, std::move(shape)));
            break;
        default:
            throw FormatError("weights: tensor '" + name + "' has unknown dtype " + std::to_string(dtype));
        }
    }
    return c;
}

void WeightsContainer::save(const std::filesystem::path &path) const
{
    write_file(path, serialize());
}

WeightsContainer WeightsContainer::load(const std::filesystem::path &path)
{
    try
    {
        return deserialize(read_file(path));
    }
    catch (const FormatError &e)
    {
        throw FormatError(path.string() + ": " + e.what());
    }
}

} // namespace sdmask
