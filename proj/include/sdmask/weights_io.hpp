// weights_io.hpp - the SDNNW1 tensor container
//
// Layout (all integers little-endian):
//   magic   "SDNNW1\0" (7 bytes)
//   repeated until end of file:
//     u32 name length, UTF-8 name bytes
//     u8  dtype (0 = f32, 1 = i8, 2 = i32)
//     u32 ndim, ndim x u32 dims
//     raw little-endian payload, product(dims) elements
//
// One container holds the detector ("det."), quantisation scales ("quant.")
// and mask generator ("mgnet.") tensors, distinguished by name prefix.
#ifndef SDMASK_WEIGHTS_IO_HPP_
#define SDMASK_WEIGHTS_IO_HPP_

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sdmask/tensor.hpp"

namespace sdmask
{

inline constexpr char kWeightsMagic[7] = {'S', 'D', 'N', 'N', 'W', '1', '\0'};

class WeightsContainer
{
public:
    // Replaces an existing entry in place, otherwise appends.
    void set(const std::string &name, AnyTensor tensor);
    [[nodiscard]] bool contains(const std::string &name) const;
    [[nodiscard]] const AnyTensor &at(const std::string &name) const;

    template <typename T> [[nodiscard]] const Tensor<T> &get(const std::string &name) const
    {
        const AnyTensor &t = at(name);
        if (const auto *p = std::get_if<Tensor<T>>(&t))
        {
            return *p;
        }
        throw FormatError("weights: tensor '" + name + "' has unexpected dtype");
    }

    [[nodiscard]] const std::vector<std::pair<std::string, AnyTensor>> &entries() const noexcept { return entries_; }

    [[nodiscard]] std::string serialize() const;
    static WeightsContainer deserialize(const std::string &bytes);

    void save(const std::filesystem::path &path) const;
    static WeightsContainer load(const std::filesystem::path &path);

private:
    std::vector<std::pair<std::string, AnyTensor>> entries_;
};

} // namespace sdmask

#endif
