// mgnet.hpp - region mask generator: patch embedding, one transformer
// block, a class-token attention scorer and a linear region head
//
// The scorer projects queries and keys for every token and forms the scaled
// score matrix Q K^T / sqrt(d) with a single head over the full embedding
// (no softmax). The class-token row over the patch tokens is the per-patch
// attention score, which the head maps to one logit per region.
#ifndef SDMASK_MGNET_HPP_
#define SDMASK_MGNET_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sdmask/event_stats.hpp"
#include "sdmask/masking.hpp"
#include "sdmask/tensor.hpp"

namespace sdmask
{

class WeightsContainer;

struct MGNetConfig
{
    std::size_t image{224};
    std::size_t patch{16};
    std::size_t channels{3};
    std::size_t embed{192};
    std::size_t heads{3};
    std::size_t mlp_ratio{4};

    [[nodiscard]] std::size_t grid() const { return image / patch; }
    [[nodiscard]] std::size_t patches() const { return grid() * grid(); }
    [[nodiscard]] std::size_t tokens() const { return patches() + 1; }
    [[nodiscard]] std::size_t patch_dim() const { return channels * patch * patch; }
    [[nodiscard]] std::size_t hidden() const { return embed * mlp_ratio; }
    void validate() const;
};

struct MGNetParams
{
    MGNetConfig config;

    TensorF patch_weight; // [E, C*p*p], patch flattened channel-major
    TensorF patch_bias;   // [E]
    TensorF cls_token;    // [E]
    TensorF pos_embed;    // [N+1, E]

    TensorF ln1_gamma, ln1_beta;
    TensorF qkv_weight, qkv_bias; // [3E, E], [3E]
    TensorF proj_weight, proj_bias;
    TensorF ln2_gamma, ln2_beta;
    TensorF fc1_weight, fc1_bias; // [hE, E]
    TensorF fc2_weight, fc2_bias; // [E, hE]

    TensorF scorer_gamma, scorer_beta;
    TensorF query_weight, query_bias; // [E, E]
    TensorF key_weight, key_bias;     // [E, E]

    TensorF head_weight; // [N, N]
    TensorF head_bias;   // [N]

    // Throws ConfigError when any tensor disagrees with `config`.
    void validate() const;
};

MGNetParams init_mgnet_params(const MGNetConfig &config, std::uint64_t seed);

// Stores under "<prefix>..." names; the head count goes in "<prefix>heads".
void store_mgnet_params(WeightsContainer &container, const MGNetParams &params, const std::string &prefix = "mgnet.");
MGNetParams load_mgnet_params(const WeightsContainer &container, const std::string &prefix = "mgnet.");
bool has_mgnet_params(const WeightsContainer &container, const std::string &prefix = "mgnet.");

// q [d] against keys [n, d]: q . k_j / sqrt(d).
TensorF cls_attention_scores(const TensorF &query, const TensorF &keys);

struct MGNetOutput
{
    TensorF cls_attention; // [N]
    RegionScores logits;   // [grid, grid]
};

// frame: [C, image, image], already downsampled and normalised.
MGNetOutput mgnet_forward(const TensorF &frame, const MGNetParams &params);

std::vector<LayerMacs> count_mgnet_macs(const MGNetConfig &config);

// Linear region head trained in double precision.
struct RegionHead
{
    std::size_t regions{0};
    std::vector<double> weight; // [regions, regions], row = output region
    std::vector<double> bias;   // [regions]

    bool operator==(const RegionHead &) const = default;
};

RegionHead init_region_head(std::size_t regions, std::uint64_t seed, double init_scale = 0.01);
RegionHead region_head_from(const MGNetParams &params);
void assign_region_head(MGNetParams &params, const RegionHead &head);

// features [samples, regions]; labels [samples, regions] with 0/1 entries.
struct HeadDataset
{
    std::vector<std::vector<double>> features;
    std::vector<std::vector<double>> labels;
};

HeadDataset make_head_dataset(const std::vector<TensorF> &cls_attention, const std::vector<RegionMask> &labels);

// Mean binary cross-entropy over samples and regions.
double region_head_loss(const RegionHead &head, const HeadDataset &data);

struct RegionHeadGradient
{
    std::vector<double> weight;
    std::vector<double> bias;
};

RegionHeadGradient region_head_gradient(const RegionHead &head, const HeadDataset &data);

struct HeadTrainingOptions
{
    std::size_t epochs{200};
    double learning_rate{0.1};
};

struct HeadTrainingResult
{
    RegionHead head;
    double final_loss{0.0};
    std::vector<double> loss_history; // loss before each step
};

// Full-batch gradient descent; throws Error on a non-finite loss.
HeadTrainingResult train_region_head(const HeadDataset &data, RegionHead initial, const HeadTrainingOptions &options);

} // namespace sdmask

#endif
