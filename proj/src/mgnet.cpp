#include "sdmask/mgnet.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "sdmask/rng.hpp"
#include "sdmask/tensor_ops.hpp"
#include "sdmask/weights_io.hpp"

namespace sdmask
{

void MGNetConfig::validate() const
{
    if (patch == 0 || image % patch != 0)
    {
        throw ConfigError("mgnet: patch size must divide the image size");
    }
    if (embed == 0 || heads == 0 || embed % heads != 0)
    {
        throw ConfigError("mgnet: embedding length must be a positive multiple of the head count");
    }
    if (channels == 0 || mlp_ratio == 0)
    {
        throw ConfigError("mgnet: channels and mlp ratio must be positive");
    }
}

namespace
{

void expect(const TensorF &t, const Shape &shape, const char *name)
{
    if (t.shape() != shape)
    {
        throw ConfigError(std::string("mgnet: ") + name + " has shape " + shape_to_string(t.shape()) + ", expected " +
                          shape_to_string(shape));
    }
}

TensorF random_tensor(Rng &rng, Shape shape, double stddev)
{
    TensorF t(std::move(shape));
    for (float &v : t.data())
    {
        v = static_cast<float>(rng.normal(0.0, stddev));
    }
    return t;
}

TensorF layer_norm(const TensorF &x, const TensorF &gamma, const TensorF &beta)
{
    constexpr double eps = 1e-6;
    const std::size_t rows = x.dim(0);
    const std::size_t cols = x.dim(1);
    TensorF out(x.shape());
    for (std::size_t r = 0; r < rows; ++r)
    {
        const float *xr = x.data().data() + r * cols;
        double mean = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
        {
            mean += xr[c];
        }
        mean /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
        {
            const double d = xr[c] - mean;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < cols; ++c)
        {
            out[r * cols + c] = static_cast<float>((xr[c] - mean) * inv * gamma[c] + beta[c]);
        }
    }
    return out;
}

float gelu(float x)
{
    return static_cast<float>(0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)));
}

// Standard multi-head self-attention with softmax, as used inside the block.
TensorF self_attention(const TensorF &h, const MGNetParams &p)
{
    const std::size_t tokens = h.dim(0);
    const std::size_t e = p.config.embed;
    const std::size_t heads = p.config.heads;
    const std::size_t dh = e / heads;
    const TensorF qkv = linear(h, p.qkv_weight, p.qkv_bias); // [T, 3E]: q | k | v
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    TensorF mixed({tokens, e});
    std::vector<double> row(tokens);
    for (std::size_t hd = 0; hd < heads; ++hd)
    {
        const std::size_t qo = hd * dh;
        const std::size_t ko = e + hd * dh;
        const std::size_t vo = 2 * e + hd * dh;
        for (std::size_t i = 0; i < tokens; ++i)
        {
            double max_s = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < tokens; ++j)
            {
                float s = 0.0F;
                for (std::size_t d = 0; d < dh; ++d)
                {
                    s += qkv[i * 3 * e + qo + d] * qkv[j * 3 * e + ko + d];
                }
                row[j] = static_cast<double>(s) * scale;
                max_s = std::max(max_s, row[j]);
            }
            double z = 0.0;
            for (std::size_t j = 0; j < tokens; ++j)
            {
                row[j] = std::exp(row[j] - max_s);
                z += row[j];
            }
            for (std::size_t d = 0; d < dh; ++d)
            {
                double acc = 0.0;
                for (std::size_t j = 0; j < tokens; ++j)
                {
                    acc += row[j] * qkv[j * 3 * e + vo + d];
                }
                mixed[i * e + qo + d] = static_cast<float>(acc / z);
            }
        }
    }
    return linear(mixed, p.proj_weight, p.proj_bias);
}

void add_in_place(TensorF &x, const TensorF &y)
{
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        x[i] += y[i];
    }
}

} // namespace

void MGNetParams::validate() const
{
    const auto &c = config;
    c.validate();
    const std::size_t e = c.embed;
    const std::size_t n = c.patches();
    expect(patch_weight, {e, c.patch_dim()}, "patch_weight");
    expect(patch_bias, {e}, "patch_bias");
    expect(cls_token, {e}, "cls_token");
    expect(pos_embed, {c.tokens(), e}, "pos_embed");
    expect(ln1_gamma, {e}, "ln1_gamma");
    expect(ln1_beta, {e}, "ln1_beta");
    expect(qkv_weight, {3 * e, e}, "qkv_weight");
    expect(qkv_bias, {3 * e}, "qkv_bias");
    expect(proj_weight, {e, e}, "proj_weight");
    expect(proj_bias, {e}, "proj_bias");
    expect(ln2_gamma, {e}, "ln2_gamma");
    expect(ln2_beta, {e}, "ln2_beta");
    expect(fc1_weight, {c.hidden(), e}, "fc1_weight");
    expect(fc1_bias, {c.hidden()}, "fc1_bias");
    expect(fc2_weight, {e, c.hidden()}, "fc2_weight");
    expect(fc2_bias, {e}, "fc2_bias");
    expect(scorer_gamma, {e}, "scorer_gamma");
    expect(scorer_beta, {e}, "scorer_beta");
    expect(query_weight, {e, e}, "query_weight");
    expect(query_bias, {e}, "query_bias");
    expect(key_weight, {e, e}, "key_weight");
    expect(key_bias, {e}, "key_bias");
    expect(head_weight, {n, n}, "head_weight");
    expect(head_bias, {n}, "head_bias");
}

MGNetParams init_mgnet_params(const MGNetConfig &config, std::uint64_t seed)
{
    config.validate();
    Rng rng(seed);
    const std::size_t e = config.embed;
    const std::size_t n = config.patches();
    constexpr double sd = 0.02;
    MGNetParams p;
    p.config = config;
    p.patch_weight = random_tensor(rng, {e, config.patch_dim()}, sd);
    p.patch_bias = TensorF({e});
    p.cls_token = random_tensor(rng, {e}, sd);
    p.pos_embed = random_tensor(rng, {config.tokens(), e}, sd);
    p.ln1_gamma = TensorF({e}, 1.0F);
    p.ln1_beta = TensorF({e});
    p.qkv_weight = random_tensor(rng, {3 * e, e}, sd);
    p.qkv_bias = TensorF({3 * e});
    p.proj_weight = random_tensor(rng, {e, e}, sd);
    p.proj_bias = TensorF({e});
    p.ln2_gamma = TensorF({e}, 1.0F);
    p.ln2_beta = TensorF({e});
    p.fc1_weight = random_tensor(rng, {config.hidden(), e}, sd);
    p.fc1_bias = TensorF({config.hidden()});
    p.fc2_weight = random_tensor(rng, {e, config.hidden()}, sd);
    p.fc2_bias = TensorF({e});
    p.scorer_gamma = TensorF({e}, 1.0F);
    p.scorer_beta = TensorF({e});
    p.query_weight = random_tensor(rng, {e, e}, sd);
    p.query_bias = TensorF({e});
    p.key_weight = random_tensor(rng, {e, e}, sd);
    p.key_bias = TensorF({e});
    p.head_weight = random_tensor(rng, {n, n}, sd);
    p.head_bias = TensorF({n});
    return p;
}

namespace
{

template <typename F> void for_each_tensor(MGNetParams &p, F f)
{
    f("patch_embed.weight", p.patch_weight);
    f("patch_embed.bias", p.patch_bias);
    f("cls_token", p.cls_token);
    f("pos_embed", p.pos_embed);
    f("block.norm1.weight", p.ln1_gamma);
    f("block.norm1.bias", p.ln1_beta);
    f("block.attn.qkv.weight", p.qkv_weight);
    f("block.attn.qkv.bias", p.qkv_bias);
    f("block.attn.proj.weight", p.proj_weight);
    f("block.attn.proj.bias", p.proj_bias);
    f("block.norm2.weight", p.ln2_gamma);
    f("block.norm2.bias", p.ln2_beta);
    f("block.mlp.fc1.weight", p.fc1_weight);
    f("block.mlp.fc1.bias", p.fc1_bias);
    f("block.mlp.fc2.weight", p.fc2_weight);
    f("block.mlp.fc2.bias", p.fc2_bias);
    f("scorer.norm.weight", p.scorer_gamma);
    f("scorer.norm.bias", p.scorer_beta);
    f("scorer.query.weight", p.query_weight);
    f("scorer.query.bias", p.query_bias);
    f("scorer.key.weight", p.key_weight);
    f("scorer.key.bias", p.key_bias);
    f("head.weight", p.head_weight);
    f("head.bias", p.head_bias);
}

} // namespace

void store_mgnet_params(WeightsContainer &container, const MGNetParams &params, const std::string &prefix)
{
    params.validate();
    MGNetParams copy = params;
    for_each_tensor(copy, [&](const char *name, TensorF &t) { container.set(prefix + name, t); });
    container.set(prefix + "heads", TensorI32({1}, {static_cast<std::int32_t>(params.config.heads)}));
}

bool has_mgnet_params(const WeightsContainer &container, const std::string &prefix)
{
    return container.contains(prefix + "patch_embed.weight");
}

MGNetParams load_mgnet_params(const WeightsContainer &container, const std::string &prefix)
{
    MGNetParams p;
    for_each_tensor(p, [&](const char *name, TensorF &t) { t = container.get<float>(prefix + name); });
    const auto &heads = container.get<std::int32_t>(prefix + "heads");
    if (heads.size() != 1 || heads[0] <= 0)
    {
        throw FormatError("weights: " + prefix + "heads must hold one positive value");
    }
    MGNetConfig c;
    c.heads = static_cast<std::size_t>(heads[0]);
    c.embed = p.patch_weight.dim(0);
    c.channels = 3;
    const std::size_t patch_area = p.patch_weight.dim(1) / c.channels;
    c.patch = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(patch_area))));
    const std::size_t grid = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(p.head_bias.dim(0)))));
    c.image = grid * c.patch;
    c.mlp_ratio = p.fc1_weight.dim(0) / c.embed;
    p.config = c;
    p.validate();
    return p;
}

TensorF cls_attention_scores(const TensorF &query, const TensorF &keys)
{
    if (query.rank() != 1 || keys.rank() != 2 || keys.dim(1) != query.dim(0))
    {
        throw ConfigError("cls_attention_scores: query " + shape_to_string(query.shape()) + " vs keys " +
                          shape_to_string(keys.shape()));
    }
    const std::size_t n = keys.dim(0);
    const std::size_t d = query.dim(0);
    const float inv_sqrt_d = static_cast<float>(1.0 / std::sqrt(static_cast<double>(d)));
    TensorF out({n});
    for (std::size_t j = 0; j < n; ++j)
    {
        float s = 0.0F;
        for (std::size_t k = 0; k < d; ++k)
        {
            s += query[k] * keys[j * d + k];
        }
        out[j] = s * inv_sqrt_d;
    }
    return out;
}

MGNetOutput mgnet_forward(const TensorF &frame, const MGNetParams &params)
{
    const auto &c = params.config;
    if (frame.shape() != Shape{c.channels, c.image, c.image})
    {
        throw ConfigError("mgnet_forward: frame " + shape_to_string(frame.shape()) + " does not match " +
                          shape_to_string({c.channels, c.image, c.image}));
    }
    params.validate();
    const std::size_t e = c.embed;
    const std::size_t n = c.patches();
    const std::size_t g = c.grid();
    const std::size_t p = c.patch;

    TensorF patches({n, c.patch_dim()});
    for (std::size_t py = 0; py < g; ++py)
    {
        for (std::size_t px = 0; px < g; ++px)
        {
            float *dst = patches.data().data() + (py * g + px) * c.patch_dim();
            for (std::size_t ch = 0; ch < c.channels; ++ch)
            {
                for (std::size_t y = 0; y < p; ++y)
                {
                    for (std::size_t x = 0; x < p; ++x)
                    {
                        *dst++ = frame(ch, py * p + y, px * p + x);
                    }
                }
            }
        }
    }
    const TensorF embedded = linear(patches, params.patch_weight, params.patch_bias);

    TensorF x({c.tokens(), e});
    for (std::size_t k = 0; k < e; ++k)
    {
        x[k] = params.cls_token[k] + params.pos_embed[k];
    }
    for (std::size_t t = 0; t < n; ++t)
    {
        for (std::size_t k = 0; k < e; ++k)
        {
            x[(t + 1) * e + k] = embedded[t * e + k] + params.pos_embed[(t + 1) * e + k];
        }
    }

    add_in_place(x, self_attention(layer_norm(x, params.ln1_gamma, params.ln1_beta), params));
    TensorF hidden = linear(layer_norm(x, params.ln2_gamma, params.ln2_beta), params.fc1_weight, params.fc1_bias);
    for (float &v : hidden.data())
    {
        v = gelu(v);
    }
    add_in_place(x, linear(hidden, params.fc2_weight, params.fc2_bias));

    const TensorF z = layer_norm(x, params.scorer_gamma, params.scorer_beta);
    const TensorF q = linear(z, params.query_weight, params.query_bias);
    const TensorF k = linear(z, params.key_weight, params.key_bias);

    // Full token-by-token score matrix; only the class-token row over the
    // patch tokens feeds the head.
    const std::size_t tokens = c.tokens();
    TensorF scores({tokens, tokens});
    for (std::size_t i = 0; i < tokens; ++i)
    {
        const TensorF qi({e}, std::vector<float>(q.data().begin() + static_cast<std::ptrdiff_t>(i * e),
                                                 q.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * e)));
        const TensorF row = cls_attention_scores(qi, k);
        std::copy(row.data().begin(), row.data().end(), scores.data().begin() + static_cast<std::ptrdiff_t>(i * tokens));
    }
    MGNetOutput out;
    out.cls_attention = TensorF({n}, std::vector<float>(scores.data().begin() + 1, scores.data().begin() + 1 +
                                                                                         static_cast<std::ptrdiff_t>(n)));
    const TensorF logits = linear(out.cls_attention.reshaped({1, n}), params.head_weight, params.head_bias);
    out.logits = logits.reshaped({g, g});
    return out;
}

std::vector<LayerMacs> count_mgnet_macs(const MGNetConfig &c)
{
    c.validate();
    const std::uint64_t e = c.embed;
    const std::uint64_t n = c.patches();
    const std::uint64_t t = c.tokens();
    const std::uint64_t h = c.hidden();
    return {
        {"patch_embed", n * c.patch_dim() * e},
        {"block.attn.qkv", t * e * 3 * e},
        {"block.attn.scores", t * t * e},
        {"block.attn.values", t * t * e},
        {"block.attn.proj", t * e * e},
        {"block.mlp.fc1", t * e * h},
        {"block.mlp.fc2", t * h * e},
        {"scorer.qk", t * e * 2 * e},
        {"scorer.scores", t * t * e},
        {"head", n * n},
    };
}

RegionHead init_region_head(std::size_t regions, std::uint64_t seed, double init_scale)
{
    Rng rng(seed);
    RegionHead h{regions, std::vector<double>(regions * regions), std::vector<double>(regions, 0.0)};
    for (double &w : h.weight)
    {
        w = rng.uniform(-init_scale, init_scale);
    }
    return h;
}

RegionHead region_head_from(const MGNetParams &params)
{
    const std::size_t n = params.head_bias.dim(0);
    RegionHead h{n, {}, {}};
    h.weight.assign(params.head_weight.data().begin(), params.head_weight.data().end());
    h.bias.assign(params.head_bias.data().begin(), params.head_bias.data().end());
    return h;
}

void assign_region_head(MGNetParams &params, const RegionHead &head)
{
    if (head.regions != params.config.patches())
    {
        throw ConfigError("region head size does not match the mask generator");
    }
    for (std::size_t i = 0; i < head.weight.size(); ++i)
    {
        params.head_weight[i] = static_cast<float>(head.weight[i]);
    }
    for (std::size_t i = 0; i < head.bias.size(); ++i)
    {
        params.head_bias[i] = static_cast<float>(head.bias[i]);
    }
}

HeadDataset make_head_dataset(const std::vector<TensorF> &cls_attention, const std::vector<RegionMask> &labels)
{
    if (cls_attention.size() != labels.size())
    {
        throw ConfigError("head dataset: feature and label counts differ");
    }
    HeadDataset d;
    for (std::size_t s = 0; s < labels.size(); ++s)
    {
        if (cls_attention[s].size() != labels[s].size())
        {
            throw ConfigError("head dataset: feature length does not match the region grid");
        }
        d.features.emplace_back(cls_attention[s].data().begin(), cls_attention[s].data().end());
        std::vector<double> y(labels[s].size());
        for (std::size_t i = 0; i < y.size(); ++i)
        {
            y[i] = labels[s].kept(i) ? 1.0 : 0.0;
        }
        d.labels.push_back(std::move(y));
    }
    return d;
}

namespace
{

void check_dataset(const RegionHead &head, const HeadDataset &data)
{
    if (data.features.size() != data.labels.size() || data.features.empty())
    {
        throw ConfigError("head training needs a nonempty dataset with one label row per feature row");
    }
    for (std::size_t s = 0; s < data.features.size(); ++s)
    {
        if (data.features[s].size() != head.regions || data.labels[s].size() != head.regions)
        {
            throw ConfigError("head training: sample " + std::to_string(s) + " has the wrong length");
        }
    }
}

double logit(const RegionHead &head, const std::vector<double> &f, std::size_t o)
{
    const double *w = head.weight.data() + o * head.regions;
    double z = head.bias[o];
    for (std::size_t i = 0; i < head.regions; ++i)
    {
        z += w[i] * f[i];
    }
    return z;
}

} // namespace

double region_head_loss(const RegionHead &head, const HeadDataset &data)
{
    check_dataset(head, data);
    double total = 0.0;
    for (std::size_t s = 0; s < data.features.size(); ++s)
    {
        for (std::size_t o = 0; o < head.regions; ++o)
        {
            const double z = logit(head, data.features[s], o);
            const double y = data.labels[s][o];
            total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::fabs(z)));
        }
    }
    return total / static_cast<double>(data.features.size() * head.regions);
}

RegionHeadGradient region_head_gradient(const RegionHead &head, const HeadDataset &data)
{
    check_dataset(head, data);
    const std::size_t r = head.regions;
    RegionHeadGradient g{std::vector<double>(r * r), std::vector<double>(r)};
    const double norm = 1.0 / static_cast<double>(data.features.size() * r);
    for (std::size_t s = 0; s < data.features.size(); ++s)
    {
        const auto &f = data.features[s];
        for (std::size_t o = 0; o < r; ++o)
        {
            const double dz = (sigmoid(logit(head, f, o)) - data.labels[s][o]) * norm;
            g.bias[o] += dz;
            double *gw = g.weight.data() + o * r;
            for (std::size_t i = 0; i < r; ++i)
            {
                gw[i] += dz * f[i];
            }
        }
    }
    return g;
}

HeadTrainingResult train_region_head(const HeadDataset &data, RegionHead initial, const HeadTrainingOptions &options)
{
    HeadTrainingResult result{std::move(initial), 0.0, {}};
    RegionHead &head = result.head;
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch)
    {
        const double loss = region_head_loss(head, data);
        if (!std::isfinite(loss))
        {
            throw Error("head training: non-finite loss at step " + std::to_string(epoch));
        }
        result.loss_history.push_back(loss);
        const RegionHeadGradient g = region_head_gradient(head, data);
        for (std::size_t i = 0; i < head.weight.size(); ++i)
        {
            head.weight[i] -= options.learning_rate * g.weight[i];
        }
        for (std::size_t i = 0; i < head.bias.size(); ++i)
        {
            head.bias[i] -= options.learning_rate * g.bias[i];
        }
    }
    result.final_loss = region_head_loss(head, data);
    if (!std::isfinite(result.final_loss))
    {
        throw Error("head training: non-finite final loss");
    }
    return result;
}

} // namespace sdmask
