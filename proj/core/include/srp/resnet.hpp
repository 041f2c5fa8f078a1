#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "srp/attention.hpp"
#include "srp/ops.hpp"
#include "srp/srp.hpp"

namespace srp {

enum class AttentionKind { None, One, Double };

/// Small CIFAR-style residual classifier: 3x3 stem, three stages of basic
/// blocks at the configured widths (stride 2 between stages), global average
/// pool, one affine head. depth = 6n+2.
struct NetworkConfig {
    int depth = 14;
    std::vector<int> widths = {16, 32, 64};
    AttentionKind attention = AttentionKind::One;
    SrpConfig srp;
    int classes = 10;
    int reduction = 16;
    int fold_filters = 4;
    int input_channels = 3;

    int blocks_per_stage() const {
        if (depth < 8 || (depth - 2) % 6 != 0)
            throw ConfigError("model.depth must be 6n+2 with n >= 1, got " +
                              std::to_string(depth));
        return (depth - 2) / 6;
    }
    int total_attention_blocks() const {
        return static_cast<int>(widths.size()) * blocks_per_stage();
    }
};

/// Named activations captured during a forward pass (Grad-CAM, feature-map
/// dumps, descriptor diagnostics).
template <typename T>
struct Probe {
    std::map<std::string, TensorPtr<T>> activations;
    void put(const std::string& name, const TensorPtr<T>& t) { activations[name] = t; }
};

template <typename T>
struct ConvBn {
    TensorPtr<T> kernel;
    TensorPtr<T> gamma, beta;
    std::shared_ptr<BnStats<T>> stats;
    int stride = 1, pad = 1;

    ConvBn() = default;
    ConvBn(int in_c, int out_c, int ksize, int stride_, int pad_, RngStream& rng)
        : stride(stride_), pad(pad_) {
        kernel = make_tensor<T>({out_c, in_c, ksize, ksize}, true);
        detail::fanin_uniform(kernel, in_c * ksize * ksize, rng);
        gamma = make_tensor<T>({out_c}, std::vector<T>(out_c, T(1)));
        gamma->ensure_grad();
        beta = make_tensor<T>({out_c}, true);
        stats = std::make_shared<BnStats<T>>(out_c);
    }

    TensorPtr<T> forward(Tape<T>& tape, const TensorPtr<T>& x, Mode mode) const {
        return batchnorm2d(tape, conv2d(tape, x, kernel, stride, pad), gamma, beta, *stats,
                           mode);
    }

    void collect(NamedParams<T>& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".kernel", kernel);
        out.emplace_back(prefix + ".gamma", gamma);
        out.emplace_back(prefix + ".beta", beta);
    }
    void collect_stats(NamedParams<T>& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".running_mean", stats->mean);
        out.emplace_back(prefix + ".running_var", stats->var);
    }
};

/// Basic residual block (conv-bn-relu-conv-bn) with optional channel
/// attention on the residual branch; downsampling blocks project the
/// identity with a strided 1x1 conv + bn.
template <typename T>
struct BasicBlock {
    ConvBn<T> conv1, conv2;
    std::optional<ConvBn<T>> proj;
    std::optional<OneBranchParams<T>> one;
    std::optional<DoubleBranchParams<T>> dbl;
    int ordinal = 0;  // attention-block index across the whole network
    std::string name;

    BasicBlock() = default;
    BasicBlock(int in_c, int out_c, int stride, AttentionKind kind, int reduction,
               int fold_filters, int ordinal_, std::string name_, RngStream& rng)
        : ordinal(ordinal_), name(std::move(name_)) {
        conv1 = ConvBn<T>(in_c, out_c, 3, stride, 1, rng);
        conv2 = ConvBn<T>(out_c, out_c, 3, 1, 1, rng);
        if (stride != 1 || in_c != out_c) proj.emplace(in_c, out_c, 1, stride, 0, rng);
        if (kind == AttentionKind::One) one.emplace(out_c, reduction, rng);
        if (kind == AttentionKind::Double) dbl.emplace(out_c, fold_filters, rng);
    }

    TensorPtr<T> forward(Tape<T>& tape, const TensorPtr<T>& x, const SrpConfig& cfg,
                         int total_blocks, Mode mode, const SrpDrawCtx& ctx,
                         Probe<T>* probe) const {
        auto h = relu(tape, conv1.forward(tape, x, mode));
        if (probe) probe->put(name + ".conv1", h);
        auto u_res = conv2.forward(tape, h, mode);
        auto u_id = proj ? proj->forward(tape, x, mode) : x;
        if (probe) {
            probe->put(name + ".conv2", u_res);
            probe->put(name + ".residual", u_res);
            probe->put(name + ".identity", u_id);
        }
        TensorPtr<T> gated = u_res;
        TensorPtr<T> gate;
        if (one)
            gated = one_branch_forward(tape, u_res, *one, cfg, ordinal, total_blocks, mode, ctx,
                                       probe ? &gate : nullptr);
        else if (dbl)
            gated = double_branch_forward(tape, u_id, u_res, *dbl, cfg, ordinal, total_blocks,
                                          mode, ctx, probe ? &gate : nullptr);
        if (probe && gate) probe->put(name + ".gate", gate);
        auto out = relu(tape, add(tape, u_id, gated));
        if (probe) probe->put(name + ".out", out);
        return out;
    }

    void collect(NamedParams<T>& out) const {
        conv1.collect(out, name + ".conv1");
        conv2.collect(out, name + ".conv2");
        if (proj) proj->collect(out, name + ".proj");
        if (one) one->collect(out, name + ".attn");
        if (dbl) dbl->collect(out, name + ".attn");
    }
    void collect_stats(NamedParams<T>& out) const {
        conv1.collect_stats(out, name + ".conv1");
        conv2.collect_stats(out, name + ".conv2");
        if (proj) proj->collect_stats(out, name + ".proj");
    }
};

template <typename T>
class ResNet {
public:
    explicit ResNet(const NetworkConfig& cfg, std::uint64_t init_seed = 1)
        : cfg_(cfg) {
        cfg_.srp.validate();
        const int n = cfg_.blocks_per_stage();
        RngStream rng = make_stream(init_seed, 0xA11C, 0, 0);
        stem_ = ConvBn<T>(cfg_.input_channels, cfg_.widths[0], 3, 1, 1, rng);
        int in_c = cfg_.widths[0];
        int ordinal = 0;
        for (size_t s = 0; s < cfg_.widths.size(); ++s) {
            const int out_c = cfg_.widths[s];
            for (int b = 0; b < n; ++b) {
                const int stride = (s > 0 && b == 0) ? 2 : 1;
                std::string name =
                    "stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
                blocks_.emplace_back(in_c, out_c, stride, cfg_.attention, cfg_.reduction,
                                     cfg_.fold_filters, ordinal++, std::move(name), rng);
                in_c = out_c;
            }
        }
        fc_w_ = make_tensor<T>({in_c, cfg_.classes}, true);
        detail::fanin_uniform(fc_w_, in_c, rng);
        fc_b_ = make_tensor<T>({cfg_.classes}, true);
    }

    /// Logits for a batch of images (N, C_in, 32, 32).
    TensorPtr<T> forward(Tape<T>& tape, const TensorPtr<T>& x, Mode mode, const SrpDrawCtx& ctx,
                         Probe<T>* probe = nullptr) const {
        auto h = relu(tape, stem_.forward(tape, x, mode));
        if (probe) probe->put("stem", h);
        for (const auto& blk : blocks_)
            h = blk.forward(tape, h, cfg_.srp, cfg_.total_attention_blocks(), mode, ctx, probe);
        auto z = gap(tape, h);
        if (probe) probe->put("pool", z);
        return affine(tape, z, fc_w_, fc_b_);
    }

    NamedParams<T> parameters() const {
        NamedParams<T> out;
        stem_.collect(out, "stem");
        for (const auto& blk : blocks_) blk.collect(out);
        out.emplace_back("fc.w", fc_w_);
        out.emplace_back("fc.b", fc_b_);
        return out;
    }

    /// Parameters plus batch-norm running stats; everything a checkpoint holds.
    NamedParams<T> state_tensors() const {
        NamedParams<T> out = parameters();
        stem_.collect_stats(out, "stem");
        for (const auto& blk : blocks_) blk.collect_stats(out);
        return out;
    }

    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (const auto& [name, t] : parameters()) n += t->numel();
        return n;
    }

    std::vector<std::string> conv_layer_names() const {
        std::vector<std::string> names{"stem"};
        for (const auto& blk : blocks_) {
            names.push_back(blk.name + ".conv1");
            names.push_back(blk.name + ".conv2");
        }
        return names;
    }

    const NetworkConfig& config() const { return cfg_; }
    const std::vector<BasicBlock<T>>& blocks() const { return blocks_; }

private:
    NetworkConfig cfg_;
    ConvBn<T> stem_;
    std::vector<BasicBlock<T>> blocks_;
    TensorPtr<T> fc_w_, fc_b_;
};

}  // namespace srp
