#pragma once

#include <string>
#include <utility>
#include <vector>

#include "srp/ops.hpp"
#include "srp/rng.hpp"
#include "srp/srp.hpp"

namespace srp {

namespace detail {
template <typename T>
void fanin_uniform(TensorPtr<T>& t, int fan_in, RngStream& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (T& v : t->data) v = static_cast<T>((rng.uniform() * 2.0 - 1.0) * bound);
}
}  // namespace detail

template <typename T>
using NamedParams = std::vector<std::pair<std::string, TensorPtr<T>>>;

/// SE-style excitation: two affine maps with a bottleneck of C/r channels.
template <typename T>
struct OneBranchParams {
    TensorPtr<T> w1, b1, w2, b2;
    int channels = 0;
    int reduction = 16;

    OneBranchParams() = default;
    OneBranchParams(int c, int r, RngStream& rng) : channels(c), reduction(r) {
        const int mid = std::max(1, c / r);
        w1 = make_tensor<T>({c, mid}, true);
        b1 = make_tensor<T>({mid}, true);
        w2 = make_tensor<T>({mid, c}, true);
        b2 = make_tensor<T>({c}, true);
        detail::fanin_uniform(w1, c, rng);
        detail::fanin_uniform(w2, mid, rng);
    }

    void collect(NamedParams<T>& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".w1", w1);
        out.emplace_back(prefix + ".b1", b1);
        out.emplace_back(prefix + ".w2", w2);
        out.emplace_back(prefix + ".b2", b2);
    }
};

/// CMPE-SE-style excitation: the two branch descriptors are folded into a
/// 1-channel 2xC grid, mixed by a same-padded 3x3 conv with k filters, then
/// projected back to C gate logits by one affine map.
template <typename T>
struct DoubleBranchParams {
    TensorPtr<T> fold_kernel;  // (k,1,3,3)
    TensorPtr<T> head_w;       // (k*2*C, C)
    TensorPtr<T> head_b;       // (C)
    int channels = 0;
    int fold_filters = 4;

    DoubleBranchParams() = default;
    DoubleBranchParams(int c, int k, RngStream& rng) : channels(c), fold_filters(k) {
        fold_kernel = make_tensor<T>({k, 1, 3, 3}, true);
        head_w = make_tensor<T>({k * 2 * c, c}, true);
        head_b = make_tensor<T>({c}, true);
        detail::fanin_uniform(fold_kernel, 9, rng);
        detail::fanin_uniform(head_w, k * 2 * c, rng);
    }

    void collect(NamedParams<T>& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".fold_kernel", fold_kernel);
        out.emplace_back(prefix + ".head_w", head_w);
        out.emplace_back(prefix + ".head_b", head_b);
    }
};

/// Gate of the one-branch block: alpha = sigmoid(W2 relu(W1 z + b1) + b2)
/// with z pooled from the residual activation.
template <typename T>
TensorPtr<T> one_branch_gate(Tape<T>& tape, const TensorPtr<T>& u_res,
                             const OneBranchParams<T>& p, const SrpConfig& cfg, int block_index,
                             int total_blocks, Mode mode, const SrpDrawCtx& ctx) {
    if (u_res->dim(1) != p.channels)
        throw TensorError("one-branch attention expects " + std::to_string(p.channels) +
                          " channels, got " + std::to_string(u_res->dim(1)));
    SrpDrawCtx res_ctx = ctx;
    res_ctx.branch = 1;  // residual branch stream
    auto z = srp_pool(tape, u_res, cfg, block_index, total_blocks, mode, res_ctx);
    auto h = relu(tape, affine(tape, z, p.w1, p.b1));
    return sigmoid(tape, affine(tape, h, p.w2, p.b2));
}

template <typename T>
TensorPtr<T> one_branch_forward(Tape<T>& tape, const TensorPtr<T>& u_res,
                                const OneBranchParams<T>& p, const SrpConfig& cfg,
                                int block_index, int total_blocks, Mode mode,
                                const SrpDrawCtx& ctx, TensorPtr<T>* gate_out = nullptr) {
    auto alpha = one_branch_gate(tape, u_res, p, cfg, block_index, total_blocks, mode, ctx);
    if (gate_out) *gate_out = alpha;
    return mul_channelwise(tape, u_res, alpha);
}

/// Gate of the double-branch block. Identity and residual descriptors use
/// independent random streams (branch ids 0 and 1).
template <typename T>
TensorPtr<T> double_branch_gate(Tape<T>& tape, const TensorPtr<T>& u_id,
                                const TensorPtr<T>& u_res, const DoubleBranchParams<T>& p,
                                const SrpConfig& cfg, int block_index, int total_blocks,
                                Mode mode, const SrpDrawCtx& ctx) {
    if (u_id->shape != u_res->shape)
        throw TensorError("double-branch attention: identity/residual shape mismatch " +
                          shape_str(u_id->shape) + " vs " + shape_str(u_res->shape));
    if (u_res->dim(1) != p.channels)
        throw TensorError("double-branch attention expects " + std::to_string(p.channels) +
                          " channels, got " + std::to_string(u_res->dim(1)));
    SrpDrawCtx id_ctx = ctx;
    id_ctx.branch = 0;
    SrpDrawCtx res_ctx = ctx;
    res_ctx.branch = 1;
    auto z_id = srp_pool(tape, u_id, cfg, block_index, total_blocks, mode, id_ctx);
    auto z_r = srp_pool(tape, u_res, cfg, block_index, total_blocks, mode, res_ctx);
    auto grid = fold_pair(tape, z_id, z_r);                       // (N,1,2,C)
    auto mixed = conv2d(tape, grid, p.fold_kernel, 1, 1);         // (N,k,2,C)
    const int n = mixed->dim(0);
    auto flat = reshape(tape, mixed, {n, p.fold_filters * 2 * p.channels});
    return sigmoid(tape, affine(tape, flat, p.head_w, p.head_b));
}

template <typename T>
TensorPtr<T> double_branch_forward(Tape<T>& tape, const TensorPtr<T>& u_id,
                                   const TensorPtr<T>& u_res, const DoubleBranchParams<T>& p,
                                   const SrpConfig& cfg, int block_index, int total_blocks,
                                   Mode mode, const SrpDrawCtx& ctx,
                                   TensorPtr<T>* gate_out = nullptr) {
    auto alpha =
        double_branch_gate(tape, u_id, u_res, p, cfg, block_index, total_blocks, mode, ctx);
    if (gate_out) *gate_out = alpha;
    return mul_channelwise(tape, u_res, alpha);
}

}  // namespace srp
