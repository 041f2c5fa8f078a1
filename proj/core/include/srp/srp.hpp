#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "srp/ops.hpp"
#include "srp/rng.hpp"
#include "srp/tensor.hpp"

namespace srp {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SrpMode { Off, SS, MS };
enum class SrpSchedule { Fixed, LinearDepth };

/// Stochastic region pooling hyper-parameters. Defaults: lambda 0.8 for
/// single-square, 0.6 with M = 5 for multi-square, linear depth schedule.
struct SrpConfig {
    SrpMode mode = SrpMode::Off;
    double lambda_target = 0.8;
    int regions = 5;
    SrpSchedule schedule = SrpSchedule::LinearDepth;

    static SrpConfig off() { return {}; }
    static SrpConfig single_square(double lambda = 0.8,
                                   SrpSchedule sched = SrpSchedule::LinearDepth) {
        return {SrpMode::SS, lambda, 1, sched};
    }
    static SrpConfig multi_square(double lambda = 0.6, int m = 5,
                                  SrpSchedule sched = SrpSchedule::LinearDepth) {
        return {SrpMode::MS, lambda, m, sched};
    }

    int effective_regions() const { return mode == SrpMode::SS ? 1 : regions; }

    void validate() const {
        if (!(lambda_target > 0.0 && lambda_target <= 1.0))
            throw ConfigError("srp.lambda must lie in (0,1], got " +
                              std::to_string(lambda_target));
        if (regions < 1)
            throw ConfigError("srp.regions must be >= 1, got " + std::to_string(regions));
    }
};

/// Region side lengths: floor(lambda*H + 1/2), clamped into [1, H].
/// The clamp below 1 covers lambda*H < 0.5 where the formula rounds to 0.
inline std::pair<int, int> region_dims(int h, int w, double lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0))
        throw ConfigError("scale ratio must lie in (0,1], got " + std::to_string(lambda));
    auto side = [](int extent, double lam) {
        int s = static_cast<int>(std::floor(lam * extent + 0.5));
        return std::max(1, std::min(s, extent));
    };
    return {side(h, lambda), side(w, lambda)};
}

/// Per-block scale ratio: linear from 1 at the first attention block down to
/// lambda_target at the last. A single block uses lambda_target directly.
inline double scheduled_lambda(int block_index, int total_blocks, double lambda_target,
                               SrpSchedule schedule = SrpSchedule::LinearDepth) {
    if (schedule == SrpSchedule::Fixed) return lambda_target;
    if (total_blocks <= 1 || block_index == total_blocks - 1) return lambda_target;
    return 1.0 - (1.0 - lambda_target) * static_cast<double>(block_index) /
                     static_cast<double>(total_blocks - 1);
}

/// M independent uniform draws of top-left corners, with replacement.
/// Valid rows are 0..H-H', valid cols 0..W-W' (0-based).
inline std::vector<std::pair<int, int>> sample_positions(RngStream& rng, int h, int w, int hp,
                                                         int wp, int m) {
    if (hp > h || wp > w) throw ConfigError("region exceeds feature map extents");
    const std::uint32_t rows = static_cast<std::uint32_t>(h - hp + 1);
    const std::uint32_t cols = static_cast<std::uint32_t>(w - wp + 1);
    std::vector<std::pair<int, int>> pos;
    pos.reserve(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
        int r = static_cast<int>(rng.uniform_int(rows));
        int c = static_cast<int>(rng.uniform_int(cols));
        pos.emplace_back(r, c);
    }
    return pos;
}

/// Union of the sampled squares with cached cardinality.
struct RegionMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> member;  // H*W, row-major
    int cardinality = 0;

    bool contains(int i, int j) const {
        return member[static_cast<size_t>(i) * width + j] != 0;
    }
};

inline RegionMask build_union_mask(const std::vector<std::pair<int, int>>& positions, int hp,
                                   int wp, int h, int w) {
    RegionMask mask;
    mask.height = h;
    mask.width = w;
    mask.member.assign(static_cast<size_t>(h) * w, 0);
    for (const auto& [r, c] : positions) {
        if (r < 0 || c < 0 || r + hp > h || c + wp > w)
            throw TensorError("region position out of bounds");
        for (int i = r; i < r + hp; ++i)
            for (int j = c; j < c + wp; ++j)
                mask.member[static_cast<size_t>(i) * w + j] = 1;
    }
    for (std::uint8_t m : mask.member) mask.cardinality += m;
    return mask;
}

inline double area_ratio(const RegionMask& mask) {
    return static_cast<double>(mask.cardinality) /
           (static_cast<double>(mask.height) * mask.width);
}

/// Identifies the random stream consumed by one srp_pool call site:
/// seed is global, branch distinguishes identity/residual descriptors,
/// step advances per training iteration so masks are resampled.
struct SrpDrawCtx {
    std::uint64_t seed = 0;
    std::uint64_t branch = 0;
    std::uint64_t step = 0;
};

/// Mean over an explicit mask per batch sample; the mask is a constant of
/// differentiation (gradient 1/|mask| on member cells, 0 elsewhere).
template <typename T>
TensorPtr<T> srp_pool_masked(Tape<T>& tape, const TensorPtr<T>& u,
                             std::shared_ptr<std::vector<RegionMask>> masks) {
    const int N = u->dim(0), C = u->dim(1), H = u->dim(2), W = u->dim(3);
    if (static_cast<int>(masks->size()) != N)
        throw TensorError("srp_pool_masked needs one mask per batch sample");
    auto out = make_tensor<T>({N, C});
    for (int n = 0; n < N; ++n) {
        const RegionMask& m = (*masks)[n];
        for (int c = 0; c < C; ++c) {
            const T* p = u->data.data() + (static_cast<size_t>(n) * C + c) *
                                              (static_cast<size_t>(H) * W);
            T s = 0;
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(H) * W; ++i)
                if (m.member[i]) s += p[i];
            out->data[static_cast<size_t>(n) * C + c] = s / static_cast<T>(m.cardinality);
        }
    }
    tape.record([=]() {
        if (out->grad.empty()) return;
        u->ensure_grad();
        for (int n = 0; n < N; ++n) {
            const RegionMask& m = (*masks)[n];
            for (int c = 0; c < C; ++c) {
                const T g = out->grad[static_cast<size_t>(n) * C + c] /
                            static_cast<T>(m.cardinality);
                T* gx = u->grad.data() + (static_cast<size_t>(n) * C + c) *
                                             (static_cast<size_t>(H) * W);
                for (std::int64_t i = 0; i < static_cast<std::int64_t>(H) * W; ++i)
                    if (m.member[i]) gx[i] += g;
            }
        }
    });
    return out;
}

/// Samples the union mask for one batch sample of a given call site.
inline RegionMask sample_mask(const SrpConfig& cfg, int block_index, int total_blocks, int h,
                              int w, const SrpDrawCtx& ctx, int batch_index) {
    const double lam =
        scheduled_lambda(block_index, total_blocks, cfg.lambda_target, cfg.schedule);
    auto [hp, wp] = region_dims(h, w, lam);
    RngStream rng = make_stream(ctx.seed, static_cast<std::uint64_t>(block_index), ctx.branch,
                                static_cast<std::uint64_t>(batch_index), ctx.step);
    auto pos = sample_positions(rng, h, w, hp, wp, cfg.effective_regions());
    return build_union_mask(pos, hp, wp, h, w);
}

/// Stochastic region pooling. Eval mode (or SRP off) is exact global
/// average pooling and consumes no random draws; train mode pools a
/// single square (SS) or the union of M squares (MS), one mask shared by
/// all channels of a sample, independent masks per sample.
template <typename T>
TensorPtr<T> srp_pool(Tape<T>& tape, const TensorPtr<T>& u, const SrpConfig& cfg,
                      int block_index, int total_blocks, Mode mode, const SrpDrawCtx& ctx) {
    cfg.validate();
    if (u->rank() != 4) throw TensorError("srp_pool expects (N,C,H,W)");
    if (mode == Mode::Eval || cfg.mode == SrpMode::Off) return gap(tape, u);
    const int N = u->dim(0), H = u->dim(2), W = u->dim(3);
    auto masks = std::make_shared<std::vector<RegionMask>>();
    masks->reserve(static_cast<size_t>(N));
    for (int n = 0; n < N; ++n)
        masks->push_back(sample_mask(cfg, block_index, total_blocks, H, W, ctx, n));
    return srp_pool_masked(tape, u, std::move(masks));
}

}  // namespace srp
