#include <benchmark/benchmark.h>

#include "srp/attention.hpp"
#include "srp/resnet.hpp"
#include "srp/srp.hpp"

using namespace srp;

namespace {

TensorPtr<float> random_map(int n, int c, int h, int w, std::uint64_t seed) {
    RngStream rng = make_stream(seed, 0, 0, 0);
    auto t = make_tensor<float>({n, c, h, w});
    for (auto& v : t->data) v = static_cast<float>(rng.uniform() * 2.0 - 1.0);
    return t;
}

void BM_conv2d_3x3(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    auto x = random_map(8, c, 32, 32, 1);
    RngStream rng = make_stream(2, 0, 0, 0);
    auto k = make_tensor<float>({c, c, 3, 3});
    for (auto& v : k->data) v = static_cast<float>(rng.uniform() - 0.5);
    for (auto _ : state) {
        Tape<float> tape;
        benchmark::DoNotOptimize(conv2d(tape, x, k, 1, 1));
    }
    state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_conv2d_3x3)->Arg(16)->Arg(32)->Arg(64);

void BM_gap(benchmark::State& state) {
    auto x = random_map(128, 64, 8, 8, 3);
    for (auto _ : state) {
        Tape<float> tape;
        benchmark::DoNotOptimize(gap(tape, x));
    }
}
BENCHMARK(BM_gap);

void BM_srp_pool_train(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    auto x = random_map(128, 64, 8, 8, 4);
    SrpConfig cfg = m == 1 ? SrpConfig::single_square(0.8) : SrpConfig::multi_square(0.6, m);
    std::uint64_t step = 0;
    for (auto _ : state) {
        Tape<float> tape;
        SrpDrawCtx ctx{7, 0, step++};
        benchmark::DoNotOptimize(srp_pool(tape, x, cfg, 1, 6, Mode::Train, ctx));
    }
}
BENCHMARK(BM_srp_pool_train)->Arg(1)->Arg(5);

void BM_one_branch_block(benchmark::State& state) {
    RngStream rng = make_stream(5, 0, 0, 0);
    OneBranchParams<float> p(64, 16, rng);
    auto u = random_map(32, 64, 8, 8, 6);
    std::uint64_t step = 0;
    for (auto _ : state) {
        Tape<float> tape;
        SrpDrawCtx ctx{9, 0, step++};
        benchmark::DoNotOptimize(one_branch_forward(tape, u, p, SrpConfig::multi_square(0.6, 5),
                                                    1, 6, Mode::Train, ctx));
    }
}
BENCHMARK(BM_one_branch_block);

void BM_double_branch_block(benchmark::State& state) {
    RngStream rng = make_stream(6, 0, 0, 0);
    DoubleBranchParams<float> p(64, 4, rng);
    auto u_id = random_map(32, 64, 8, 8, 7);
    auto u_res = random_map(32, 64, 8, 8, 8);
    std::uint64_t step = 0;
    for (auto _ : state) {
        Tape<float> tape;
        SrpDrawCtx ctx{11, 0, step++};
        benchmark::DoNotOptimize(double_branch_forward(tape, u_id, u_res, p,
                                                       SrpConfig::multi_square(0.6, 5), 1, 6,
                                                       Mode::Train, ctx));
    }
}
BENCHMARK(BM_double_branch_block);

void BM_resnet_forward(benchmark::State& state) {
    NetworkConfig cfg;
    cfg.depth = 14;
    cfg.attention = AttentionKind::One;
    cfg.srp = SrpConfig::multi_square(0.6, 5);
    ResNet<float> net(cfg, 1);
    auto x = random_map(static_cast<int>(state.range(0)), 3, 32, 32, 9);
    std::uint64_t step = 0;
    for (auto _ : state) {
        Tape<float> tape;
        SrpDrawCtx ctx{13, 0, step++};
        benchmark::DoNotOptimize(net.forward(tape, x, Mode::Train, ctx));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_resnet_forward)->Arg(16)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
