#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "srp/gradcheck.hpp"
#include "srp/srp.hpp"

using namespace srp;

TEST_CASE("region_dims rounds half up and clamps to [1, extent]") {
    CHECK(region_dims(8, 8, 0.6) == std::pair{5, 5});
    CHECK(region_dims(32, 32, 1.0) == std::pair{32, 32});
    CHECK(region_dims(7, 7, 0.05) == std::pair{1, 1});
    CHECK_THROWS_AS(region_dims(8, 8, 1.2), ConfigError);
    CHECK_THROWS_AS(region_dims(8, 8, 0.0), ConfigError);
}

TEST_CASE("sample_positions covers exactly the valid top-left cells") {
    RngStream rng = make_stream(3, 0, 0, 0);
    std::set<int> rows, cols;
    for (int t = 0; t < 2000; ++t) {
        auto pos = sample_positions(rng, 8, 8, 5, 5, 1);
        REQUIRE(pos.size() == 1);
        rows.insert(pos[0].first);
        cols.insert(pos[0].second);
    }
    CHECK(rows == std::set<int>{0, 1, 2, 3});
    CHECK(cols == std::set<int>{0, 1, 2, 3});
}

TEST_CASE("full-size region leaves a single valid position") {
    RngStream rng = make_stream(4, 0, 0, 0);
    for (int t = 0; t < 10; ++t) {
        auto pos = sample_positions(rng, 6, 9, 6, 9, 3);
        for (auto [r, c] : pos) {
            CHECK(r == 0);
            CHECK(c == 0);
        }
    }
}

TEST_CASE("position sampling is uniform: chi-square over the 4x4 grid") {
    RngStream rng = make_stream(5, 0, 0, 0);
    std::vector<int> counts(16, 0);
    const int draws = 10000;
    for (int t = 0; t < draws; ++t) {
        auto pos = sample_positions(rng, 8, 8, 5, 5, 1);
        ++counts[pos[0].first * 4 + pos[0].second];
    }
    const double expected = draws / 16.0;
    double chi2 = 0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < 37.6973);  // 15 df, p = 0.001
}

TEST_CASE("union mask cardinality for duplicate, disjoint and overlapping regions") {
    CHECK(build_union_mask({{0, 0}, {0, 0}}, 2, 2, 4, 4).cardinality == 4);
    CHECK(build_union_mask({{0, 0}, {2, 2}}, 2, 2, 4, 4).cardinality == 8);
    CHECK(build_union_mask({{0, 0}, {1, 1}}, 2, 2, 4, 4).cardinality == 7);
    CHECK_THROWS_AS(build_union_mask({{3, 3}}, 2, 2, 4, 4), TensorError);
}

TEST_CASE("scheduled lambda: endpoints, midpoint, fixed schedule") {
    CHECK(scheduled_lambda(0, 7, 0.6) == doctest::Approx(1.0));
    CHECK(scheduled_lambda(6, 7, 0.6) == doctest::Approx(0.6));
    CHECK(scheduled_lambda(1, 3, 0.6) == doctest::Approx(0.8));
    CHECK(scheduled_lambda(0, 1, 0.6) == doctest::Approx(0.6));
    CHECK(scheduled_lambda(3, 9, 0.7, SrpSchedule::Fixed) == doctest::Approx(0.7));
}

TEST_CASE("scheduled lambda is non-increasing with exact endpoints") {
    for (int total = 1; total <= 30; ++total)
        for (double target : {0.2, 0.6, 0.8}) {
            double prev = 2.0;
            for (int l = 0; l < total; ++l) {
                const double lam = scheduled_lambda(l, total, target);
                CHECK(lam <= prev);
                prev = lam;
            }
            if (total > 1) CHECK(scheduled_lambda(0, total, target) == doctest::Approx(1.0));
            CHECK(scheduled_lambda(total - 1, total, target) == doctest::Approx(target));
        }
}

TEST_CASE("srp_pool eval mode is the plain map mean") {
    Tape<float> tape;
    auto u = make_tensor<float>({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
    for (auto cfg : {SrpConfig::off(), SrpConfig::single_square(0.5),
                     SrpConfig::multi_square(0.5, 3)}) {
        auto z = srp_pool(tape, u, cfg, 0, 3, Mode::Eval, SrpDrawCtx{123, 0, 9});
        CHECK(z->data[0] == 2.5f);
    }
}

TEST_CASE("forced single-cell region pools exactly that cell") {
    Tape<float> tape;
    auto u = make_tensor<float>({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
    auto masks = std::make_shared<std::vector<RegionMask>>();
    masks->push_back(build_union_mask({{1, 1}}, 1, 1, 2, 2));
    auto z = srp_pool_masked(tape, u, masks);
    CHECK(z->data[0] == 4.0f);
}

TEST_CASE("train MS pooling equals the enumerate-and-average oracle exactly") {
    RngStream data_rng = make_stream(31, 0, 0, 0);
    auto u = make_tensor<float>({1, 3, 6, 6});
    for (auto& v : u->data) v = static_cast<float>(data_rng.uniform() * 2.0 - 1.0);
    SrpConfig cfg = SrpConfig::multi_square(0.6, 4);
    SrpDrawCtx ctx{99, 0, 3};

    Tape<float> tape;
    auto z = srp_pool(tape, u, cfg, 1, 3, Mode::Train, ctx);

    // Oracle: rebuild the mask for this (seed, block, branch, batch) id and
    // average the covered cells by explicit coordinate enumeration.
    RegionMask mask = sample_mask(cfg, 1, 3, 6, 6, ctx, 0);
    for (int c = 0; c < 3; ++c) {
        float sum = 0;
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j)
                if (mask.contains(i, j)) sum += u->data[(c * 6 + i) * 6 + j];
        CHECK(z->data[c] == sum / static_cast<float>(mask.cardinality));
    }
}

TEST_CASE("lambda = 1 makes train-mode SS and MS bitwise equal to GAP") {
    RngStream data_rng = make_stream(37, 0, 0, 0);
    auto u = make_tensor<float>({2, 4, 5, 7});
    for (auto& v : u->data) v = static_cast<float>(data_rng.uniform() * 4.0 - 2.0);
    Tape<float> tape;
    auto reference = gap(tape, u);
    for (auto cfg :
         {SrpConfig::single_square(1.0, SrpSchedule::Fixed),
          SrpConfig::multi_square(1.0, 5, SrpSchedule::Fixed)}) {
        auto z = srp_pool(tape, u, cfg, 2, 6, Mode::Train, SrpDrawCtx{5, 1, 17});
        CHECK(z->data == reference->data);
    }
}

TEST_CASE("eval output ignores seed and step entirely") {
    RngStream data_rng = make_stream(41, 0, 0, 0);
    auto u = make_tensor<float>({2, 2, 4, 4});
    for (auto& v : u->data) v = static_cast<float>(data_rng.uniform());
    Tape<float> tape;
    SrpConfig cfg = SrpConfig::multi_square(0.4, 3);
    auto a = srp_pool(tape, u, cfg, 0, 3, Mode::Eval, SrpDrawCtx{1, 0, 1});
    auto b = srp_pool(tape, u, cfg, 0, 3, Mode::Eval, SrpDrawCtx{2, 1, 99});
    CHECK(a->data == b->data);
    CHECK(a->data == gap(tape, u)->data);
}

TEST_CASE("pooled descriptors stay within the map's value range") {
    RngStream rng = make_stream(43, 0, 0, 0);
    for (int trial = 0; trial < 50; ++trial) {
        auto u = make_tensor<float>({2, 3, 8, 8});
        for (auto& v : u->data) v = static_cast<float>(rng.uniform() * 10.0 - 5.0);
        SrpConfig cfg = trial % 2 ? SrpConfig::multi_square(0.3 + 0.1 * (trial % 7), 4)
                                  : SrpConfig::single_square(0.3 + 0.1 * (trial % 7));
        Tape<float> tape;
        auto z = srp_pool(tape, u, cfg, 1, 4, Mode::Train,
                          SrpDrawCtx{7, 0, static_cast<std::uint64_t>(trial)});
        for (int n = 0; n < 2; ++n)
            for (int c = 0; c < 3; ++c) {
                const float* p = u->data.data() + (n * 3 + c) * 64;
                const auto [lo, hi] = std::minmax_element(p, p + 64);
                CHECK(z->data[n * 3 + c] >= *lo - 1e-5f);
                CHECK(z->data[n * 3 + c] <= *hi + 1e-5f);
            }
    }
}

TEST_CASE("union cardinality bounds: H'W' <= |mask| <= min(M H'W', HW)") {
    RngStream seeds = make_stream(47, 0, 0, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const int h = 2 + seeds.uniform_int(11), w = 2 + seeds.uniform_int(11);
        const int m = 1 + seeds.uniform_int(6);
        const double lam = 0.2 + seeds.uniform() * 0.8;
        auto [hp, wp] = region_dims(h, w, lam);
        RngStream rng = make_stream(48, trial, 0, 0);
        auto mask = build_union_mask(sample_positions(rng, h, w, hp, wp, m), hp, wp, h, w);
        CHECK(mask.cardinality >= hp * wp);
        CHECK(mask.cardinality <= std::min(m * hp * wp, h * w));
        CHECK(area_ratio(mask) > 0.0);
        CHECK(area_ratio(mask) <= 1.0);
    }
}

TEST_CASE("srp_pool backward: constant 1/|mask| on the region, zero off it") {
    auto u = make_tensor<float>({1, 2, 4, 4});
    for (size_t i = 0; i < u->data.size(); ++i) u->data[i] = static_cast<float>(i) * 0.1f;
    auto masks = std::make_shared<std::vector<RegionMask>>();
    masks->push_back(build_union_mask({{0, 0}, {1, 1}}, 2, 2, 4, 4));  // cardinality 7
    Tape<float> tape;
    auto z = srp_pool_masked(tape, u, masks);
    backward_from(tape, z, std::vector<float>{1.0f, 2.0f});
    for (int c = 0; c < 2; ++c) {
        float total = 0;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                const float g = u->grad[(c * 4 + i) * 4 + j];
                if ((*masks)[0].contains(i, j))
                    CHECK(g == doctest::Approx((c + 1.0f) / 7.0f));
                else
                    CHECK(g == 0.0f);
                total += g;
            }
        CHECK(total == doctest::Approx(c + 1.0f));  // sums to the upstream gradient
    }
}

TEST_CASE("srp_pool with a fixed mask passes the finite-difference check") {
    RngStream rng = make_stream(53, 0, 0, 0);
    auto u = make_tensor<double>({2, 2, 4, 4});
    for (auto& v : u->data) v = rng.uniform() * 2.0 - 1.0;
    auto masks = std::make_shared<std::vector<RegionMask>>();
    masks->push_back(build_union_mask({{0, 0}, {2, 1}}, 2, 2, 4, 4));
    masks->push_back(build_union_mask({{1, 1}}, 3, 3, 4, 4));
    auto report = grad_check(
        [&](Tape<double>& tape) {
            auto z = srp_pool_masked(tape, u, masks);
            auto s = sigmoid(tape, z);
            return gap(tape, reshape(tape, s, {1, 1, 2, 2}));
        },
        {u});
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("masks are deterministic per (seed, block, branch, batch, step)") {
    SrpConfig cfg = SrpConfig::multi_square(0.5, 4);
    for (int batch = 0; batch < 3; ++batch) {
        auto a = sample_mask(cfg, 2, 6, 8, 8, SrpDrawCtx{11, 1, 5}, batch);
        auto b = sample_mask(cfg, 2, 6, 8, 8, SrpDrawCtx{11, 1, 5}, batch);
        CHECK(a.member == b.member);
    }
    // step change resamples
    auto a = sample_mask(cfg, 2, 6, 8, 8, SrpDrawCtx{11, 1, 5}, 0);
    auto c = sample_mask(cfg, 2, 6, 8, 8, SrpDrawCtx{11, 1, 6}, 0);
    CHECK(a.member != c.member);  // overwhelmingly likely for a 4x4 grid of draws
}

TEST_CASE("single-square area ratio is deterministic; multi-square mean matches the "
          "inclusion-exclusion oracle") {
    // M=1: ratio is always H'W'/(HW) regardless of position.
    for (int t = 0; t < 100; ++t) {
        RngStream rng = make_stream(61, t, 0, 0);
        auto mask = build_union_mask(sample_positions(rng, 8, 8, 5, 5, 1), 5, 5, 8, 8);
        CHECK(area_ratio(mask) == doctest::Approx(25.0 / 64.0));
    }

    // M=5, lambda=0.6 on 8x8. Independent oracle: by linearity of expectation,
    // E[ratio] = (1/64) sum_cells (1 - (1 - p_cell)^5) with p_cell the
    // single-square coverage probability = c(x)c(y)/16.
    const double expected = 0.784916877746582;
    const int trials = 100000;
    double sum = 0, sq = 0;
    for (int t = 0; t < trials; ++t) {
        RngStream rng = make_stream(67, t, 0, 0);
        auto mask = build_union_mask(sample_positions(rng, 8, 8, 5, 5, 5), 5, 5, 8, 8);
        const double r = area_ratio(mask);
        sum += r;
        sq += r * r;
    }
    const double mean = sum / trials;
    const double var = sq / trials - mean * mean;
    const double se = std::sqrt(var / trials);
    CHECK(std::fabs(mean - expected) < 3 * se);
}
