#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "srp/gradcheck.hpp"
#include "srp/ops.hpp"
#include "srp/optimizer.hpp"
#include "srp/rng.hpp"

using namespace srp;

namespace {

template <typename T>
TensorPtr<T> random_tensor(std::vector<int> shape, RngStream& rng, double scale = 1.0) {
    auto t = make_tensor<T>(std::move(shape));
    for (auto& v : t->data) v = static_cast<T>((rng.uniform() * 2.0 - 1.0) * scale);
    return t;
}

// Naive 6-loop direct convolution, the oracle conv2d is checked against.
template <typename T>
std::vector<T> conv_oracle(const Tensor<T>& x, const Tensor<T>& k, int stride, int pad) {
    const int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    const int F = k.shape[0], kh = k.shape[2], kw = k.shape[3];
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    std::vector<T> out(static_cast<size_t>(N) * F * Ho * Wo, T(0));
    for (int n = 0; n < N; ++n)
        for (int f = 0; f < F; ++f)
            for (int oi = 0; oi < Ho; ++oi)
                for (int oj = 0; oj < Wo; ++oj) {
                    double acc = 0;
                    for (int c = 0; c < C; ++c)
                        for (int ki = 0; ki < kh; ++ki)
                            for (int kj = 0; kj < kw; ++kj) {
                                const int ii = oi * stride + ki - pad;
                                const int jj = oj * stride + kj - pad;
                                if (ii < 0 || ii >= H || jj < 0 || jj >= W) continue;
                                acc += static_cast<double>(
                                           x.data[((n * C + c) * H + ii) * W + jj]) *
                                       k.data[((f * C + c) * kh + ki) * kw + kj];
                            }
                    out[((n * F + f) * Ho + oi) * Wo + oj] = static_cast<T>(acc);
                }
    return out;
}

}  // namespace

TEST_CASE("conv2d: 3x3 ones against 3x3 ones kernel sums to 9") {
    Tape<float> tape;
    auto x = make_tensor<float>({1, 1, 3, 3}, std::vector<float>(9, 1.0f));
    auto k = make_tensor<float>({1, 1, 3, 3}, std::vector<float>(9, 1.0f));
    auto y = conv2d(tape, x, k, 1, 0);
    REQUIRE(y->shape == std::vector<int>{1, 1, 1, 1});
    CHECK(y->data[0] == doctest::Approx(9.0f));
}

TEST_CASE("conv2d: 1x1 identity kernel is a passthrough") {
    Tape<float> tape;
    RngStream rng = make_stream(7, 0, 0, 0);
    auto x = random_tensor<float>({2, 1, 4, 4}, rng);
    auto k = make_tensor<float>({1, 1, 1, 1}, std::vector<float>{1.0f});
    auto y = conv2d(tape, x, k, 1, 0);
    for (size_t i = 0; i < x->data.size(); ++i) CHECK(y->data[i] == x->data[i]);
}

TEST_CASE("conv2d matches the naive direct-convolution oracle") {
    RngStream rng = make_stream(11, 0, 0, 0);
    for (auto [stride, pad] : {std::pair{1, 0}, {1, 1}, {2, 1}}) {
        Tape<float> tape;
        auto x = random_tensor<float>({2, 3, 8, 8}, rng);
        auto k = random_tensor<float>({4, 3, 3, 3}, rng);
        auto y = conv2d(tape, x, k, stride, pad);
        auto expect = conv_oracle(*x, *k, stride, pad);
        REQUIRE(y->data.size() == expect.size());
        for (size_t i = 0; i < expect.size(); ++i)
            CHECK(std::fabs(y->data[i] - expect[i]) < 1e-6f);
    }
}

TEST_CASE("conv2d rejects channel mismatch with a dimension error") {
    Tape<float> tape;
    auto x = make_tensor<float>({1, 2, 4, 4});
    auto k = make_tensor<float>({1, 3, 3, 3});
    CHECK_THROWS_AS(conv2d(tape, x, k, 1, 1), TensorError);
}

TEST_CASE("affine: identity weight and zero bias") {
    Tape<float> tape;
    auto x = make_tensor<float>({1, 2}, std::vector<float>{1.0f, 0.0f});
    auto w = make_tensor<float>({2, 2}, std::vector<float>{1, 0, 0, 1});
    auto b = make_tensor<float>({2});
    auto y = affine(tape, x, w, b);
    CHECK(y->data[0] == 1.0f);
    CHECK(y->data[1] == 0.0f);
}

TEST_CASE("affine: zero weight returns a row of bias") {
    Tape<float> tape;
    auto x = make_tensor<float>({3, 2}, std::vector<float>{1, 2, 3, 4, 5, 6});
    auto w = make_tensor<float>({2, 4});
    auto b = make_tensor<float>({4}, std::vector<float>{1, 2, 3, 4});
    auto y = affine(tape, x, w, b);
    for (int n = 0; n < 3; ++n)
        for (int e = 0; e < 4; ++e) CHECK(y->data[n * 4 + e] == b->data[e]);
}

TEST_CASE("affine matches the triple-loop matmul oracle") {
    Tape<float> tape;
    RngStream rng = make_stream(13, 0, 0, 0);
    auto x = random_tensor<float>({4, 3}, rng);
    auto w = random_tensor<float>({3, 2}, rng);
    auto b = random_tensor<float>({2}, rng);
    auto y = affine(tape, x, w, b);
    for (int n = 0; n < 4; ++n)
        for (int e = 0; e < 2; ++e) {
            double acc = b->data[e];
            for (int d = 0; d < 3; ++d) acc += x->data[n * 3 + d] * w->data[d * 2 + e];
            CHECK(std::fabs(y->data[n * 2 + e] - acc) < 1e-6);
        }
    CHECK_THROWS_AS(affine(tape, x, make_tensor<float>({4, 2}), b), TensorError);
}

TEST_CASE("batchnorm2d: constant channel in train mode yields beta") {
    Tape<float> tape;
    auto x = make_tensor<float>({4, 2, 3, 3}, std::vector<float>(4 * 2 * 9, 3.5f));
    auto gamma = make_tensor<float>({2}, std::vector<float>{2.0f, 0.5f});
    auto beta = make_tensor<float>({2}, std::vector<float>{1.0f, -1.0f});
    BnStats<float> stats(2);
    auto y = batchnorm2d(tape, x, gamma, beta, stats, Mode::Train);
    for (int n = 0; n < 4; ++n)
        for (int c = 0; c < 2; ++c)
            for (int p = 0; p < 9; ++p)
                CHECK(y->data[(n * 2 + c) * 9 + p] == doctest::Approx(beta->data[c]));
}

TEST_CASE("batchnorm2d: identity-scale on an exactly standardized batch") {
    // Per channel the values {-1, +1} have mean 0 and biased variance 1.
    Tape<float> tape;
    std::vector<float> vals(2 * 1 * 2 * 2);
    for (size_t i = 0; i < vals.size(); ++i) vals[i] = (i % 2 == 0) ? -1.0f : 1.0f;
    auto x = make_tensor<float>({2, 1, 2, 2}, vals);
    auto gamma = make_tensor<float>({1}, std::vector<float>{1.0f});
    auto beta = make_tensor<float>({1});
    BnStats<float> stats(1);
    auto y = batchnorm2d(tape, x, gamma, beta, stats, Mode::Train);
    for (size_t i = 0; i < vals.size(); ++i) CHECK(std::fabs(y->data[i] - vals[i]) < 1e-4f);
}

TEST_CASE("batchnorm2d: eval before any update uses initialized stats") {
    Tape<float> tape;
    auto x = make_tensor<float>({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
    auto gamma = make_tensor<float>({1}, std::vector<float>{1.0f});
    auto beta = make_tensor<float>({1});
    BnStats<float> stats(1);
    auto y = batchnorm2d(tape, x, gamma, beta, stats, Mode::Eval);
    // mean 0, var 1 -> x / sqrt(1 + eps)
    for (int i = 0; i < 4; ++i)
        CHECK(y->data[i] == doctest::Approx(x->data[i] / std::sqrt(1.0f + 1e-5f)));
}

TEST_CASE("batchnorm2d gradient check (f64, central differences)") {
    RngStream rng = make_stream(17, 0, 0, 0);
    auto x = random_tensor<double>({2, 3, 4, 4}, rng);
    auto gamma = random_tensor<double>({3}, rng);
    auto beta = random_tensor<double>({3}, rng);
    auto report = grad_check(
        [&](Tape<double>& tape) {
            BnStats<double> stats(3);
            auto y = batchnorm2d(tape, x, gamma, beta, stats, Mode::Train);
            auto z = sigmoid(tape, y);
            return gap(tape, reshape(tape, z, {1, 1, 2 * 3 * 4, 4}));
        },
        {x, gamma, beta});
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("mul_channelwise trivial gates and loop oracle") {
    Tape<float> tape;
    RngStream rng = make_stream(19, 0, 0, 0);
    auto u = random_tensor<float>({2, 3, 4, 4}, rng);
    auto ones = make_tensor<float>({2, 3}, std::vector<float>(6, 1.0f));
    auto zeros = make_tensor<float>({2, 3});
    auto alpha = random_tensor<float>({2, 3}, rng);

    auto same = mul_channelwise(tape, u, ones);
    CHECK(same->data == u->data);
    auto none = mul_channelwise(tape, u, zeros);
    for (float v : none->data) CHECK(v == 0.0f);
    auto scaled = mul_channelwise(tape, u, alpha);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 3; ++c)
            for (int p = 0; p < 16; ++p)
                CHECK(scaled->data[(n * 3 + c) * 16 + p] ==
                      alpha->data[n * 3 + c] * u->data[(n * 3 + c) * 16 + p]);
    CHECK_THROWS_AS(mul_channelwise(tape, u, make_tensor<float>({2, 4})), TensorError);
}

TEST_CASE("softmax cross-entropy: uniform logits give ln K") {
    Tape<float> tape;
    auto logits = make_tensor<float>({4, 10});
    auto loss = softmax_xent(tape, logits, {0, 3, 5, 9});
    CHECK(loss->data[0] == doctest::Approx(2.302585f).epsilon(1e-5));
}

TEST_CASE("softmax cross-entropy: dominant aligned logit drives loss to zero") {
    Tape<float> tape;
    auto logits = make_tensor<float>({1, 10});
    logits->data[4] = 1e4f;
    auto loss = softmax_xent(tape, logits, {4});
    CHECK(loss->data[0] < 1e-6f);
}

TEST_CASE("elementwise and loss gradient checks (f64)") {
    RngStream rng = make_stream(23, 0, 0, 0);
    auto x = random_tensor<double>({2, 3, 4, 4}, rng);
    auto alpha = random_tensor<double>({2, 3}, rng);

    auto relu_report = grad_check(
        [&](Tape<double>& tape) {
            // offset keeps values away from the relu kink
            auto y = relu(tape, x);
            return gap(tape, reshape(tape, y, {1, 1, 6, 16}));
        },
        {x}, 1e-6);
    CHECK(relu_report.max_rel_err < 1e-4);

    auto sig_report = grad_check(
        [&](Tape<double>& tape) {
            auto y = sigmoid(tape, mul_channelwise(tape, x, alpha));
            return gap(tape, reshape(tape, y, {1, 1, 6, 16}));
        },
        {x, alpha});
    CHECK(sig_report.max_rel_err < 1e-4);

    auto logits = random_tensor<double>({3, 5}, rng);
    auto xent_report = grad_check(
        [&](Tape<double>& tape) { return softmax_xent(tape, logits, {0, 2, 4}); }, {logits});
    CHECK(xent_report.max_rel_err < 1e-4);

    auto k = random_tensor<double>({2, 3, 3, 3}, rng);
    auto conv_report = grad_check(
        [&](Tape<double>& tape) {
            auto y = conv2d(tape, x, k, 1, 1);
            return gap(tape, reshape(tape, y, {1, 1, 32, static_cast<int>(y->numel() / 32)}));
        },
        {x, k});
    CHECK(conv_report.max_rel_err < 1e-4);

    auto w = random_tensor<double>({5, 4}, rng);
    auto b = random_tensor<double>({4}, rng);
    auto a2 = random_tensor<double>({3, 5}, rng);
    auto affine_report = grad_check(
        [&](Tape<double>& tape) {
            auto y = affine(tape, a2, w, b);
            return softmax_xent(tape, y, {1, 2, 3});
        },
        {a2, w, b});
    CHECK(affine_report.max_rel_err < 1e-4);
}

TEST_CASE("backward of a sum of losses equals sum of backwards") {
    RngStream rng = make_stream(29, 0, 0, 0);
    auto x = random_tensor<double>({2, 4}, rng);
    auto w = random_tensor<double>({4, 3}, rng);
    auto b = random_tensor<double>({3}, rng);

    auto run = [&](bool combined) {
        x->ensure_grad();
        x->zero_grad();
        w->ensure_grad();
        w->zero_grad();
        b->ensure_grad();
        b->zero_grad();
        if (combined) {
            Tape<double> tape;
            auto l1 = softmax_xent(tape, affine(tape, x, w, b), {0, 1});
            auto l2 = softmax_xent(tape, affine(tape, x, w, b), {2, 0});
            auto total = add(tape, l1, l2);
            backward(tape, total);
        } else {
            Tape<double> t1;
            backward(t1, softmax_xent(t1, affine(t1, x, w, b), {0, 1}));
            Tape<double> t2;
            backward(t2, softmax_xent(t2, affine(t2, x, w, b), {2, 0}));
        }
        return std::tuple{x->grad, w->grad, b->grad};
    };
    auto [gx1, gw1, gb1] = run(true);
    auto [gx2, gw2, gb2] = run(false);
    for (size_t i = 0; i < gx1.size(); ++i) CHECK(gx1[i] == doctest::Approx(gx2[i]));
    for (size_t i = 0; i < gw1.size(); ++i) CHECK(gw1[i] == doctest::Approx(gw2[i]));
    for (size_t i = 0; i < gb1.size(); ++i) CHECK(gb1[i] == doctest::Approx(gb2[i]));
}

TEST_CASE("sgd nesterov: plain gradient step") {
    auto p = make_tensor<float>({1}, std::vector<float>{1.0f}, true);
    p->grad[0] = 1.0f;
    SgdNesterov<float> opt(0.1f, 0.0f, 0.0f);
    opt.step({{"p", p}});
    CHECK(p->data[0] == doctest::Approx(0.9f));
    CHECK(p->grad[0] == 0.0f);  // zeroed after step
}

TEST_CASE("sgd nesterov: two steps match the hand-computed recurrence") {
    // v <- m v + g; p <- p - lr (g + m v); m=0.9, lr=0.1, g=1 each step.
    // step 1: v=1,    p = 1 - 0.1*(1 + 0.9)      = 0.81
    // step 2: v=1.9,  p = 0.81 - 0.1*(1 + 1.71)  = 0.539
    auto p = make_tensor<float>({1}, std::vector<float>{1.0f}, true);
    SgdNesterov<float> opt(0.1f, 0.9f, 0.0f);
    p->grad[0] = 1.0f;
    opt.step({{"p", p}});
    CHECK(p->data[0] == doctest::Approx(0.81f));
    p->grad[0] = 1.0f;
    opt.step({{"p", p}});
    CHECK(p->data[0] == doctest::Approx(0.539f));
}

TEST_CASE("sgd nesterov: weight decay alone shrinks |p| monotonically") {
    auto p = make_tensor<float>({1}, std::vector<float>{2.0f}, true);
    SgdNesterov<float> opt(0.1f, 0.9f, 0.01f);
    float prev = 2.0f;
    for (int i = 0; i < 20; ++i) {
        p->grad[0] = 0.0f;
        p->ensure_grad();
        opt.step({{"p", p}});
        CHECK(std::fabs(p->data[0]) < std::fabs(prev));
        prev = p->data[0];
    }
}

TEST_CASE("non-finite op output raises a numerical error") {
    Tape<float> tape;
    auto logits = make_tensor<float>({1, 2});
    logits->data[0] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(softmax_xent(tape, logits, {0}), NumericalError);
}
