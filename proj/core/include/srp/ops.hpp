#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include <cblas.h>

#include "srp/tensor.hpp"

namespace srp {

enum class Mode { Train, Eval };

namespace detail {

inline void gemm(bool ta, bool tb, int m, int n, int k, float alpha, const float* a,
                 int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

inline void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a,
                 int lda, const double* b, int ldb, double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

// Expands one image (C,H,W) into columns (C*kh*kw) x (Ho*Wo).
template <typename T>
void im2col(const T* img, int C, int H, int W, int kh, int kw, int stride, int pad,
            int Ho, int Wo, T* col) {
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                T* dst = col + ((c * kh + ki) * kw + kj) * (Ho * Wo);
                for (int oi = 0; oi < Ho; ++oi) {
                    int ii = oi * stride + ki - pad;
                    if (ii < 0 || ii >= H) {
                        std::fill(dst + oi * Wo, dst + (oi + 1) * Wo, T(0));
                        continue;
                    }
                    const T* src = img + (c * H + ii) * W;
                    for (int oj = 0; oj < Wo; ++oj) {
                        int jj = oj * stride + kj - pad;
                        dst[oi * Wo + oj] = (jj >= 0 && jj < W) ? src[jj] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, int C, int H, int W, int kh, int kw, int stride, int pad,
                int Ho, int Wo, T* img) {
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                const T* src = col + ((c * kh + ki) * kw + kj) * (Ho * Wo);
                for (int oi = 0; oi < Ho; ++oi) {
                    int ii = oi * stride + ki - pad;
                    if (ii < 0 || ii >= H) continue;
                    T* dst = img + (c * H + ii) * W;
                    for (int oj = 0; oj < Wo; ++oj) {
                        int jj = oj * stride + kj - pad;
                        if (jj >= 0 && jj < W) dst[jj] += src[oi * Wo + oj];
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// Direct 2-D cross-correlation, x:(N,C,H,W) * k:(F,C,kh,kw) -> (N,F,Ho,Wo).
/// Output extent Ho = floor((H + 2*pad - kh)/stride) + 1.
template <typename T>
TensorPtr<T> conv2d(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& k,
                    int stride = 1, int pad = 0) {
    if (x->rank() != 4 || k->rank() != 4)
        throw TensorError("conv2d expects 4-d input and kernel, got " + shape_str(x->shape) +
                          " and " + shape_str(k->shape));
    const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    const int F = k->dim(0), kh = k->dim(2), kw = k->dim(3);
    if (k->dim(1) != C)
        throw TensorError("conv2d channel mismatch: input has " + std::to_string(C) +
                          " channels, kernel expects " + std::to_string(k->dim(1)));
    if (kh > H + 2 * pad || kw > W + 2 * pad)
        throw TensorError("conv2d kernel larger than padded input");
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    const int K = C * kh * kw;

    auto out = make_tensor<T>({N, F, Ho, Wo});
    std::vector<T> col(static_cast<size_t>(K) * Ho * Wo);
    for (int n = 0; n < N; ++n) {
        detail::im2col(x->data.data() + static_cast<size_t>(n) * C * H * W, C, H, W, kh, kw,
                       stride, pad, Ho, Wo, col.data());
        detail::gemm(false, false, F, Ho * Wo, K, T(1), k->data.data(), K, col.data(), Ho * Wo,
                     T(0), out->data.data() + static_cast<size_t>(n) * F * Ho * Wo, Ho * Wo);
    }
    check_finite(*out, "conv2d");

    tape.record([=]() {
        if (out->grad.empty()) return;
        std::vector<T> colbuf(static_cast<size_t>(K) * Ho * Wo);
        k->ensure_grad();
        x->ensure_grad();
        for (int n = 0; n < N; ++n) {
            const T* go = out->grad.data() + static_cast<size_t>(n) * F * Ho * Wo;
            detail::im2col(x->data.data() + static_cast<size_t>(n) * C * H * W, C, H, W, kh, kw,
                           stride, pad, Ho, Wo, colbuf.data());
            // dK += gO . col^T
            detail::gemm(false, true, F, K, Ho * Wo, T(1), go, Ho * Wo, colbuf.data(), Ho * Wo,
                         T(1), k->grad.data(), K);
            // dcol = K^T . gO, then scatter-add back
            detail::gemm(true, false, K, Ho * Wo, F, T(1), k->data.data(), K, go, Ho * Wo, T(0),
                         colbuf.data(), Ho * Wo);
            detail::col2im_add(colbuf.data(), C, H, W, kh, kw, stride, pad, Ho, Wo,
                               x->grad.data() + static_cast<size_t>(n) * C * H * W);
        }
    });
    return out;
}

/// x:(N,D) . W:(D,E) + b:(E) -> (N,E)
template <typename T>
TensorPtr<T> affine(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& w,
                    const TensorPtr<T>& b) {
    if (x->rank() != 2 || w->rank() != 2)
        throw TensorError("affine expects 2-d input and weight, got " + shape_str(x->shape) +
                          " and " + shape_str(w->shape));
    const int N = x->dim(0), D = x->dim(1), E = w->dim(1);
    if (w->dim(0) != D || b->numel() != E)
        throw TensorError("affine dimension mismatch: x " + shape_str(x->shape) + ", W " +
                          shape_str(w->shape) + ", b " + shape_str(b->shape));
    auto out = make_tensor<T>({N, E});
    for (int n = 0; n < N; ++n)
        std::copy(b->data.begin(), b->data.end(), out->data.begin() + static_cast<size_t>(n) * E);
    detail::gemm(false, false, N, E, D, T(1), x->data.data(), D, w->data.data(), E, T(1),
                 out->data.data(), E);
    check_finite(*out, "affine");

    tape.record([=]() {
        if (out->grad.empty()) return;
        x->ensure_grad();
        w->ensure_grad();
        b->ensure_grad();
        detail::gemm(false, true, N, D, E, T(1), out->grad.data(), E, w->data.data(), E, T(1),
                     x->grad.data(), D);
        detail::gemm(true, false, D, E, N, T(1), x->data.data(), D, out->grad.data(), E, T(1),
                     w->grad.data(), E);
        for (int n = 0; n < N; ++n)
            for (int e = 0; e < E; ++e) b->grad[e] += out->grad[static_cast<size_t>(n) * E + e];
    });
    return out;
}

/// Running batch-norm statistics; updated in train mode, consumed in eval.
template <typename T>
struct BnStats {
    TensorPtr<T> mean;
    TensorPtr<T> var;
    explicit BnStats(int C) {
        mean = make_tensor<T>({C});
        var = make_tensor<T>({C}, std::vector<T>(C, T(1)));
    }
};

/// Spatial batch normalization over (N,H,W) per channel; eps 1e-5,
/// running-stat momentum 0.1.
template <typename T>
TensorPtr<T> batchnorm2d(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& gamma,
                         const TensorPtr<T>& beta, BnStats<T>& stats, Mode mode,
                         T momentum = T(0.1), T eps = T(1e-5)) {
    const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    if (gamma->numel() != C || beta->numel() != C)
        throw TensorError("batchnorm2d expects per-channel gamma/beta of length " +
                          std::to_string(C));
    const std::int64_t m = static_cast<std::int64_t>(N) * H * W;
    const std::int64_t hw = static_cast<std::int64_t>(H) * W;
    auto out = make_tensor<T>(x->shape);
    auto mu = std::make_shared<std::vector<T>>(C, T(0));
    auto invstd = std::make_shared<std::vector<T>>(C, T(0));

    if (mode == Mode::Train) {
        for (int c = 0; c < C; ++c) {
            T sum = 0, sq = 0;
            for (int n = 0; n < N; ++n) {
                const T* p = x->data.data() + (static_cast<size_t>(n) * C + c) * hw;
                for (std::int64_t i = 0; i < hw; ++i) {
                    sum += p[i];
                    sq += p[i] * p[i];
                }
            }
            T mean = sum / static_cast<T>(m);
            T var = sq / static_cast<T>(m) - mean * mean;
            if (var < T(0)) var = T(0);
            (*mu)[c] = mean;
            (*invstd)[c] = T(1) / std::sqrt(var + eps);
            T unbiased = (m > 1) ? var * static_cast<T>(m) / static_cast<T>(m - 1) : var;
            stats.mean->data[c] = (T(1) - momentum) * stats.mean->data[c] + momentum * mean;
            stats.var->data[c] = (T(1) - momentum) * stats.var->data[c] + momentum * unbiased;
        }
    } else {
        for (int c = 0; c < C; ++c) {
            (*mu)[c] = stats.mean->data[c];
            (*invstd)[c] = T(1) / std::sqrt(stats.var->data[c] + eps);
        }
    }
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const T* p = x->data.data() + (static_cast<size_t>(n) * C + c) * hw;
            T* q = out->data.data() + (static_cast<size_t>(n) * C + c) * hw;
            const T a = gamma->data[c] * (*invstd)[c];
            const T bconst = beta->data[c] - a * (*mu)[c];
            for (std::int64_t i = 0; i < hw; ++i) q[i] = a * p[i] + bconst;
        }
    check_finite(*out, "batchnorm2d");

    tape.record([=]() {
        if (out->grad.empty()) return;
        x->ensure_grad();
        gamma->ensure_grad();
        beta->ensure_grad();
        for (int c = 0; c < C; ++c) {
            T sum_g = 0, sum_gx = 0;
            for (int n = 0; n < N; ++n) {
                const T* go = out->grad.data() + (static_cast<size_t>(n) * C + c) * hw;
                const T* p = x->data.data() + (static_cast<size_t>(n) * C + c) * hw;
                for (std::int64_t i = 0; i < hw; ++i) {
                    sum_g += go[i];
                    sum_gx += go[i] * (p[i] - (*mu)[c]) * (*invstd)[c];
                }
            }
            gamma->grad[c] += sum_gx;
            beta->grad[c] += sum_g;
            const T g = gamma->data[c];
            for (int n = 0; n < N; ++n) {
                const T* go = out->grad.data() + (static_cast<size_t>(n) * C + c) * hw;
                const T* p = x->data.data() + (static_cast<size_t>(n) * C + c) * hw;
                T* gx = x->grad.data() + (static_cast<size_t>(n) * C + c) * hw;
                if (mode == Mode::Train) {
                    for (std::int64_t i = 0; i < hw; ++i) {
                        T xhat = (p[i] - (*mu)[c]) * (*invstd)[c];
                        gx[i] += g * (*invstd)[c] *
                                 (go[i] - sum_g / static_cast<T>(m) -
                                  xhat * sum_gx / static_cast<T>(m));
                    }
                } else {
                    for (std::int64_t i = 0; i < hw; ++i) gx[i] += g * (*invstd)[c] * go[i];
                }
            }
        }
    });
    return out;
}

template <typename T>
TensorPtr<T> relu(Tape<T>& tape, const TensorPtr<T>& x) {
    auto out = make_tensor<T>(x->shape);
    for (size_t i = 0; i < x->data.size(); ++i) out->data[i] = x->data[i] > T(0) ? x->data[i] : T(0);
    tape.record([=]() {
        if (out->grad.empty()) return;
        x->ensure_grad();
        for (size_t i = 0; i < x->data.size(); ++i)
            if (x->data[i] > T(0)) x->grad[i] += out->grad[i];
    });
    return out;
}

template <typename T>
TensorPtr<T> sigmoid(Tape<T>& tape, const TensorPtr<T>& x) {
    auto out = make_tensor<T>(x->shape);
    for (size_t i = 0; i < x->data.size(); ++i)
        out->data[i] = T(1) / (T(1) + std::exp(-x->data[i]));
    check_finite(*out, "sigmoid");
    tape.record([=]() {
        if (out->grad.empty()) return;
        x->ensure_grad();
        for (size_t i = 0; i < x->data.size(); ++i)
            x->grad[i] += out->grad[i] * out->data[i] * (T(1) - out->data[i]);
    });
    return out;
}

template <typename T>
TensorPtr<T> add(Tape<T>& tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
    if (a->shape != b->shape)
        throw TensorError("add shape mismatch: " + shape_str(a->shape) + " vs " +
                          shape_str(b->shape));
    auto out = make_tensor<T>(a->shape);
    for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
    check_finite(*out, "add");
    tape.record([=]() {
        if (out->grad.empty()) return;
        a->ensure_grad();
        b->ensure_grad();
        for (size_t i = 0; i < a->data.size(); ++i) {
            a->grad[i] += out->grad[i];
            b->grad[i] += out->grad[i];
        }
    });
    return out;
}

/// Channel recalibration: out[n,c,i,j] = alpha[n,c] * u[n,c,i,j].
/// The only broadcasting this engine performs.
template <typename T>
TensorPtr<T> mul_channelwise(Tape<T>& tape, const TensorPtr<T>& u, const TensorPtr<T>& alpha) {
    if (u->rank() != 4 || alpha->rank() != 2 || alpha->dim(0) != u->dim(0) ||
        alpha->dim(1) != u->dim(1))
        throw TensorError("mul_channelwise expects (N,C,H,W) and matching (N,C), got " +
                          shape_str(u->shape) + " and " + shape_str(alpha->shape));
    const int N = u->dim(0), C = u->dim(1);
    const std::int64_t hw = static_cast<std::int64_t>(u->dim(2)) * u->dim(3);
    auto out = make_tensor<T>(u->shape);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const T a = alpha->data[static_cast<size_t>(n) * C + c];
            const T* p = u->data.data() + (static_cast<size_t>(n) * C + c) * hw;
            T* q = out->data.data() + (static_cast<size_t>(n) * C + c) * hw;
            for (std::int64_t i = 0; i < hw; ++i) q[i] = a * p[i];
        }
    check_finite(*out, "mul_channelwise");
    tape.record([=]() {
        if (out->grad.empty()) return;
        u->ensure_grad();
        alpha->ensure_grad();
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const size_t off = (static_cast<size_t>(n) * C + c) * hw;
                const T a = alpha->data[static_cast<size_t>(n) * C + c];
                T acc = 0;
                for (std::int64_t i = 0; i < hw; ++i) {
                    u->grad[off + i] += a * out->grad[off + i];
                    acc += u->data[off + i] * out->grad[off + i];
                }
                alpha->grad[static_cast<size_t>(n) * C + c] += acc;
            }
    });
    return out;
}

/// Exact global average pooling (the eval-mode descriptor):
/// (N,C,H,W) -> (N,C) mean over all spatial positions in row-major order.
template <typename T>
TensorPtr<T> gap(Tape<T>& tape, const TensorPtr<T>& x) {
    const int N = x->dim(0), C = x->dim(1);
    const std::int64_t hw = static_cast<std::int64_t>(x->dim(2)) * x->dim(3);
    auto out = make_tensor<T>({N, C});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const T* p = x->data.data() + (static_cast<size_t>(n) * C + c) * hw;
            T s = 0;
            for (std::int64_t i = 0; i < hw; ++i) s += p[i];
            out->data[static_cast<size_t>(n) * C + c] = s / static_cast<T>(hw);
        }
    tape.record([=]() {
        if (out->grad.empty()) return;
        x->ensure_grad();
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const T g = out->grad[static_cast<size_t>(n) * C + c] / static_cast<T>(hw);
                T* gx = x->grad.data() + (static_cast<size_t>(n) * C + c) * hw;
                for (std::int64_t i = 0; i < hw; ++i) gx[i] += g;
            }
    });
    return out;
}

/// Copy-reshape; total element count must be preserved.
template <typename T>
TensorPtr<T> reshape(Tape<T>& tape, const TensorPtr<T>& x, std::vector<int> shape) {
    auto out = make_tensor<T>(std::move(shape), x->data);
    if (out->numel() != x->numel())
        throw TensorError("reshape element count mismatch: " + shape_str(x->shape) + " -> " +
                          shape_str(out->shape));
    tape.record([=]() {
        if (out->grad.empty()) return;
        x->ensure_grad();
        for (size_t i = 0; i < x->data.size(); ++i) x->grad[i] += out->grad[i];
    });
    return out;
}

/// Stacks two (N,C) descriptors into an (N,1,2,C) grid; row 0 = a, row 1 = b.
template <typename T>
TensorPtr<T> fold_pair(Tape<T>& tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
    if (a->shape != b->shape || a->rank() != 2)
        throw TensorError("fold_pair expects two matching (N,C) tensors, got " +
                          shape_str(a->shape) + " and " + shape_str(b->shape));
    const int N = a->dim(0), C = a->dim(1);
    auto out = make_tensor<T>({N, 1, 2, C});
    for (int n = 0; n < N; ++n) {
        std::copy(a->data.begin() + static_cast<size_t>(n) * C,
                  a->data.begin() + static_cast<size_t>(n + 1) * C,
                  out->data.begin() + static_cast<size_t>(n) * 2 * C);
        std::copy(b->data.begin() + static_cast<size_t>(n) * C,
                  b->data.begin() + static_cast<size_t>(n + 1) * C,
                  out->data.begin() + static_cast<size_t>(n) * 2 * C + C);
    }
    tape.record([=]() {
        if (out->grad.empty()) return;
        a->ensure_grad();
        b->ensure_grad();
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                a->grad[static_cast<size_t>(n) * C + c] +=
                    out->grad[static_cast<size_t>(n) * 2 * C + c];
                b->grad[static_cast<size_t>(n) * C + c] +=
                    out->grad[static_cast<size_t>(n) * 2 * C + C + c];
            }
    });
    return out;
}

/// Mean softmax cross-entropy with two label sets mixed by lam
/// (lam = 1 recovers plain cross-entropy). Row-max stabilized.
template <typename T>
TensorPtr<T> softmax_xent_mix(Tape<T>& tape, const TensorPtr<T>& logits,
                              const std::vector<int>& labels_a, const std::vector<int>& labels_b,
                              T lam) {
    const int N = logits->dim(0), K = logits->dim(1);
    if (static_cast<int>(labels_a.size()) != N || static_cast<int>(labels_b.size()) != N)
        throw TensorError("softmax_xent label count mismatch");
    auto probs = std::make_shared<std::vector<T>>(static_cast<size_t>(N) * K);
    T loss = 0;
    for (int n = 0; n < N; ++n) {
        const T* row = logits->data.data() + static_cast<size_t>(n) * K;
        T mx = row[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        T z = 0;
        for (int k = 0; k < K; ++k) z += std::exp(row[k] - mx);
        T logz = std::log(z) + mx;
        for (int k = 0; k < K; ++k)
            (*probs)[static_cast<size_t>(n) * K + k] = std::exp(row[k] - logz);
        loss += lam * (logz - row[labels_a[n]]) + (T(1) - lam) * (logz - row[labels_b[n]]);
    }
    auto out = make_tensor<T>({1}, std::vector<T>{loss / static_cast<T>(N)});
    check_finite(*out, "softmax_xent");
    tape.record([=]() {
        if (out->grad.empty()) return;
        logits->ensure_grad();
        const T g = out->grad[0] / static_cast<T>(N);
        for (int n = 0; n < N; ++n)
            for (int k = 0; k < K; ++k) {
                T t = (*probs)[static_cast<size_t>(n) * K + k];
                if (k == labels_a[n]) t -= lam;
                if (k == labels_b[n]) t -= (T(1) - lam);
                logits->grad[static_cast<size_t>(n) * K + k] += g * t;
            }
    });
    return out;
}

template <typename T>
TensorPtr<T> softmax_xent(Tape<T>& tape, const TensorPtr<T>& logits,
                          const std::vector<int>& labels) {
    return softmax_xent_mix(tape, logits, labels, labels, T(1));
}

}  // namespace srp
