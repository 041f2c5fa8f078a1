#pragma once

#include <string>
#include <vector>

#include "srp/tensor.hpp"

namespace srp {

struct GradCheckReport {
    double max_rel_err = 0.0;
    double tol = 0.0;
    std::string worst;  // "input i element j"
    bool passed = true;
};

/// Central-difference check of a scalar-valued computation against the
/// tape's reverse-mode gradients. `make_loss(tape)` must rebuild the loss
/// from the current contents of `inputs` (any randomness fixed by the
/// caller). rel err = |a-n| / max(|a|,|n|,1e-8); differences below `atol`
/// are ignored, since for near-zero gradients the central difference is
/// dominated by floating-point cancellation (~eps*|loss|/h).
template <typename F>
GradCheckReport grad_check(F&& make_loss, const std::vector<TensorPtr<double>>& inputs,
                           double h = 1e-5, double tol = 1e-4, double atol = 1e-9) {
    // Analytic pass.
    for (const auto& t : inputs) {
        t->ensure_grad();
        t->zero_grad();
    }
    {
        Tape<double> tape;
        auto loss = make_loss(tape);
        backward(tape, loss);
    }
    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (const auto& t : inputs) analytic.push_back(t->grad);

    auto eval = [&]() {
        Tape<double> tape;
        return make_loss(tape)->data[0];
    };

    GradCheckReport report;
    report.tol = tol;
    for (size_t i = 0; i < inputs.size(); ++i) {
        auto& t = *inputs[i];
        for (size_t j = 0; j < t.data.size(); ++j) {
            const double saved = t.data[j];
            t.data[j] = saved + h;
            const double up = eval();
            t.data[j] = saved - h;
            const double down = eval();
            t.data[j] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[i][j];
            if (std::fabs(a - numeric) < atol) continue;
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            const double rel = std::fabs(a - numeric) / denom;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst =
                    "input " + std::to_string(i) + " element " + std::to_string(j);
            }
        }
    }
    report.passed = report.max_rel_err < tol;
    return report;
}

}  // namespace srp
