#pragma once

#include <unordered_map>
#include <vector>

#include "srp/attention.hpp"
#include "srp/tensor.hpp"

namespace srp {

/// SGD with Nesterov momentum and decoupled-into-gradient weight decay:
///   v <- m*v + g + wd*p
///   p <- p - lr*(g + wd*p + m*v)
/// Gradients are zeroed after the step.
template <typename T>
class SgdNesterov {
public:
    SgdNesterov(T lr, T momentum, T weight_decay)
        : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}

    void set_lr(T lr) { lr_ = lr; }
    T lr() const { return lr_; }

    void step(const NamedParams<T>& params) {
        for (const auto& [name, p] : params) {
            if (p->grad.empty()) continue;
            auto& v = velocity_[p.get()];
            if (v.size() != p->data.size()) v.assign(p->data.size(), T(0));
            for (size_t i = 0; i < p->data.size(); ++i) {
                const T g = p->grad[i] + weight_decay_ * p->data[i];
                v[i] = momentum_ * v[i] + g;
                p->data[i] -= lr_ * (g + momentum_ * v[i]);
            }
            p->zero_grad();
        }
    }

private:
    T lr_, momentum_, weight_decay_;
    std::unordered_map<const Tensor<T>*, std::vector<T>> velocity_;
};

}  // namespace srp
