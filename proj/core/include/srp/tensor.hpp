#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace srp {

/// Thrown when an op produces NaN/Inf or a shape precondition fails.
struct TensorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

/// Dense row-major N-d array with an optional gradient buffer.
/// Activations are created fresh per forward pass; parameters persist and
/// are mutated only by the optimizer.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty unless requires_grad
    bool requires_grad = false;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, bool rg = false)
        : shape(std::move(s)), requires_grad(rg) {
        data.assign(numel(), T(0));
        if (requires_grad) grad.assign(numel(), T(0));
    }
    Tensor(std::vector<int> s, std::vector<T> d, bool rg = false)
        : shape(std::move(s)), data(std::move(d)), requires_grad(rg) {
        if (static_cast<std::int64_t>(data.size()) != numel())
            throw TensorError("tensor data size " + std::to_string(data.size()) +
                              " does not match shape " + shape_str(shape));
        if (requires_grad) grad.assign(numel(), T(0));
    }

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (int e : shape) n *= e;
        return n;
    }
    int dim(size_t i) const { return shape.at(i); }
    int rank() const { return static_cast<int>(shape.size()); }

    void ensure_grad() {
        requires_grad = true;
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
    void zero_grad() {
        std::fill(grad.begin(), grad.end(), T(0));
    }
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <typename T>
TensorPtr<T> make_tensor(std::vector<int> shape, bool rg = false) {
    return std::make_shared<Tensor<T>>(std::move(shape), rg);
}

template <typename T>
TensorPtr<T> make_tensor(std::vector<int> shape, std::vector<T> data, bool rg = false) {
    return std::make_shared<Tensor<T>>(std::move(shape), std::move(data), rg);
}

namespace detail {
inline bool& finite_checks_flag() {
    static bool enabled = true;
    return enabled;
}
}  // namespace detail

inline void set_finite_checks(bool on) { detail::finite_checks_flag() = on; }
inline bool finite_checks_enabled() { return detail::finite_checks_flag(); }

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
    if (!finite_checks_enabled()) return;
    for (const T& v : t.data) {
        if (!std::isfinite(static_cast<double>(v)))
            throw NumericalError(std::string("non-finite value produced by ") + op);
    }
}

/// Reverse-mode tape: ops append a backward closure as they execute;
/// backward() replays them in exact reverse order. Gradient accumulation
/// is additive everywhere.
template <typename T>
class Tape {
public:
    void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

    void backward() {
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

    void clear() { nodes_.clear(); }
    size_t size() const { return nodes_.size(); }

private:
    std::vector<std::function<void()>> nodes_;
};

/// Seeds d(loss)/d(loss)=1 and runs the tape backwards.
template <typename T>
void backward(Tape<T>& tape, const TensorPtr<T>& loss) {
    if (loss->numel() != 1)
        throw TensorError("backward expects a scalar loss, got shape " + shape_str(loss->shape));
    loss->ensure_grad();
    loss->grad[0] = T(1);
    tape.backward();
}

/// Backward from an arbitrary tensor with an explicit upstream gradient.
template <typename T>
void backward_from(Tape<T>& tape, const TensorPtr<T>& t, const std::vector<T>& seed) {
    if (static_cast<std::int64_t>(seed.size()) != t->numel())
        throw TensorError("backward seed size mismatch");
    t->ensure_grad();
    for (size_t i = 0; i < seed.size(); ++i) t->grad[i] += seed[i];
    tape.backward();
}

}  // namespace srp
