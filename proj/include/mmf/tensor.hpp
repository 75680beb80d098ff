#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "mmf/common.hpp"

namespace mmf {

// Shared storage behind a Tensor handle. Values are immutable once an op has
// produced them; only `grad` accumulates afterwards. Parameter updates between
// training steps write `data` directly through the handle.
struct TensorImpl {
    Shape shape;
    std::vector<scalar> data;
    std::vector<scalar> grad;  // empty until backward reaches this node
    bool requires_grad = false;

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
};

// Dense row-major n-d array with value semantics on the handle. Copying a
// Tensor aliases the same storage.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<scalar> data);

    static Tensor zeros(Shape shape);
    static Tensor ones(Shape shape);
    static Tensor full(Shape shape, scalar value);
    static Tensor vector(std::initializer_list<scalar> values);
    static Tensor uniform(Shape shape, scalar lo, scalar hi, std::mt19937_64& rng);
    static Tensor normal(Shape shape, scalar mean, scalar stddev, std::mt19937_64& rng);
    // Kaiming-uniform init for weights feeding a ReLU: U(+-sqrt(6/fan_in)).
    static Tensor kaiming_uniform(Shape shape, int64_t fan_in, std::mt19937_64& rng);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int ndim() const { return static_cast<int>(impl_->shape.size()); }
    int64_t dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
    int64_t numel() const { return impl_->numel(); }

    std::span<const scalar> data() const { return impl_->data; }
    std::span<scalar> mutable_data() { return impl_->data; }
    scalar item() const;
    // Row-major element access, for tests and small fixtures.
    scalar at(std::initializer_list<int64_t> idx) const;

    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    Tensor& set_requires_grad(bool on);
    bool has_grad() const { return impl_ && !impl_->grad.empty(); }
    std::span<const scalar> grad() const;
    void zero_grad();

    // Detached value copy (fresh storage, no grad tracking).
    Tensor clone_detached() const;

    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// Ordered record of executed differentiable ops. Construction activates the
// tape for the current thread; destruction restores the previous one. Ops
// record a node only while a tape is active and some input requires grad, so
// inference outside any tape pays no graph cost.
//
// Nodes are appended in execution order, which is a topological order of the
// dataflow graph; backward() walks them strictly in reverse, so every node's
// output gradient is complete before its rule fires.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    void record(std::shared_ptr<TensorImpl> out, std::function<void()> backward);
    size_t size() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = 1 and runs recorded rules in reverse execution
    // order. Gradients accumulate additively across multiple uses of a value.
    void backward(const Tensor& loss);

private:
    struct Node {
        std::shared_ptr<TensorImpl> out;
        std::function<void()> fn;
    };
    std::vector<Node> nodes_;
    Tape* prev_ = nullptr;
};

// Ensures grad storage exists, zero-filled, and returns it.
std::vector<scalar>& grad_buffer(TensorImpl& t);

// Scoped flag: when set, every op verifies its output is finite and throws
// Error naming the op otherwise. Used to locate the first NaN-producing op.
class FiniteCheckGuard {
public:
    FiniteCheckGuard();
    ~FiniteCheckGuard();
    static bool enabled();

private:
    bool prev_;
};

}  // namespace mmf
