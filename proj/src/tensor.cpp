#include "mmf/tensor.hpp"

#include <cmath>

namespace mmf {

namespace {

void check_shape(const Shape& shape) {
    for (int64_t d : shape) {
        if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
    }
}

thread_local Tape* g_active_tape = nullptr;
thread_local bool g_finite_check = false;

}  // namespace

Tensor::Tensor(Shape shape) {
    check_shape(shape);
    impl_ = std::make_shared<TensorImpl>();
    impl_->data.assign(static_cast<size_t>(shape_numel(shape)), scalar{0});
    impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<scalar> data) {
    check_shape(shape);
    if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
        throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                         shape_str(shape));
    }
    impl_ = std::make_shared<TensorImpl>();
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
}

Tensor Tensor::zeros(Shape shape) { return Tensor(std::move(shape)); }

Tensor Tensor::ones(Shape shape) { return full(std::move(shape), scalar{1}); }

Tensor Tensor::full(Shape shape, scalar value) {
    Tensor t(std::move(shape));
    for (auto& v : t.impl_->data) v = value;
    return t;
}

Tensor Tensor::vector(std::initializer_list<scalar> values) {
    return Tensor({static_cast<int64_t>(values.size())}, std::vector<scalar>(values));
}

Tensor Tensor::uniform(Shape shape, scalar lo, scalar hi, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<scalar> dist(lo, hi);
    for (auto& v : t.impl_->data) v = dist(rng);
    return t;
}

Tensor Tensor::normal(Shape shape, scalar mean, scalar stddev, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<scalar> dist(mean, stddev);
    for (auto& v : t.impl_->data) v = dist(rng);
    return t;
}

Tensor Tensor::kaiming_uniform(Shape shape, int64_t fan_in, std::mt19937_64& rng) {
    if (fan_in <= 0) throw ContractError("kaiming_uniform: fan_in must be positive");
    scalar bound = std::sqrt(scalar{6} / static_cast<scalar>(fan_in));
    return uniform(std::move(shape), -bound, bound, rng);
}

scalar Tensor::item() const {
    if (numel() != 1) throw ContractError("item() requires a scalar tensor, got " + shape_str(shape()));
    return impl_->data[0];
}

scalar Tensor::at(std::initializer_list<int64_t> idx) const {
    if (static_cast<int>(idx.size()) != ndim()) {
        throw ContractError("at(): index rank does not match tensor rank");
    }
    int64_t flat = 0;
    int i = 0;
    for (int64_t v : idx) {
        flat = flat * impl_->shape[static_cast<size_t>(i)] + v;
        ++i;
    }
    return impl_->data[static_cast<size_t>(flat)];
}

Tensor& Tensor::set_requires_grad(bool on) {
    impl_->requires_grad = on;
    return *this;
}

std::span<const scalar> Tensor::grad() const {
    if (!has_grad()) throw ContractError("tensor has no gradient; run backward first");
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (impl_) impl_->grad.clear();
}

Tensor Tensor::clone_detached() const {
    return Tensor(impl_->shape, impl_->data);
}

std::vector<scalar>& grad_buffer(TensorImpl& t) {
    if (t.grad.empty()) t.grad.assign(t.data.size(), scalar{0});
    return t.grad;
}

Tape::Tape() {
    prev_ = g_active_tape;
    g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::shared_ptr<TensorImpl> out, std::function<void()> backward) {
    nodes_.push_back(Node{std::move(out), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward: loss must be a scalar tensor");
    }
    bool on_tape = false;
    for (const auto& n : nodes_) {
        if (n.out == loss.impl()) {
            on_tape = true;
            break;
        }
    }
    if (!on_tape) throw ContractError("backward: loss was not produced on this tape");

    grad_buffer(*loss.impl())[0] += scalar{1};
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        // A node whose output never received gradient is off the path to
        // the loss; skip it.
        if (it->out->grad.empty()) continue;
        it->fn();
    }
}

FiniteCheckGuard::FiniteCheckGuard() : prev_(g_finite_check) { g_finite_check = true; }

FiniteCheckGuard::~FiniteCheckGuard() { g_finite_check = prev_; }

bool FiniteCheckGuard::enabled() { return g_finite_check; }

}  // namespace mmf
