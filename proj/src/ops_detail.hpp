#pragma once

#include <cmath>
#include <string>

#include "mmf/ops.hpp"

// Shared helpers for op implementations.
namespace mmf::detail {

inline bool tracing(std::initializer_list<const Tensor*> ins) {
    if (!Tape::active()) return false;
    for (const Tensor* t : ins) {
        if (t->requires_grad()) return true;
    }
    return false;
}

inline void check_finite(const char* op, const Tensor& t) {
    if (!FiniteCheckGuard::enabled()) return;
    for (scalar v : t.data()) {
        if (!std::isfinite(v)) {
            throw Error(std::string("non-finite value produced by op '") + op + "'");
        }
    }
}

inline Tensor finish(const char* op, Tensor out, bool traced) {
    if (traced) out.set_requires_grad(true);
    check_finite(op, out);
    return out;
}

inline int64_t outer_size(const Shape& s, int axis) {
    int64_t n = 1;
    for (int i = 0; i < axis; ++i) n *= s[static_cast<size_t>(i)];
    return n;
}

inline int64_t inner_size(const Shape& s, int axis) {
    int64_t n = 1;
    for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) n *= s[i];
    return n;
}

inline int normalize_axis(int axis, int ndim, const char* op) {
    if (axis < 0) axis += ndim;
    if (axis < 0 || axis >= ndim) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(ndim));
    }
    return axis;
}

}  // namespace mmf::detail
