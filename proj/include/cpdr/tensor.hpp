#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace cpdr {

struct Shape {
    long n = 1, c = 1, h = 1, w = 1;

    long numel() const { return n * c * h * w; }
    bool operator==(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
    return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," +
           std::to_string(s.h) + "," + std::to_string(s.w) + ")";
}

namespace detail {
struct Storage {
    std::vector<double> value;
    std::vector<double> grad; // empty until first needed
    bool requires_grad = false;
};
} // namespace detail

// Dense NCHW tensor of doubles. Copies are cheap handles onto shared storage
// (clone() deep-copies); the gradient buffer lives beside the values, so every
// alias of a tensor sees the gradients accumulated by backward(). A tensor is
// safe to hand to another thread as long as the two threads do not touch the
// same storage concurrently.
class Tensor {
  public:
    Tensor() : Tensor(Shape{1, 1, 1, 1}) {}

    explicit Tensor(Shape s, double fill = 0.0) : shape_(s) {
        if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1)
            throw ShapeError("Tensor: nonpositive dimension in " + to_string(s));
        st_ = std::make_shared<detail::Storage>();
        st_->value.assign(static_cast<std::size_t>(s.numel()), fill);
    }

    static Tensor zeros(Shape s) { return Tensor(s, 0.0); }
    static Tensor full(Shape s, double v) { return Tensor(s, v); }
    static Tensor scalar(double v) { return Tensor(Shape{1, 1, 1, 1}, v); }

    static Tensor from(Shape s, std::vector<double> values) {
        Tensor t(s);
        if (values.size() != static_cast<std::size_t>(s.numel()))
            throw ShapeError("Tensor::from: " + std::to_string(values.size()) +
                             " values for shape " + to_string(s));
        t.st_->value = std::move(values);
        return t;
    }

    const Shape& shape() const { return shape_; }
    long n() const { return shape_.n; }
    long c() const { return shape_.c; }
    long h() const { return shape_.h; }
    long w() const { return shape_.w; }
    long numel() const { return shape_.numel(); }

    double* data() { return st_->value.data(); }
    const double* data() const { return st_->value.data(); }
    const std::vector<double>& values() const { return st_->value; }

    std::size_t index(long n, long c, long h, long w) const {
        return static_cast<std::size_t>(((n * shape_.c + c) * shape_.h + h) * shape_.w + w);
    }
    double& at(long n, long c, long h, long w) { return st_->value[index(n, c, h, w)]; }
    double at(long n, long c, long h, long w) const { return st_->value[index(n, c, h, w)]; }

    bool requires_grad() const { return st_->requires_grad; }
    Tensor& set_requires_grad(bool b) {
        st_->requires_grad = b;
        return *this;
    }

    bool grad_allocated() const { return !st_->grad.empty(); }

    void ensure_grad() {
        if (st_->grad.empty()) st_->grad.assign(st_->value.size(), 0.0);
    }

    // mutable gradient buffer, allocated (zeroed) on demand
    double* grad() {
        ensure_grad();
        return st_->grad.data();
    }

    const double* cgrad() const {
        if (st_->grad.empty())
            throw UsageError("Tensor: gradient read before backward populated it");
        return st_->grad.data();
    }

    void zero_grad() {
        if (!st_->grad.empty()) std::fill(st_->grad.begin(), st_->grad.end(), 0.0);
    }

    // deep copy of the values; fresh storage, no gradient buffer
    Tensor clone() const {
        Tensor t(shape_);
        t.st_->value = st_->value;
        t.st_->requires_grad = st_->requires_grad;
        return t;
    }

    bool same_storage(const Tensor& o) const { return st_ == o.st_; }

  private:
    Shape shape_;
    std::shared_ptr<detail::Storage> st_;
};

} // namespace cpdr
