#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "tape.hpp"
#include "tensor.hpp"

namespace cpdr {

// scalar-valued function of one tensor (other captured state allowed)
using ScalarFn = std::function<Tensor(Tape&, const Tensor&)>;

namespace detail {
inline double eval_scalar(const ScalarFn& f, const Tensor& x) {
    Tape t = Tape::inference();
    Tensor v = f(t, x);
    if (v.numel() != 1) throw UsageError("grad_check: f must be scalar-valued");
    return v.data()[0];
}
} // namespace detail

// Central-difference gradient check. Returns the worst relative error
//   max_i |analytic_i - numeric_i| / max(1e-8, |analytic_i| + |numeric_i|)
// where numeric_i = (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps). x is
// perturbed in place (and restored), so a parameter tensor inside a model can
// be checked by passing the live tensor.
inline double grad_check(const ScalarFn& f, Tensor x, double eps = 1e-5) {
    if (eps <= 0.0) throw UsageError("grad_check: eps must be positive");
    x.set_requires_grad(true);
    x.ensure_grad();
    x.zero_grad();
    {
        Tape tape;
        Tensor loss = f(tape, x);
        if (loss.numel() != 1) throw UsageError("grad_check: f must be scalar-valued");
        backward(loss, tape);
    }
    std::vector<double> analytic(x.cgrad(), x.cgrad() + x.numel());

    double worst = 0.0;
    double* d = x.data();
    for (long i = 0; i < x.numel(); ++i) {
        const double keep = d[i];
        d[i] = keep + eps;
        const double fp = detail::eval_scalar(f, x);
        d[i] = keep - eps;
        const double fm = detail::eval_scalar(f, x);
        d[i] = keep;
        const double numeric = (fp - fm) / (2.0 * eps);
        const double a = analytic[static_cast<std::size_t>(i)];
        const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace cpdr
