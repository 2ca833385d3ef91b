#pragma once

#include <cmath>

#include "cpdr/errors.hpp"

namespace cpdr {

namespace detail {

// Linear ramp over the first `warm` steps, then polynomial decay to 0 at
// step `total`. warm == 0 skips the ramp entirely.
inline double poly_warmup_lr_steps(double base_lr, long warm, long total, double gamma,
                                   long step) {
    if (step < 0 || step > total) throw UsageError("lr query outside the schedule range");
    if (step < warm) return base_lr * static_cast<double>(step + 1) / static_cast<double>(warm);
    double frac = static_cast<double>(step - warm) / static_cast<double>(total - warm);
    return base_lr * std::pow(1.0 - frac, gamma);
}

} // namespace detail

struct Schedule {
    double base_lr = 1e-3;
    long warmup_epochs = 5;
    long total_epochs = 20;
    double gamma = 3.0;
    long steps_per_epoch = 1;

    void validate() const {
        if (!(base_lr > 0)) throw ConfigError("base_lr must be > 0");
        if (steps_per_epoch < 1) throw ConfigError("steps_per_epoch must be >= 1");
        if (total_epochs < 1) throw ConfigError("total_epochs must be >= 1");
        if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be >= 0");
        if (warmup_epochs >= total_epochs)
            throw ConfigError("warmup must be shorter than the full run");
        if (gamma < 0) throw ConfigError("gamma must be >= 0");
    }

    long warmup_steps() const { return warmup_epochs * steps_per_epoch; }
    long total_steps() const { return total_epochs * steps_per_epoch; }
};

inline double poly_warmup_lr(const Schedule& s, long step) {
    s.validate();
    return detail::poly_warmup_lr_steps(s.base_lr, s.warmup_steps(), s.total_steps(),
                                        s.gamma, step);
}

} // namespace cpdr
