#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cpdr/errors.hpp"
#include "cpdr/tensor.hpp"

namespace cpdr {

// Ordered registry of named trainable tensors. Registration order is the
// canonical order for the optimizer and the checkpoint file, so it must be
// deterministic for a given model configuration.
class ParamSet {
public:
    Tensor add(const std::string& name, const Shape& shape) {
        if (find(name) >= 0) throw UsageError("duplicate parameter name: " + name);
        Tensor t(shape);
        t.set_requires_grad(true);
        t.ensure_grad();
        items_.emplace_back(name, t);
        return t;
    }

    std::size_t size() const { return items_.size(); }
    const std::string& name(std::size_t i) const { return items_[i].first; }
    Tensor tensor(std::size_t i) const { return items_[i].second; }

    // index of a name, -1 if absent
    long find(const std::string& name) const {
        for (std::size_t i = 0; i < items_.size(); ++i)
            if (items_[i].first == name) return static_cast<long>(i);
        return -1;
    }

    Tensor at(const std::string& name) const {
        long i = find(name);
        if (i < 0) throw UsageError("no parameter named " + name);
        return items_[static_cast<std::size_t>(i)].second;
    }

    long total_count() const {
        long n = 0;
        for (const auto& [_, t] : items_) n += t.numel();
        return n;
    }

    void zero_grads() {
        for (auto& [_, t] : items_) t.zero_grad();
    }

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

} // namespace cpdr
