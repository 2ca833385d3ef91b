#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace cpdr {

// Reverse-mode tape. Ops append their backward closures in execution order;
// backward() replays them exactly once in reverse. Gradients of tensors used
// by several ops accumulate additively. A tape is single-threaded; independent
// tapes may run on different threads.
class Tape {
  public:
    Tape() = default;

    // a non-recording tape, for plain inference
    static Tape inference() {
        Tape t;
        t.recording_ = false;
        return t;
    }

    bool recording() const { return recording_; }

    void record(std::function<void()> fn) {
        if (recording_) nodes_.push_back(std::move(fn));
    }

    std::size_t size() const { return nodes_.size(); }

    void clear() {
        nodes_.clear();
        replayed_ = false;
    }

    void replay_reverse_once() {
        if (replayed_)
            throw UsageError("Tape: backward already ran; clear() before reuse");
        replayed_ = true;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

  private:
    std::vector<std::function<void()>> nodes_;
    bool recording_ = true;
    bool replayed_ = false;
};

// Seeds d(loss)/d(loss) = 1 and propagates through the tape. Every
// requires_grad tensor reachable from the loss ends up holding its gradient;
// unreachable gradients stay zero.
inline void backward(const Tensor& loss, Tape& tape) {
    if (loss.numel() != 1)
        throw UsageError("backward: loss must be scalar, got " + to_string(loss.shape()));
    Tensor l = loss; // alias, shares storage
    l.ensure_grad();
    l.grad()[0] = 1.0;
    tape.replay_reverse_once();
}

} // namespace cpdr
