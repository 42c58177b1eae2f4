#pragma once

#include <cstdint>
#include <functional>

namespace acme {

using TimerId = std::uint64_t;

/// A node's single logical event loop. Everything owned by a node (QTree
/// views, registered queries, trigger state) is touched only from callbacks
/// run by its loop. The simulator and the real-mode runtime each provide one.
class EventLoop {
public:
    virtual ~EventLoop() = default;

    /// Monotonic loop time in milliseconds.
    virtual double now_ms() const = 0;

    /// Local wall clock used to timestamp sensor data.
    virtual std::int64_t wall_clock_ms() const { return static_cast<std::int64_t>(now_ms()); }

    virtual TimerId schedule(double delay_ms, std::function<void()> fn) = 0;
    virtual void cancel(TimerId id) = 0;

    /// Runs fn on the loop as soon as possible, after already-queued work.
    void post(std::function<void()> fn) { schedule(0.0, std::move(fn)); }
};

}  // namespace acme
