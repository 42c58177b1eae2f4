#pragma once

#include "acme/common/event_loop.hpp"

#include <cstdint>
#include <functional>
#include <unordered_set>
#include <vector>

namespace acme::simnet {

/// Single-threaded discrete-event scheduler over virtual milliseconds.
/// Events run in time order; equal times run in insertion order.
class Simulator {
public:
    using EventId = std::uint64_t;

    double now() const { return now_; }

    EventId at(double time_ms, std::function<void()> fn);
    EventId after(double delay_ms, std::function<void()> fn) { return at(now_ + delay_ms, std::move(fn)); }
    void cancel(EventId id);

    /// Runs the next event; false when none is left.
    bool step();
    void run();
    /// Runs every event with time <= t, then sets the clock to t.
    void run_until(double t);
    /// Runs until pred() holds after an event or the queue drains; true if pred held.
    bool run_while_not(const std::function<bool()>& pred, double limit_ms);

    std::size_t pending() const { return live_.size(); }
    std::uint64_t executed() const { return executed_; }

private:
    struct Event {
        double time;
        EventId seq;
        std::function<void()> fn;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            return a.time != b.time ? a.time > b.time : a.seq > b.seq;
        }
    };

    bool pop(Event& out);
    void drop_cancelled_top();

    double now_ = 0.0;
    EventId next_ = 0;
    std::uint64_t executed_ = 0;
    std::vector<Event> heap_;
    std::unordered_set<EventId> live_;
    std::unordered_set<EventId> cancelled_;
};

/// A node's event loop backed by the simulator clock.
class SimLoop : public EventLoop {
public:
    explicit SimLoop(Simulator& sim, std::int64_t clock_offset_ms = 0) : sim_(sim), offset_(clock_offset_ms) {}

    double now_ms() const override { return sim_.now(); }
    std::int64_t wall_clock_ms() const override;
    TimerId schedule(double delay_ms, std::function<void()> fn) override;
    void cancel(TimerId id) override;

private:
    Simulator& sim_;
    std::int64_t offset_;
};

}  // namespace acme::simnet
