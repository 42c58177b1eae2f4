#include "acme/simnet/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace acme::simnet {

Simulator::EventId Simulator::at(double time_ms, std::function<void()> fn) {
    if (time_ms < now_) time_ms = now_;
    const auto id = ++next_;
    heap_.push_back(Event{time_ms, id, std::move(fn)});
    live_.insert(id);
    std::push_heap(heap_.begin(), heap_.end(), Later{});
    return id;
}

void Simulator::cancel(EventId id) {
    if (live_.erase(id) != 0) cancelled_.insert(id);
}

bool Simulator::pop(Event& out) {
    while (!heap_.empty()) {
        std::pop_heap(heap_.begin(), heap_.end(), Later{});
        Event e = std::move(heap_.back());
        heap_.pop_back();
        if (!cancelled_.empty()) {
            if (auto it = cancelled_.find(e.seq); it != cancelled_.end()) {
                cancelled_.erase(it);
                continue;
            }
        }
        live_.erase(e.seq);
        out = std::move(e);
        return true;
    }
    cancelled_.clear();
    return false;
}

bool Simulator::step() {
    Event e;
    if (!pop(e)) return false;
    now_ = e.time;
    ++executed_;
    e.fn();
    return true;
}

void Simulator::run() {
    while (step()) {
    }
}

void Simulator::drop_cancelled_top() {
    while (!heap_.empty() && cancelled_.count(heap_.front().seq) != 0) {
        cancelled_.erase(heap_.front().seq);
        std::pop_heap(heap_.begin(), heap_.end(), Later{});
        heap_.pop_back();
    }
}

void Simulator::run_until(double t) {
    while (true) {
        drop_cancelled_top();
        if (heap_.empty() || heap_.front().time > t) break;
        step();
    }
    if (t > now_) now_ = t;
}

bool Simulator::run_while_not(const std::function<bool()>& pred, double limit_ms) {
    while (!pred()) {
        drop_cancelled_top();
        if (heap_.empty() || heap_.front().time > limit_ms) return false;
        step();
    }
    return true;
}

std::int64_t SimLoop::wall_clock_ms() const { return offset_ + static_cast<std::int64_t>(std::llround(sim_.now())); }

TimerId SimLoop::schedule(double delay_ms, std::function<void()> fn) {
    return sim_.after(std::max(0.0, delay_ms), std::move(fn));
}

void SimLoop::cancel(TimerId id) { sim_.cancel(id); }

}  // namespace acme::simnet
