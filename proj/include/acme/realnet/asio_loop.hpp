#pragma once

#include "acme/common/event_loop.hpp"

#include <boost/asio/io_context.hpp>
#include <boost/asio/steady_timer.hpp>

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

namespace acme::realnet {

/// EventLoop on an asio io_context driven by one thread. schedule/cancel
/// belong to the loop thread; other threads hand work over with run_in_loop.
class AsioLoop : public EventLoop {
public:
    AsioLoop();
    ~AsioLoop() override;

    double now_ms() const override;
    std::int64_t wall_clock_ms() const override;
    TimerId schedule(double delay_ms, std::function<void()> fn) override;
    void cancel(TimerId id) override;

    /// Thread-safe.
    void run_in_loop(std::function<void()> fn);

    /// Starts the loop thread.
    void start();
    /// Stops the loop and joins its thread.
    void stop();

    boost::asio::io_context& io() { return *io_; }
    std::shared_ptr<boost::asio::io_context> io_ptr() const { return io_; }

private:
    std::shared_ptr<boost::asio::io_context> io_;
    std::unique_ptr<boost::asio::executor_work_guard<boost::asio::io_context::executor_type>> work_;
    std::thread thread_;
    std::chrono::steady_clock::time_point epoch_;
    TimerId next_ = 0;
    std::map<TimerId, std::unique_ptr<boost::asio::steady_timer>> timers_;
};

}  // namespace acme::realnet
