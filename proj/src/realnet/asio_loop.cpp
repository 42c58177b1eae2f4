#include "acme/realnet/asio_loop.hpp"

#include <boost/asio/post.hpp>

namespace acme::realnet {

AsioLoop::AsioLoop() : io_(std::make_shared<boost::asio::io_context>()), epoch_(std::chrono::steady_clock::now()) {}

AsioLoop::~AsioLoop() { stop(); }

double AsioLoop::now_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - epoch_).count();
}

std::int64_t AsioLoop::wall_clock_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

TimerId AsioLoop::schedule(double delay_ms, std::function<void()> fn) {
    const TimerId id = ++next_;
    auto timer = std::make_unique<boost::asio::steady_timer>(*io_);
    timer->expires_after(std::chrono::microseconds(static_cast<std::int64_t>(std::max(0.0, delay_ms) * 1000.0)));
    timer->async_wait([this, id, fn = std::move(fn)](const boost::system::error_code& ec) {
        if (ec) return;
        timers_.erase(id);
        fn();
    });
    timers_.emplace(id, std::move(timer));
    return id;
}

void AsioLoop::cancel(TimerId id) {
    auto it = timers_.find(id);
    if (it == timers_.end()) return;
    it->second->cancel();
    timers_.erase(it);
}

void AsioLoop::run_in_loop(std::function<void()> fn) { boost::asio::post(*io_, std::move(fn)); }

void AsioLoop::start() {
    if (thread_.joinable()) return;
    work_ = std::make_unique<boost::asio::executor_work_guard<boost::asio::io_context::executor_type>>(
        io_->get_executor());
    thread_ = std::thread([io = io_] { io->run(); });
}

void AsioLoop::stop() {
    if (!thread_.joinable()) return;
    work_.reset();
    io_->stop();
    thread_.join();
    timers_.clear();
}

}  // namespace acme::realnet
