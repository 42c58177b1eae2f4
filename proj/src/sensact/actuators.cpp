#include "acme/sensact/actuators.hpp"

#include "acme/common/csv.hpp"
#include "acme/ising/aggregate.hpp"

#include <csignal>
#include <spawn.h>
#include <sys/wait.h>

#include <stdexcept>

extern char** environ;

namespace acme::sensact {

std::string format_result(const ActuatorResult& r) {
    return join_csv_row({r.ok ? "OK" : "ERROR", r.detail});
}

ActuatorResult parse_result(std::string_view row) {
    while (!row.empty() && (row.back() == '\n' || row.back() == '\r')) row.remove_suffix(1);
    auto fields = split_csv_row(row);
    if (fields.empty() || (fields[0] != "OK" && fields[0] != "ERROR")) {
        throw std::invalid_argument("not an actuator result: " + std::string(row));
    }
    ActuatorResult r;
    r.ok = fields[0] == "OK";
    for (std::size_t i = 1; i < fields.size(); ++i) {
        if (i > 1) r.detail += ",";
        r.detail += fields[i];
    }
    return r;
}

std::optional<std::string> VirtualProcessManager::start() {
    auto id = prefix_ + "-" + std::to_string(++next_);
    live_.insert(id);
    if (on_start) on_start(id);
    return id;
}

bool VirtualProcessManager::kill(const std::string& id) {
    if (live_.erase(id) == 0) return false;
    if (on_kill) on_kill(id);
    return true;
}

bool VirtualProcessManager::reboot() {
    ++reboots_;
    if (live_.empty()) return false;
    for (const auto& id : live_) {
        if (on_kill) on_kill(id);
        if (on_start) on_start(id);
    }
    return true;
}

std::vector<std::string> VirtualProcessManager::census() const { return {live_.begin(), live_.end()}; }

LocalProcessManager::LocalProcessManager(std::vector<std::string> argv) : argv_(std::move(argv)) {
    if (argv_.empty()) throw std::invalid_argument("process command is empty");
}

LocalProcessManager::~LocalProcessManager() {
    std::lock_guard lock(mutex_);
    for (const auto& [id, pid] : live_) {
        ::kill(pid, SIGTERM);
        ::waitpid(pid, nullptr, 0);
    }
}

void LocalProcessManager::reap() {
    for (auto it = live_.begin(); it != live_.end();) {
        if (::waitpid(it->second, nullptr, WNOHANG) == it->second) {
            it = live_.erase(it);
        } else {
            ++it;
        }
    }
}

std::optional<std::string> LocalProcessManager::start() {
    std::lock_guard lock(mutex_);
    std::vector<char*> args;
    for (auto& a : argv_) args.push_back(a.data());
    args.push_back(nullptr);
    pid_t pid = 0;
    if (posix_spawnp(&pid, args[0], nullptr, nullptr, args.data(), environ) != 0) return std::nullopt;
    auto id = std::to_string(pid);
    live_[id] = pid;
    return id;
}

bool LocalProcessManager::kill(const std::string& id) {
    std::lock_guard lock(mutex_);
    reap();
    auto it = live_.find(id);
    if (it == live_.end()) return false;
    ::kill(it->second, SIGTERM);
    ::waitpid(it->second, nullptr, 0);
    live_.erase(it);
    return true;
}

bool LocalProcessManager::reboot() {
    std::size_t n = 0;
    {
        std::lock_guard lock(mutex_);
        reap();
        n = live_.size();
        for (const auto& [id, pid] : live_) {
            ::kill(pid, SIGTERM);
            ::waitpid(pid, nullptr, 0);
        }
        live_.clear();
    }
    for (std::size_t i = 0; i < n; ++i) start();
    return n != 0;
}

std::vector<std::string> LocalProcessManager::census() const {
    std::lock_guard lock(mutex_);
    const_cast<LocalProcessManager*>(this)->reap();
    std::vector<std::string> out;
    for (const auto& [id, pid] : live_) out.push_back(id);
    return out;
}

ActuatorLedger::ActuatorLedger(std::filesystem::path path) : path_(std::move(path)) {
    const bool fresh = !std::filesystem::exists(path_) || std::filesystem::file_size(path_) == 0;
    out_.open(path_, std::ios::app);
    if (!out_) throw std::runtime_error("cannot open ledger " + path_.string());
    if (fresh) out_ << "timestamp_ms,actuator,args,status,detail\n" << std::flush;
}

void ActuatorLedger::append(std::int64_t timestamp_ms, const std::string& actuator, const std::string& args,
                            const ActuatorResult& result) {
    std::lock_guard lock(mutex_);
    out_ << join_csv_row({std::to_string(timestamp_ms), actuator, args, result.ok ? "OK" : "ERROR",
                          result.detail})
         << "\n"
         << std::flush;
}

std::vector<LedgerRow> read_ledger(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::vector<LedgerRow> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        auto f = split_csv_row(line);
        if (f.size() != 5) throw std::invalid_argument("bad ledger row: " + line);
        rows.push_back({std::stoll(f[0]), f[1], f[2], {f[3] == "OK", f[4]}});
    }
    return rows;
}

std::set<std::string> replay_census(const std::vector<LedgerRow>& rows) {
    std::set<std::string> live;
    for (const auto& row : rows) {
        if (!row.result.ok) continue;
        if (row.actuator == "startNode") {
            std::size_t start = 0;
            const auto& d = row.result.detail;
            while (start < d.size()) {
                auto end = d.find(';', start);
                if (end == std::string::npos) end = d.size();
                live.insert(d.substr(start, end - start));
                start = end + 1;
            }
        } else if (row.actuator == "killNode") {
            live.erase(row.result.detail);
        }
    }
    return live;
}

namespace {

std::string join_args(const SensorRequest& req) {
    std::string out;
    for (const auto& [k, v] : req.args) {
        if (!out.empty()) out += "&";
        out += k + "=" + v;
    }
    return out;
}

std::optional<double> number_arg(const SensorRequest& req, const std::string& key) {
    auto it = req.args.find(key);
    if (it == req.args.end()) return std::nullopt;
    return ising::parse_number(it->second);
}

}  // namespace

void add_actuators(SensorServer& server, ActuatorDeps deps) {
    auto wrap = [deps](std::string name, std::function<ActuatorResult(const SensorRequest&)> fn) {
        return [deps, name = std::move(name), fn = std::move(fn)](const SensorRequest& req) {
            const auto result = fn(req);
            if (deps.ledger) deps.ledger->append(deps.clock ? deps.clock() : 0, name, join_args(req), result);
            return format_result(result);
        };
    };

    server.add("startNode", wrap("startNode", [deps](const SensorRequest& req) {
                   if (!deps.processes) return ActuatorResult::error("no process manager");
                   const auto count = number_arg(req, "count").value_or(1.0);
                   if (count < 1 || count != static_cast<double>(static_cast<long>(count))) {
                       return ActuatorResult::error("count must be a positive integer");
                   }
                   std::string ids;
                   for (long i = 0; i < static_cast<long>(count); ++i) {
                       auto id = deps.processes->start();
                       if (!id) return ActuatorResult::error("start failed after " + std::to_string(i));
                       if (!ids.empty()) ids += ";";
                       ids += *id;
                   }
                   return ActuatorResult::success(ids);
               }));

    server.add("killNode", wrap("killNode", [deps](const SensorRequest& req) {
                   if (!deps.processes) return ActuatorResult::error("no process manager");
                   auto it = req.args.find("target");
                   if (it == req.args.end()) return ActuatorResult::error("killNode needs target=");
                   if (!deps.processes->kill(it->second)) {
                       return ActuatorResult::error("no live instance " + it->second);
                   }
                   return ActuatorResult::success(it->second);
               }));

    server.add("reboot", wrap("reboot", [deps](const SensorRequest&) {
                   if (!deps.processes) return ActuatorResult::error("no process manager");
                   const auto n = deps.processes->census().size();
                   deps.processes->reboot();
                   return ActuatorResult::success(std::to_string(n));
               }));

    server.add("setLoss", wrap("setLoss", [deps](const SensorRequest& req) {
                   if (!deps.app) return ActuatorResult::error("no application");
                   const auto f = number_arg(req, "fraction");
                   if (!f || *f < 0.0 || *f > 1.0) return ActuatorResult::error("fraction must be in [0,1]");
                   deps.app->set_loss(*f);
                   return ActuatorResult::success(ising::format_number(*f));
               }));

    server.add("setWorkloadRate", wrap("setWorkloadRate", [deps](const SensorRequest& req) {
                   if (!deps.app) return ActuatorResult::error("no application");
                   const auto p = number_arg(req, "period");
                   if (!p || *p <= 0.0) return ActuatorResult::error("period must be > 0 ms");
                   deps.app->set_workload_period(*p);
                   return ActuatorResult::success(ising::format_number(*p));
               }));
}

}  // namespace acme::sensact
