#include "acme/sensact/sensors.hpp"

#include "acme/common/csv.hpp"

#include <algorithm>
#include <fstream>

namespace acme::sensact {

SensorHandler hostname_sensor(std::string host) {
    return [host = std::move(host)](const SensorRequest&) { return join_csv_row({host}); };
}

SensorHandler load_sensor(std::function<double()> source) {
    return [source = std::move(source)](const SensorRequest&) {
        return ising::format_number(std::max(0.0, source()));
    };
}

std::optional<double> system_load() {
    std::ifstream in("/proc/loadavg");
    double one = 0.0;
    if (!(in >> one)) return std::nullopt;
    return one;
}

void CounterSet::add(const std::string& name, std::uint64_t delta) {
    std::lock_guard lock(mutex_);
    counters_[name] += delta;
}

std::uint64_t CounterSet::get(const std::string& name) const {
    std::lock_guard lock(mutex_);
    auto it = counters_.find(name);
    return it == counters_.end() ? 0 : it->second;
}

SensorHandler CounterSet::sensor() const {
    return [this](const SensorRequest& req) {
        auto it = req.args.find("name");
        if (it == req.args.end()) throw SensorError("counter needs name=");
        return std::to_string(get(it->second));
    };
}

std::vector<std::string> LogReader::read_new(const std::string& client) {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    std::ifstream in(path_, std::ios::binary);
    if (!in) return out;
    auto& cursor = cursors_[client];
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::uint64_t>(in.tellg());
    if (size < cursor) cursor = 0;  // truncated or rotated
    in.seekg(static_cast<std::streamoff>(cursor));
    std::string chunk(size - cursor, '\0');
    in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    const auto last_nl = chunk.rfind('\n');
    if (last_nl == std::string::npos) return out;
    chunk.resize(last_nl + 1);
    cursor += chunk.size();
    std::size_t start = 0;
    while (start < chunk.size()) {
        const auto nl = chunk.find('\n', start);
        std::string line = chunk.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(std::move(line));
        start = nl + 1;
    }
    return out;
}

SensorHandler LogReader::sensor() {
    return [this](const SensorRequest& req) {
        std::string body;
        for (const auto& line : read_new(req.client)) body += line + "\n";
        return body;
    };
}

std::string fanin_local(const std::vector<std::uint16_t>& ports, const std::string& sensor,
                        const std::string& args, const std::optional<ising::Selection>& selection,
                        ising::AggregateOp op, const InstanceFetch& fetch) {
    ising::PartialAggregate acc(op);
    for (auto port : ports) {
        const auto body = fetch(port, sensor, args);
        if (!body) continue;
        std::vector<ising::SensorValue> values;
        for (auto& v : ising::apply_selection(*body, selection)) values.push_back({"", 0, std::move(v)});
        acc.merge(ising::init_partial(op, values));
    }
    if (op == ising::AggregateOp::kValue) {
        std::string out;
        for (const auto& t : std::get<std::vector<ResultTuple>>(acc.state())) out += t.data + "\n";
        return out;
    }
    const auto tuples = ising::finalize_partial(acc, "", 0);
    return tuples.empty() ? std::string{} : tuples.front().data + "\n";
}

SensorHandler fanin_sensor(std::vector<std::uint16_t> ports, std::string sensor, ising::AggregateOp op,
                           InstanceFetch fetch) {
    return [ports = std::move(ports), sensor = std::move(sensor), op, fetch = std::move(fetch)](
               const SensorRequest& req) {
        std::string args;
        for (const auto& [k, v] : req.args) {
            if (!args.empty()) args += "&";
            args += ising::url_encode(k) + "=" + ising::url_encode(v);
        }
        return fanin_local(ports, sensor, args, std::nullopt, op, fetch);
    };
}

}  // namespace acme::sensact
