#pragma once

#include "acme/common/event_loop.hpp"
#include "acme/ising/aggregate.hpp"
#include "acme/ising/query.hpp"
#include "acme/qtree/qtree_node.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace acme::ising {

using QueryId = std::uint64_t;

struct IsingConfig {
    qtree::TopologyKind kind = qtree::TopologyKind::kTtree;
    double compute_max_ms = 100.0;
    double latency_max_ms = 400.0;
    std::size_t max_depth = 2 * qtree::NodeId::kDefaultDigits;
    /// CPU charged per child value merged.
    double compute_per_value_ms = 1.0;
};

/// What an ISING instance needs from its host: a loop, local sensor access
/// and a CPU. Sim and real mode provide different implementations.
class IsingEnv {
public:
    using FetchDone = std::function<void(std::optional<std::string>)>;

    virtual ~IsingEnv() = default;

    virtual EventLoop& loop() = 0;

    /// GET /sensor?args on host:port. `host` nullopt means this machine.
    /// `done` runs on the loop with the CSV body, or nullopt on refusal/failure.
    virtual void fetch(const std::optional<std::string>& host, std::uint16_t port,
                       const std::string& sensor, const std::string& args, FetchDone done) = 0;

    /// Runs fn on the loop after cost_ms of this node's CPU, FIFO with other work.
    virtual void compute(double cost_ms, std::function<void()> fn) {
        (void)cost_ms;
        loop().post(std::move(fn));
    }

    /// Host name of this node's sensor server.
    virtual std::string host() const = 0;

    /// host:port stamped on scalar results produced at this node.
    virtual std::string root_source() const = 0;
};

struct EpochResult {
    QueryId query = 0;
    std::uint64_t epoch = 0;
    std::uint32_t contributors = 0;
    std::vector<ResultTuple> tuples;
    bool last = false;  ///< no further epochs follow (snapshot or cancelled)
};

/// One node's ISING instance.
///
/// Queries submitted at the root are broadcast down the QTree and
/// registered at every node. Each epoch a node reads its local sensor,
/// folds the partials its children send for that epoch, and sends upward
/// once all children reported or its timeout expired. Partials for an
/// epoch that has already been sent are discarded.
class IsingNode {
public:
    using Sink = std::function<void(const EpochResult&)>;

    IsingNode(qtree::QTreeNode& qtree, IsingEnv& env, IsingConfig config = {});
    ~IsingNode();
    IsingNode(const IsingNode&) = delete;
    IsingNode& operator=(const IsingNode&) = delete;

    /// Root only: creates the aggregation tree. Called once before submit.
    qtree::TreeHandle start_root();
    std::optional<qtree::TreeId> tree() const { return tree_; }

    /// Root only. The sink sees one EpochResult per epoch.
    QueryId submit(const SensorQuery& query, Sink sink);
    void cancel(QueryId id);

    const IsingConfig& config() const { return config_; }

    struct Counters {
        std::uint64_t epochs_sent = 0;
        std::uint64_t late_discarded = 0;
        std::uint64_t local_invalid = 0;
    };
    const Counters& counters() const { return counters_; }

    /// Registered query ids, for inspection.
    std::vector<QueryId> registered() const;

private:
    struct EpochState {
        PartialAggregate acc;
        std::vector<PartialAggregate> pending;
        std::uint32_t pending_units = 0;
        std::set<qtree::NodeId> seen;
        std::size_t inflight = 0;
        bool local_done = false;
        bool deadline_passed = false;
        bool closed = false;
        TimerId deadline_timer = 0;

        explicit EpochState(AggregateOp op) : acc(op) {}
    };

    struct Registered {
        QueryId id = 0;
        qtree::TreeId tree = 0;
        SensorQuery query;
        double registered_at = 0.0;
        std::uint64_t next_epoch = 0;
        std::uint64_t floor = 0;  ///< epochs below are closed
        std::map<std::uint64_t, EpochState> epochs;
        TimerId tick_timer = 0;
        Sink sink;  ///< root only
        bool direct = false;  ///< single-host scope, no tree traffic
    };

    void on_down(const qtree::TreeHandle& h, const std::string& msg);
    void on_up(const qtree::TreeHandle& h, const qtree::NodeId& child, const std::string& msg);
    void on_root_up(const qtree::TreeHandle& h, const std::string& msg);

    void register_query(QueryId id, qtree::TreeId tree, SensorQuery query, Sink sink);
    void unregister(QueryId id);
    void schedule_tick(Registered& r);
    void begin_epoch(QueryId id, std::uint64_t epoch);
    void collect_local(const SensorQuery& q, const std::optional<std::string>& host,
                       std::function<void(std::optional<std::vector<SensorValue>>)> done);
    void local_collected(QueryId id, std::uint64_t epoch, std::optional<std::vector<SensorValue>> values);
    void maybe_close(QueryId id, std::uint64_t epoch);
    void send_up(QueryId id, std::uint64_t epoch);
    EpochState* epoch_state(QueryId id, std::uint64_t epoch);

    void run_direct(QueryId id, std::uint64_t epoch);

    qtree::QTreeNode& qtree_;
    IsingEnv& env_;
    IsingConfig config_;
    std::optional<qtree::TreeId> tree_;
    std::uint32_t next_query_ = 0;
    std::map<QueryId, Registered> queries_;
    std::set<QueryId> finished_;
    Counters counters_;
    std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
};

/// Result lines as served by the root.
std::string root_respond(const std::vector<ResultTuple>& finalized);

}  // namespace acme::ising
