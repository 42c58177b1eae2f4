#include "acme/ising/ising_node.hpp"

#include "acme/common/wire.hpp"
#include "acme/ising/timeout.hpp"

#include <stdexcept>

namespace acme::ising {

namespace {

enum class DownKind : std::uint8_t { kRegister = 1, kCancel = 2 };

std::string encode_up(QueryId id, std::uint64_t epoch, const PartialAggregate& p) {
    ByteWriter w;
    w.u64(id);
    w.u64(epoch);
    w.str(p.encode());
    return std::move(w).bytes();
}

}  // namespace

std::string root_respond(const std::vector<ResultTuple>& finalized) { return format_tuples(finalized); }

IsingNode::IsingNode(qtree::QTreeNode& qtree, IsingEnv& env, IsingConfig config)
    : qtree_(qtree), env_(env), config_(config) {
    qtree::QTreeNode::Handlers h;
    h.on_down = [this](const qtree::TreeHandle& t, const std::string& m) { on_down(t, m); };
    h.on_up = [this](const qtree::TreeHandle& t, const qtree::NodeId& c, const std::string& m) {
        on_up(t, c, m);
    };
    h.on_root_up = [this](const qtree::TreeHandle& t, const std::string& m) { on_root_up(t, m); };
    qtree_.set_handlers(std::move(h));
}

IsingNode::~IsingNode() {
    *alive_ = false;
    for (auto& [id, r] : queries_) {
        env_.loop().cancel(r.tick_timer);
        for (auto& [e, s] : r.epochs) env_.loop().cancel(s.deadline_timer);
    }
}

qtree::TreeHandle IsingNode::start_root() {
    if (tree_) throw std::logic_error("ISING root already started");
    auto h = qtree_.new_tree(config_.kind);
    tree_ = h.tree_id;
    return h;
}

std::vector<QueryId> IsingNode::registered() const {
    std::vector<QueryId> out;
    for (const auto& [id, r] : queries_) out.push_back(id);
    return out;
}

QueryId IsingNode::submit(const SensorQuery& query, Sink sink) {
    if (!tree_) throw std::logic_error("submit on a node that is not an ISING root");
    const QueryId id = (static_cast<QueryId>(qtree::NodeIdHash{}(qtree_.self()) & 0xffffffffu) << 32) |
                       ++next_query_;
    if (!query.all_hosts()) {
        register_query(id, *tree_, query, std::move(sink));
        queries_.at(id).direct = true;
        begin_epoch(id, 0);
        return id;
    }
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(DownKind::kRegister));
    w.u64(id);
    w.str(format_query(query));
    register_query(id, *tree_, query, std::move(sink));
    qtree_.qtree_down(*tree_, std::move(w).bytes());
    begin_epoch(id, 0);
    return id;
}

void IsingNode::cancel(QueryId id) {
    auto it = queries_.find(id);
    if (it == queries_.end()) return;
    if (!it->second.direct) {
        ByteWriter w;
        w.u8(static_cast<std::uint8_t>(DownKind::kCancel));
        w.u64(id);
        qtree_.qtree_down(it->second.tree, std::move(w).bytes());
    }
    unregister(id);
}

void IsingNode::on_down(const qtree::TreeHandle& h, const std::string& msg) {
    ByteReader r(msg);
    const auto kind = static_cast<DownKind>(r.u8());
    const QueryId id = r.u64();
    if (kind == DownKind::kCancel) {
        unregister(id);
        return;
    }
    if (queries_.count(id) != 0 || finished_.count(id) != 0) return;
    register_query(id, h.tree_id, parse_query(r.str()), nullptr);
    begin_epoch(id, 0);
}

void IsingNode::register_query(QueryId id, qtree::TreeId tree, SensorQuery query, Sink sink) {
    Registered r;
    r.id = id;
    r.tree = tree;
    r.query = std::move(query);
    r.registered_at = env_.loop().now_ms();
    r.sink = std::move(sink);
    queries_.emplace(id, std::move(r));
}

void IsingNode::unregister(QueryId id) {
    auto it = queries_.find(id);
    if (it == queries_.end()) return;
    env_.loop().cancel(it->second.tick_timer);
    for (auto& [e, s] : it->second.epochs) env_.loop().cancel(s.deadline_timer);
    queries_.erase(it);
    finished_.insert(id);
}

void IsingNode::schedule_tick(Registered& r) {
    if (r.query.is_snapshot()) return;
    const auto epoch = r.next_epoch;
    const double due = r.registered_at + static_cast<double>(epoch) * static_cast<double>(r.query.epoch_ms);
    const double delay = std::max(0.0, due - env_.loop().now_ms());
    const QueryId id = r.id;
    r.tick_timer = env_.loop().schedule(delay, [this, id, epoch] { begin_epoch(id, epoch); });
}

IsingNode::EpochState* IsingNode::epoch_state(QueryId id, std::uint64_t epoch) {
    auto it = queries_.find(id);
    if (it == queries_.end()) return nullptr;
    auto& r = it->second;
    if (epoch < r.floor) return nullptr;
    auto [eit, inserted] = r.epochs.try_emplace(epoch, r.query.op);
    return &eit->second;
}

void IsingNode::begin_epoch(QueryId id, std::uint64_t epoch) {
    auto it = queries_.find(id);
    if (it == queries_.end()) return;
    auto& r = it->second;
    r.next_epoch = epoch + 1;
    schedule_tick(r);
    if (r.direct) {
        run_direct(id, epoch);
        return;
    }
    if (!epoch_state(id, epoch)) return;
    auto alive = alive_;
    collect_local(r.query, std::nullopt, [this, alive, id, epoch](auto values) {
        if (*alive) local_collected(id, epoch, std::move(values));
    });
}

void IsingNode::collect_local(const SensorQuery& q, const std::optional<std::string>& host,
                              std::function<void(std::optional<std::vector<SensorValue>>)> done) {
    struct Gather {
        std::optional<std::string> main;
        std::map<std::pair<std::uint16_t, std::string>, std::optional<std::string>> refs;
        std::size_t outstanding = 0;
    };
    auto g = std::make_shared<Gather>();
    std::vector<SensorRef> refs;
    if (q.predicate) refs = referenced_sensors(*q.predicate);
    g->outstanding = 1 + refs.size();

    const std::string source = host.value_or(env_.host()) + ":" + std::to_string(q.port);
    auto finish = [this, g, q, source, done = std::move(done)]() {
        if (--g->outstanding != 0) return;
        if (!g->main) {
            done(std::nullopt);
            return;
        }
        if (q.predicate) {
            LocalFetch fetch = [g](const SensorRef& ref) -> std::optional<std::string> {
                auto it = g->refs.find({ref.port, ref.sensor});
                return it == g->refs.end() ? std::nullopt : it->second;
            };
            if (!eval_predicate(fetch, *q.predicate)) {
                done(std::nullopt);
                return;
            }
        }
        std::vector<SensorValue> values;
        const auto ts = env_.loop().wall_clock_ms();
        for (auto& v : apply_selection(*g->main, q.selection)) values.push_back({source, ts, std::move(v)});
        done(std::move(values));
    };
    auto shared_finish = std::make_shared<decltype(finish)>(std::move(finish));

    env_.fetch(host, q.port, q.sensor, q.args, [g, shared_finish](std::optional<std::string> body) {
        g->main = std::move(body);
        (*shared_finish)();
    });
    for (const auto& ref : refs) {
        auto key = std::make_pair(ref.port, ref.sensor);
        env_.fetch(host, ref.port, ref.sensor, "", [g, key, shared_finish](std::optional<std::string> body) {
            g->refs[key] = std::move(body);
            (*shared_finish)();
        });
    }
}

void IsingNode::local_collected(QueryId id, std::uint64_t epoch,
                                std::optional<std::vector<SensorValue>> values) {
    auto* s = epoch_state(id, epoch);
    if (!s || s->closed) return;
    if (!values) ++counters_.local_invalid;
    s->acc.merge(init_partial(s->acc.op(), values));
    s->local_done = true;
    const auto& r = queries_.at(id);
    const double timeout = node_timeout(qtree_.whats_my_level(r.tree), config_.max_depth,
                                        config_.compute_max_ms, config_.latency_max_ms);
    auto alive = alive_;
    s->deadline_timer = env_.loop().schedule(timeout, [this, alive, id, epoch] {
        if (!*alive) return;
        auto* st = epoch_state(id, epoch);
        if (!st || st->closed) return;
        st->deadline_passed = true;
        maybe_close(id, epoch);
    });
    maybe_close(id, epoch);
}

void IsingNode::on_up(const qtree::TreeHandle&, const qtree::NodeId& child, const std::string& msg) {
    ByteReader r(msg);
    const QueryId id = r.u64();
    const auto epoch = r.u64();
    auto partial = PartialAggregate::decode(r.str());
    auto* s = epoch_state(id, epoch);
    if (!s || s->closed || s->deadline_passed || s->seen.count(child) != 0) {
        ++counters_.late_discarded;
        return;
    }
    s->seen.insert(child);
    const double cost = config_.compute_per_value_ms * partial.value_units();
    if (is_incremental(partial.op())) {
        ++s->inflight;
        auto alive = alive_;
        env_.compute(cost, [this, alive, id, epoch, p = std::move(partial)] {
            if (!*alive) return;
            auto* st = epoch_state(id, epoch);
            if (!st || st->closed) return;
            st->acc.merge(p);
            --st->inflight;
            maybe_close(id, epoch);
        });
        return;
    }
    s->pending_units += partial.value_units();
    s->pending.push_back(std::move(partial));
    maybe_close(id, epoch);
}

void IsingNode::maybe_close(QueryId id, std::uint64_t epoch) {
    auto* s = epoch_state(id, epoch);
    if (!s || s->closed || !s->local_done || s->inflight != 0) return;
    const auto& r = queries_.at(id);
    const bool all_in = s->seen.size() >= qtree_.count_children(r.tree);
    if (!all_in && !s->deadline_passed) return;
    s->closed = true;
    env_.loop().cancel(s->deadline_timer);
    if (s->pending.empty()) {
        send_up(id, epoch);
        return;
    }
    auto alive = alive_;
    env_.compute(config_.compute_per_value_ms * s->pending_units, [this, alive, id, epoch] {
        if (!*alive) return;
        auto* st = epoch_state(id, epoch);
        if (!st) return;
        for (const auto& p : st->pending) st->acc.merge(p);
        st->pending.clear();
        send_up(id, epoch);
    });
}

void IsingNode::send_up(QueryId id, std::uint64_t epoch) {
    auto it = queries_.find(id);
    if (it == queries_.end()) return;
    auto& r = it->second;
    auto eit = r.epochs.find(epoch);
    if (eit == r.epochs.end()) return;
    const auto& acc = eit->second.acc;
    ++counters_.epochs_sent;
    const bool snapshot = r.query.is_snapshot();
    qtree_.qtree_up(r.tree, encode_up(id, epoch, acc), acc.value_units());
    if (snapshot) {
        unregister(id);
        return;
    }
    // keep a short window of closed epochs so stragglers are recognised as late
    if (epoch >= 4) {
        const auto new_floor = epoch - 3;
        if (new_floor > r.floor) {
            r.epochs.erase(r.epochs.begin(), r.epochs.lower_bound(new_floor));
            r.floor = new_floor;
        }
    }
}

void IsingNode::on_root_up(const qtree::TreeHandle&, const std::string& msg) {
    ByteReader r(msg);
    const QueryId id = r.u64();
    const auto epoch = r.u64();
    const auto partial = PartialAggregate::decode(r.str());
    auto it = queries_.find(id);
    if (it == queries_.end() || !it->second.sink) return;
    EpochResult result;
    result.query = id;
    result.epoch = epoch;
    result.contributors = partial.contributors();
    result.tuples = finalize_partial(partial, env_.root_source(), env_.loop().wall_clock_ms());
    result.last = it->second.query.is_snapshot();
    it->second.sink(result);
}

void IsingNode::run_direct(QueryId id, std::uint64_t epoch) {
    const auto& q = queries_.at(id).query;
    auto alive = alive_;
    collect_local(q, q.host, [this, alive, id, epoch](std::optional<std::vector<SensorValue>> values) {
        if (!*alive) return;
        auto it = queries_.find(id);
        if (it == queries_.end()) return;
        const auto partial = init_partial(it->second.query.op, values);
        EpochResult result;
        result.query = id;
        result.epoch = epoch;
        result.contributors = partial.contributors();
        result.tuples = finalize_partial(partial, env_.root_source(), env_.loop().wall_clock_ms());
        result.last = it->second.query.is_snapshot();
        auto sink = it->second.sink;
        if (result.last) unregister(id);
        if (sink) sink(result);
    });
}

}  // namespace acme::ising
