#include "acme/qtree/tree.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <stdexcept>

namespace acme::qtree {

std::string_view to_string(TopologyKind kind) {
    return kind == TopologyKind::kDtree ? "DTREE" : "TTREE";
}

TopologyKind topology_from_string(std::string_view text) {
    if (text == "DTREE" || text == "dtree") return TopologyKind::kDtree;
    if (text == "TTREE" || text == "ttree") return TopologyKind::kTtree;
    throw std::invalid_argument("unknown topology '" + std::string(text) + "'");
}

namespace {

bool same_prefix(const NodeId& a, const NodeId& b, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) {
        if (a[i] != b[i]) return false;
    }
    return true;
}

// Closest member of the group {prefix(from, level) + digit}, excluding from.
std::optional<NodeId> closest_in_group(const NodeId& from, std::size_t level, std::uint8_t digit,
                                       std::span<const NodeId> members, const LatencyFn& latency) {
    std::optional<NodeId> best;
    double best_latency = std::numeric_limits<double>::infinity();
    for (const auto& w : members) {
        if (w == from || w[level] != digit || !same_prefix(w, from, level)) continue;
        const double l = latency(from, w);
        if (!best || l < best_latency || (l == best_latency && w < *best)) {
            best = w;
            best_latency = l;
        }
    }
    return best;
}

}  // namespace

std::optional<NodeId> route_toward_key(const NodeId& from, const NodeId& key,
                                       std::span<const NodeId> members, const LatencyFn& latency) {
    if (from.size() != key.size()) throw std::invalid_argument("NodeId width mismatch");
    const auto width = key.size();
    std::size_t level = shared_prefix(from, key);
    while (level < width) {
        bool advanced = false;
        for (unsigned k = 0; k < NodeId::kBase; ++k) {
            const auto digit = static_cast<std::uint8_t>((key[level] + k) % NodeId::kBase);
            if (digit == from[level]) {
                // Our own table entry at this level: resolve the next digit locally.
                ++level;
                advanced = true;
                break;
            }
            if (auto hop = closest_in_group(from, level, digit, members, latency)) return hop;
        }
        if (!advanced) break;
    }
    return std::nullopt;
}

NodeId next_hop(const NodeId& v, const NodeId& root, std::span<const NodeId> members,
                const LatencyFn& latency) {
    if (members.empty()) throw std::invalid_argument("next_hop: empty membership");
    if (v == root) throw std::invalid_argument("next_hop: v is the root");
    const bool has_v = std::find(members.begin(), members.end(), v) != members.end();
    const bool has_root = std::find(members.begin(), members.end(), root) != members.end();
    if (!has_v) throw std::invalid_argument("next_hop: v is not a member");
    if (!has_root) throw std::invalid_argument("next_hop: root is not a member");
    auto hop = route_toward_key(v, root, members, latency);
    // root shares every digit with itself, so a candidate always exists.
    if (!hop) throw std::logic_error("next_hop: no route to a member root");
    return *hop;
}

NodeId key_owner(const NodeId& key, std::span<const NodeId> members, const LatencyFn& latency,
                 const NodeId& start) {
    NodeId current = start;
    for (std::size_t hops = 0; hops <= members.size(); ++hops) {
        auto hop = route_toward_key(current, key, members, latency);
        if (!hop) return current;
        current = *hop;
    }
    throw std::logic_error("key_owner: routing loop");
}

TreeStructure TreeStructure::from_parents(NodeId root, TopologyKind kind,
                                          std::map<NodeId, NodeId> parents) {
    if (parents.count(root) != 0) throw std::invalid_argument("tree root has a parent");
    TreeStructure tree(std::move(root), kind);
    tree.children_[tree.root_];
    for (const auto& [child, parent] : parents) {
        if (child == parent) throw std::invalid_argument("node is its own parent");
        tree.children_[parent].push_back(child);
        tree.children_[child];
    }
    for (auto& [node, kids] : tree.children_) {
        if (node != tree.root_ && parents.count(node) == 0) {
            throw std::invalid_argument("parent " + node.to_string() + " is not a member");
        }
        std::sort(kids.begin(), kids.end());
    }
    std::deque<NodeId> frontier{tree.root_};
    tree.depth_[tree.root_] = 0;
    while (!frontier.empty()) {
        const NodeId node = frontier.front();
        frontier.pop_front();
        const auto d = tree.depth_[node];
        for (const auto& child : tree.children_[node]) {
            tree.depth_[child] = d + 1;
            frontier.push_back(child);
        }
    }
    if (tree.depth_.size() != parents.size() + 1) {
        throw std::invalid_argument("parent map contains a cycle or unreachable node");
    }
    tree.parent_ = std::move(parents);
    return tree;
}

std::vector<NodeId> TreeStructure::members() const {
    std::vector<NodeId> out;
    out.reserve(depth_.size());
    for (const auto& [node, d] : depth_) out.push_back(node);
    return out;
}

std::optional<NodeId> TreeStructure::parent(const NodeId& v) const {
    if (!contains(v)) throw std::invalid_argument("node not in tree");
    auto it = parent_.find(v);
    if (it == parent_.end()) return std::nullopt;
    return it->second;
}

const std::vector<NodeId>& TreeStructure::children(const NodeId& v) const {
    auto it = children_.find(v);
    if (it == children_.end()) throw std::invalid_argument("node not in tree");
    return it->second;
}

std::size_t TreeStructure::depth(const NodeId& v) const {
    auto it = depth_.find(v);
    if (it == depth_.end()) throw std::invalid_argument("node not in tree");
    return it->second;
}

std::size_t TreeStructure::max_depth() const {
    std::size_t m = 0;
    for (const auto& [node, d] : depth_) m = std::max(m, d);
    return m;
}

std::size_t TreeStructure::subtree_size(const NodeId& v) const {
    return descendants(v).size() + 1;
}

std::vector<NodeId> TreeStructure::descendants(const NodeId& v) const {
    std::vector<NodeId> out;
    std::deque<NodeId> frontier{v};
    children(v);  // validates membership
    while (!frontier.empty()) {
        const NodeId node = frontier.front();
        frontier.pop_front();
        for (const auto& child : children_.at(node)) {
            out.push_back(child);
            frontier.push_back(child);
        }
    }
    return out;
}

TreeStructure build_tree(std::span<const NodeId> members, const NodeId& root, TopologyKind kind,
                         const LatencyFn& latency) {
    if (std::find(members.begin(), members.end(), root) == members.end()) {
        throw std::invalid_argument("build_tree: root is not a member");
    }
    std::vector<NodeId> sorted(members.begin(), members.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw std::invalid_argument("build_tree: duplicate member");
    }
    std::map<NodeId, NodeId> parents;
    for (const auto& v : sorted) {
        if (v == root) continue;
        parents.emplace(v, kind == TopologyKind::kDtree ? root : next_hop(v, root, sorted, latency));
    }
    return TreeStructure::from_parents(root, kind, std::move(parents));
}

TreeStats tree_stats(const TreeStructure& tree) {
    TreeStats stats;
    stats.max_depth = tree.max_depth();
    stats.depth_histogram.assign(stats.max_depth + 1, 0);
    double total = 0.0;
    for (const auto& v : tree.members()) {
        const auto d = tree.depth(v);
        ++stats.depth_histogram[d];
        total += static_cast<double>(d);
    }
    stats.avg_depth = total / static_cast<double>(tree.size());
    return stats;
}

}  // namespace acme::qtree
