#pragma once

#include "acme/qtree/node_id.hpp"

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace acme::qtree {

enum class TopologyKind : std::uint8_t {
    kDtree = 0,  ///< every node is a direct child of the root
    kTtree = 1,  ///< parent = next prefix-routing hop toward the root
};

std::string_view to_string(TopologyKind kind);
TopologyKind topology_from_string(std::string_view text);

/// One-way latency between two members, in milliseconds.
using LatencyFn = std::function<double(const NodeId&, const NodeId&)>;

/// Next hop from v on the prefix-routing path toward root.
///
/// Let l be the prefix v shares with root. Candidates are the members that
/// share at least l+1 digits with root; root is always one of them. When the
/// desired digit has no member the search moves to the next digit mod 4
/// (surrogate step), which only happens for non-member targets. The closest
/// candidate by latency wins, ties going to the smaller NodeId.
///
/// Throws std::invalid_argument if members is empty, v or root is not a
/// member, or v == root.
NodeId next_hop(const NodeId& v, const NodeId& root, std::span<const NodeId> members,
                const LatencyFn& latency);

/// Prefix routing toward an arbitrary key with surrogate digit fallback.
/// Returns nullopt when `from` is itself the key's surrogate root (owner).
std::optional<NodeId> route_toward_key(const NodeId& from, const NodeId& key,
                                       std::span<const NodeId> members, const LatencyFn& latency);

/// Owner of a key: the node at which route_toward_key terminates when
/// started from `start`. Every start reaches the same owner.
NodeId key_owner(const NodeId& key, std::span<const NodeId> members, const LatencyFn& latency,
                 const NodeId& start);

/// Immutable rooted spanning tree over a member set.
class TreeStructure {
public:
    /// Builds the tree from a parent map (root absent). Throws
    /// std::invalid_argument if the map is not a tree rooted at `root`.
    static TreeStructure from_parents(NodeId root, TopologyKind kind,
                                      std::map<NodeId, NodeId> parents);

    const NodeId& root() const { return root_; }
    TopologyKind kind() const { return kind_; }
    std::size_t size() const { return depth_.size(); }
    bool contains(const NodeId& v) const { return depth_.count(v) != 0; }

    /// All members in NodeId order.
    std::vector<NodeId> members() const;

    std::optional<NodeId> parent(const NodeId& v) const;
    const std::vector<NodeId>& children(const NodeId& v) const;
    std::size_t depth(const NodeId& v) const;
    std::size_t max_depth() const;

    /// Number of nodes in v's subtree including v.
    std::size_t subtree_size(const NodeId& v) const;

    /// Proper descendants of v in breadth-first order.
    std::vector<NodeId> descendants(const NodeId& v) const;

    bool operator==(const TreeStructure&) const = default;

private:
    TreeStructure(NodeId root, TopologyKind kind) : root_(std::move(root)), kind_(kind) {}

    NodeId root_;
    TopologyKind kind_;
    std::map<NodeId, NodeId> parent_;
    std::map<NodeId, std::vector<NodeId>> children_;
    std::map<NodeId, std::size_t> depth_;
};

/// Pure: identical inputs give identical trees.
TreeStructure build_tree(std::span<const NodeId> members, const NodeId& root, TopologyKind kind,
                         const LatencyFn& latency);

struct TreeStats {
    double avg_depth = 0.0;
    std::size_t max_depth = 0;
    std::vector<std::size_t> depth_histogram;  ///< index = depth
};

TreeStats tree_stats(const TreeStructure& tree);

}  // namespace acme::qtree
