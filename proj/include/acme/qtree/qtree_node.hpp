#pragma once

#include "acme/qtree/tree.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <tuple>

namespace acme::qtree {

using TreeId = std::uint64_t;

struct TreeHandle {
    TreeId tree_id = 0;
    NodeId root;

    bool operator==(const TreeHandle&) const = default;
};

enum class Direction : std::uint8_t {
    kDown = 0,
    kUp = 1,
    /// Tree set-up: carries the root and topology so each receiver can derive
    /// its own view from the shared membership.
    kAnnounce = 2,
};

/// Unit of QTree traffic. `value_units` is not serialized; the simulator
/// uses it to size messages.
struct Frame {
    TreeId tree_id = 0;
    Direction direction = Direction::kDown;
    std::string payload;
    std::uint32_t value_units = 1;
};

/// Header: tree_id (8 bytes BE), direction (1 byte), payload length (4 bytes BE), payload.
std::string encode_frame(const Frame& frame);
Frame decode_frame(std::string_view bytes);

/// Stream framing used by persistent connections: 4-byte BE length + body.
std::string length_prefixed(std::string_view body);

/// Static membership shared by every node of a deployment. build_tree is
/// pure, so each node derives the same tree from (root, kind); results are
/// memoized.
class Membership {
public:
    Membership(std::vector<NodeId> members, LatencyFn latency);

    std::span<const NodeId> members() const { return members_; }
    const LatencyFn& latency() const { return latency_; }
    bool contains(const NodeId& id) const;

    const TreeStructure& tree(const NodeId& root, TopologyKind kind) const;

    /// Uses a prebuilt tree for (tree.root(), tree.kind()) instead of deriving one.
    void install(TreeStructure tree);

private:
    std::vector<NodeId> members_;
    LatencyFn latency_;
    mutable std::mutex mutex_;
    mutable std::map<std::pair<NodeId, TopologyKind>, std::unique_ptr<TreeStructure>> cache_;
};

class FrameTransport {
public:
    virtual ~FrameTransport() = default;
    virtual void send(const NodeId& to, Frame frame) = 0;
};

/// One node's QTree endpoint: the five-call interface plus frame dispatch.
/// Not thread-safe; owned by the node's event loop.
class QTreeNode {
public:
    struct Handlers {
        /// A down message reached this node (it is also forwarded to children).
        std::function<void(const TreeHandle&, const std::string&)> on_down;
        /// A child sent an up message to this node.
        std::function<void(const TreeHandle&, const NodeId& child, const std::string&)> on_up;
        /// The root called qtree_up: delivered to the locally registered consumer.
        std::function<void(const TreeHandle&, const std::string&)> on_root_up;
    };

    QTreeNode(NodeId self, std::shared_ptr<const Membership> membership, FrameTransport& transport);

    const NodeId& self() const { return self_; }
    void set_handlers(Handlers handlers) { handlers_ = std::move(handlers); }

    /// Drops each non-root qtree_up with probability p, from a per-node stream.
    void set_up_loss(double p, std::uint64_t seed);

    TreeHandle new_tree(TopologyKind kind);
    void qtree_down(TreeId tree, std::string msg, std::uint32_t value_units = 1);
    void qtree_up(TreeId tree, std::string msg, std::uint32_t value_units = 1);
    std::size_t count_children(TreeId tree) const;
    std::size_t whats_my_level(TreeId tree) const;

    bool knows(TreeId tree) const { return views_.count(tree) != 0; }
    std::optional<TreeHandle> handle(TreeId tree) const;
    const TreeStructure& structure(TreeId tree) const;

    void on_frame(const NodeId& from, const Frame& frame);

    struct Counters {
        std::uint64_t down_sent = 0;
        std::uint64_t up_sent = 0;
        std::uint64_t up_dropped = 0;
    };
    const Counters& counters() const { return counters_; }

private:
    struct View {
        TreeHandle handle;
        const TreeStructure* tree = nullptr;
        std::optional<NodeId> parent;
        std::vector<NodeId> children;
        std::size_t level = 0;
    };

    const View& view(TreeId tree) const;
    void install(TreeId tree, const NodeId& root, TopologyKind kind);
    void forward_down(const View& v, Direction direction, const std::string& payload,
                      std::uint32_t value_units);

    NodeId self_;
    std::shared_ptr<const Membership> membership_;
    FrameTransport& transport_;
    Handlers handlers_;
    std::map<TreeId, View> views_;
    std::uint32_t next_sequence_ = 0;
    double loss_p_ = 0.0;
    std::optional<std::mt19937_64> loss_rng_;
    Counters counters_;
};

}  // namespace acme::qtree
