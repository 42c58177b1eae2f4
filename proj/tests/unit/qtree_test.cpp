#include "acme/qtree/node_id.hpp"
#include "acme/qtree/qtree_node.hpp"
#include "acme/qtree/tree.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <map>
#include <random>
#include <set>

using namespace acme::qtree;

namespace {

std::vector<NodeId> named(std::size_t n, std::size_t digits = NodeId::kDefaultDigits) {
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(node_id_from_name("node" + std::to_string(i), digits));
    std::sort(ids.begin(), ids.end());
    return ids;
}

double hashed_latency(const NodeId& a, const NodeId& b) {
    if (a == b) return 0.0;
    const auto h = NodeIdHash{}(a) ^ (NodeIdHash{}(b) * 31);
    return 1.0 + static_cast<double>(h % 1000);
}

double unit_latency(const NodeId&, const NodeId&) { return 1.0; }

}  // namespace

TEST(NodeId, ParsesAndPrints) {
    auto id = NodeId::parse("0123");
    EXPECT_EQ(id.size(), 4u);
    EXPECT_EQ(id[1], 1);
    EXPECT_EQ(id.to_string(), "0123");
    EXPECT_THROW(NodeId::parse("0124"), std::invalid_argument);
    EXPECT_THROW(NodeId::parse(""), std::invalid_argument);
}

TEST(NodeId, HashIsStableAndFixedWidth) {
    auto a = node_id_from_name("alpha");
    EXPECT_EQ(a, node_id_from_name("alpha"));
    EXPECT_NE(a, node_id_from_name("beta"));
    EXPECT_EQ(a.size(), NodeId::kDefaultDigits);
    EXPECT_EQ(node_id_from_name("alpha", 5).size(), 5u);
}

TEST(NodeId, SharedPrefix) {
    EXPECT_EQ(shared_prefix(NodeId::parse("0123"), NodeId::parse("0132")), 2u);
    EXPECT_EQ(shared_prefix(NodeId::parse("0123"), NodeId::parse("0123")), 4u);
    EXPECT_EQ(shared_prefix(NodeId::parse("1123"), NodeId::parse("0123")), 0u);
}

TEST(NextHop, ExtendsSharedPrefixWithRoot) {
    auto ids = named(200);
    const auto& root = ids[17];
    for (const auto& v : ids) {
        if (v == root) continue;
        auto hop = next_hop(v, root, ids, hashed_latency);
        EXPECT_GT(shared_prefix(hop, root), shared_prefix(v, root));
    }
}

TEST(NextHop, PicksLowestLatencyCandidate) {
    std::vector<NodeId> ids{NodeId::parse("0000"), NodeId::parse("0100"), NodeId::parse("0200"),
                            NodeId::parse("1000")};
    const auto& root = ids[0];
    auto lat = [&](const NodeId& a, const NodeId& b) {
        if (b == NodeId::parse("0200") || a == NodeId::parse("0200")) return 1.0;
        return 50.0;
    };
    EXPECT_EQ(next_hop(ids[3], root, ids, lat), NodeId::parse("0200"));
    EXPECT_EQ(next_hop(ids[3], root, ids, unit_latency), NodeId::parse("0000"));
}

TEST(NextHop, RejectsBadInput) {
    auto ids = named(4);
    EXPECT_THROW(next_hop(ids[0], ids[0], ids, unit_latency), std::invalid_argument);
    EXPECT_THROW(next_hop(NodeId::parse("3333333333333333"), ids[0], ids, unit_latency), std::invalid_argument);
    EXPECT_THROW(next_hop(ids[0], ids[1], std::vector<NodeId>{}, unit_latency), std::invalid_argument);
}

TEST(KeyRouting, EveryStartReachesTheSameOwner) {
    auto ids = named(64);
    std::mt19937_64 rng(5);
    for (int k = 0; k < 20; ++k) {
        std::vector<std::uint8_t> digits(NodeId::kDefaultDigits);
        for (auto& d : digits) d = static_cast<std::uint8_t>(rng() % 4);
        NodeId key(digits);
        auto owner = key_owner(key, ids, hashed_latency, ids[0]);
        for (const auto& s : ids) EXPECT_EQ(key_owner(key, ids, hashed_latency, s), owner);
    }
}

TEST(BuildTree, DtreeIsAStar) {
    auto ids = named(50);
    auto t = build_tree(ids, ids[3], TopologyKind::kDtree, hashed_latency);
    EXPECT_EQ(t.size(), 50u);
    EXPECT_EQ(t.max_depth(), 1u);
    EXPECT_EQ(t.children(ids[3]).size(), 49u);
}

TEST(BuildTree, TtreeSpansAllMembersWithoutCycles) {
    auto ids = named(300);
    auto t = build_tree(ids, ids[0], TopologyKind::kTtree, hashed_latency);
    EXPECT_EQ(t.size(), ids.size());
    EXPECT_EQ(t.subtree_size(ids[0]), ids.size());
    EXPECT_EQ(t.descendants(ids[0]).size(), ids.size() - 1);
    for (const auto& v : ids) {
        if (v == ids[0]) continue;
        EXPECT_EQ(t.depth(v), t.depth(*t.parent(v)) + 1);
    }
}

TEST(BuildTree, IsPure) {
    auto ids = named(128);
    EXPECT_EQ(build_tree(ids, ids[9], TopologyKind::kTtree, hashed_latency),
              build_tree(ids, ids[9], TopologyKind::kTtree, hashed_latency));
}

TEST(BuildTree, DepthBoundedByDigits) {
    auto ids = named(512);
    auto t = build_tree(ids, ids[0], TopologyKind::kTtree, hashed_latency);
    EXPECT_LE(t.max_depth(), NodeId::kDefaultDigits);
    auto s = tree_stats(t);
    EXPECT_GT(s.avg_depth, 1.0);
    std::size_t total = 0;
    for (auto c : s.depth_histogram) total += c;
    EXPECT_EQ(total, 512u);
}

TEST(TreeStructure, RejectsNonTrees) {
    auto a = NodeId::parse("00"), b = NodeId::parse("01"), c = NodeId::parse("02");
    EXPECT_THROW(TreeStructure::from_parents(a, TopologyKind::kTtree, {{b, c}, {c, b}}), std::invalid_argument);
    EXPECT_NO_THROW(TreeStructure::from_parents(a, TopologyKind::kTtree, {{b, a}, {c, b}}));
}

TEST(Frame, RoundTrips) {
    Frame f{0x0102030405060708ULL, Direction::kUp, std::string("abc\0def", 7), 3};
    auto bytes = encode_frame(f);
    EXPECT_EQ(bytes.size(), 8u + 1u + 4u + 7u);
    auto g = decode_frame(bytes);
    EXPECT_EQ(g.tree_id, f.tree_id);
    EXPECT_EQ(g.direction, f.direction);
    EXPECT_EQ(g.payload, f.payload);
    EXPECT_THROW(decode_frame(bytes.substr(0, 10)), std::invalid_argument);
}

namespace {

/// In-memory transport delivering frames in FIFO order.
struct Bus : FrameTransport {
    struct Pending {
        NodeId from, to;
        Frame frame;
    };
    std::map<NodeId, QTreeNode*> nodes;
    std::deque<Pending> queue;
    NodeId sender;

    void send(const NodeId& to, Frame frame) override { queue.push_back({sender, to, std::move(frame)}); }
    void drain() {
        while (!queue.empty()) {
            auto p = std::move(queue.front());
            queue.pop_front();
            sender = p.to;
            nodes.at(p.to)->on_frame(p.from, p.frame);
        }
    }
};

struct PerNode : FrameTransport {
    Bus& bus;
    NodeId self;
    PerNode(Bus& b, NodeId s) : bus(b), self(std::move(s)) {}
    void send(const NodeId& to, Frame frame) override {
        bus.sender = self;
        bus.send(to, std::move(frame));
    }
};

}  // namespace

TEST(QTreeNode, DownReachesEveryoneAndUpReachesParent) {
    auto ids = named(40);
    auto membership = std::make_shared<Membership>(ids, hashed_latency);
    Bus bus;
    std::vector<std::unique_ptr<PerNode>> transports;
    std::vector<std::unique_ptr<QTreeNode>> nodes;
    std::map<NodeId, int> downs;
    std::map<NodeId, std::vector<NodeId>> ups;
    std::vector<std::string> root_ups;
    for (const auto& id : ids) {
        transports.push_back(std::make_unique<PerNode>(bus, id));
        nodes.push_back(std::make_unique<QTreeNode>(id, membership, *transports.back()));
        bus.nodes[id] = nodes.back().get();
        QTreeNode::Handlers h;
        h.on_down = [&downs, id](const TreeHandle&, const std::string&) { ++downs[id]; };
        h.on_up = [&ups, id](const TreeHandle&, const NodeId& child, const std::string&) { ups[id].push_back(child); };
        h.on_root_up = [&root_ups](const TreeHandle&, const std::string& m) { root_ups.push_back(m); };
        nodes.back()->set_handlers(h);
    }
    auto& root = *nodes[0];
    auto handle = root.new_tree(TopologyKind::kTtree);
    bus.drain();
    for (auto& n : nodes) EXPECT_TRUE(n->knows(handle.tree_id));

    root.qtree_down(handle.tree_id, "hello");
    bus.drain();
    for (const auto& id : ids) {
        if (id == ids[0]) continue;
        EXPECT_EQ(downs[id], 1) << id.to_string();
    }

    const auto& tree = membership->tree(ids[0], TopologyKind::kTtree);
    EXPECT_EQ(root.count_children(handle.tree_id), tree.children(ids[0]).size());
    auto leaf = ids.back();
    nodes.back()->qtree_up(handle.tree_id, "up");
    bus.drain();
    auto parent = *tree.parent(leaf);
    ASSERT_EQ(ups[parent].size(), 1u);
    EXPECT_EQ(ups[parent][0], leaf);
    EXPECT_EQ(nodes.back()->whats_my_level(handle.tree_id), tree.depth(leaf));

    root.qtree_up(handle.tree_id, "at-root");
    ASSERT_EQ(root_ups.size(), 1u);
    EXPECT_EQ(root_ups[0], "at-root");
}

TEST(QTreeNode, UpLossDropsAtRequestedRate) {
    auto ids = named(2);
    auto membership = std::make_shared<Membership>(ids, unit_latency);
    struct Capture : FrameTransport {
        std::vector<Frame> frames;
        void send(const NodeId&, Frame f) override { frames.push_back(std::move(f)); }
    } to_child, to_root;
    QTreeNode root(ids[0], membership, to_child);
    QTreeNode child(ids[1], membership, to_root);
    auto h = root.new_tree(TopologyKind::kDtree);
    ASSERT_EQ(to_child.frames.size(), 1u);
    child.on_frame(ids[0], to_child.frames[0]);
    ASSERT_TRUE(child.knows(h.tree_id));

    child.set_up_loss(0.25, 42);
    for (int i = 0; i < 4000; ++i) child.qtree_up(h.tree_id, "x");
    EXPECT_NEAR(child.counters().up_dropped / 4000.0, 0.25, 0.03);
    EXPECT_EQ(child.counters().up_dropped + to_root.frames.size(), 4000u);

    root.set_up_loss(1.0, 42);
    std::vector<std::string> got;
    QTreeNode::Handlers hs;
    hs.on_root_up = [&](const TreeHandle&, const std::string& m) { got.push_back(m); };
    root.set_handlers(hs);
    root.qtree_up(h.tree_id, "kept");
    EXPECT_EQ(got.size(), 1u);
}

TEST(Membership, InstallOverridesDerivedTree) {
    auto a = NodeId::parse("00"), b = NodeId::parse("01"), c = NodeId::parse("02");
    Membership m({a, b, c}, unit_latency);
    m.install(TreeStructure::from_parents(a, TopologyKind::kTtree, {{b, a}, {c, b}}));
    EXPECT_EQ(m.tree(a, TopologyKind::kTtree).depth(c), 2u);
}
