#include "acme/qtree/qtree_node.hpp"

#include "acme/common/wire.hpp"

#include <algorithm>
#include <stdexcept>

namespace acme::qtree {

std::string encode_frame(const Frame& frame) {
    ByteWriter w;
    w.u64(frame.tree_id);
    w.u8(static_cast<std::uint8_t>(frame.direction));
    w.str(frame.payload);
    return std::move(w).bytes();
}

Frame decode_frame(std::string_view bytes) {
    ByteReader r(bytes);
    Frame frame;
    frame.tree_id = r.u64();
    const auto dir = r.u8();
    if (dir > static_cast<std::uint8_t>(Direction::kAnnounce)) {
        throw std::invalid_argument("frame has unknown direction " + std::to_string(dir));
    }
    frame.direction = static_cast<Direction>(dir);
    frame.payload = r.str();
    if (!r.done()) throw std::invalid_argument("trailing bytes after frame");
    return frame;
}

std::string length_prefixed(std::string_view body) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(body.size()));
    std::string out = std::move(w).bytes();
    out.append(body);
    return out;
}

Membership::Membership(std::vector<NodeId> members, LatencyFn latency)
    : members_(std::move(members)), latency_(std::move(latency)) {
    if (members_.empty()) throw std::invalid_argument("membership is empty");
    std::sort(members_.begin(), members_.end());
    if (std::adjacent_find(members_.begin(), members_.end()) != members_.end()) {
        throw std::invalid_argument("membership has duplicate NodeIds");
    }
}

bool Membership::contains(const NodeId& id) const {
    return std::binary_search(members_.begin(), members_.end(), id);
}

const TreeStructure& Membership::tree(const NodeId& root, TopologyKind kind) const {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(root, kind);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
        auto tree = std::make_unique<TreeStructure>(build_tree(members_, root, kind, latency_));
        it = cache_.emplace(std::move(key), std::move(tree)).first;
    }
    return *it->second;
}

void Membership::install(TreeStructure tree) {
    for (const auto& v : tree.members()) {
        if (!contains(v)) throw std::invalid_argument("installed tree has non-member " + v.to_string());
    }
    if (tree.size() != members_.size()) throw std::invalid_argument("installed tree does not span the membership");
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(tree.root(), tree.kind());
    cache_[key] = std::make_unique<TreeStructure>(std::move(tree));
}

QTreeNode::QTreeNode(NodeId self, std::shared_ptr<const Membership> membership,
                     FrameTransport& transport)
    : self_(std::move(self)), membership_(std::move(membership)), transport_(transport) {
    if (!membership_->contains(self_)) {
        throw std::invalid_argument("QTreeNode: " + self_.to_string() + " is not a member");
    }
}

void QTreeNode::set_up_loss(double p, std::uint64_t seed) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("loss probability must be in [0,1]");
    loss_p_ = p;
    loss_rng_.emplace(seed);
}

TreeHandle QTreeNode::new_tree(TopologyKind kind) {
    const auto tree_id = (static_cast<TreeId>(NodeIdHash{}(self_) & 0xffffffffu) << 32) |
                         ++next_sequence_;
    install(tree_id, self_, kind);
    ByteWriter w;
    w.str(self_.to_string());
    w.u8(static_cast<std::uint8_t>(kind));
    forward_down(views_.at(tree_id), Direction::kAnnounce, w.bytes(), 1);
    return views_.at(tree_id).handle;
}

void QTreeNode::install(TreeId tree, const NodeId& root, TopologyKind kind) {
    const auto& structure = membership_->tree(root, kind);
    View v;
    v.handle = TreeHandle{tree, root};
    v.tree = &structure;
    v.parent = structure.parent(self_);
    v.children = structure.children(self_);
    v.level = structure.depth(self_);
    views_[tree] = std::move(v);
}

const QTreeNode::View& QTreeNode::view(TreeId tree) const {
    auto it = views_.find(tree);
    if (it == views_.end()) throw std::invalid_argument("unknown tree id " + std::to_string(tree));
    return it->second;
}

std::optional<TreeHandle> QTreeNode::handle(TreeId tree) const {
    auto it = views_.find(tree);
    if (it == views_.end()) return std::nullopt;
    return it->second.handle;
}

const TreeStructure& QTreeNode::structure(TreeId tree) const { return *view(tree).tree; }

void QTreeNode::forward_down(const View& v, Direction direction, const std::string& payload,
                             std::uint32_t value_units) {
    for (const auto& child : v.children) {
        Frame f{v.handle.tree_id, direction, payload, value_units};
        ++counters_.down_sent;
        transport_.send(child, std::move(f));
    }
}

void QTreeNode::qtree_down(TreeId tree, std::string msg, std::uint32_t value_units) {
    forward_down(view(tree), Direction::kDown, msg, value_units);
}

void QTreeNode::qtree_up(TreeId tree, std::string msg, std::uint32_t value_units) {
    const auto& v = view(tree);
    if (!v.parent) {
        if (handlers_.on_root_up) handlers_.on_root_up(v.handle, msg);
        return;
    }
    if (loss_rng_) {
        const double u = std::uniform_real_distribution<double>(0.0, 1.0)(*loss_rng_);
        if (u < loss_p_) {
            ++counters_.up_dropped;
            return;
        }
    }
    ++counters_.up_sent;
    transport_.send(*v.parent, Frame{tree, Direction::kUp, std::move(msg), value_units});
}

std::size_t QTreeNode::count_children(TreeId tree) const { return view(tree).children.size(); }

std::size_t QTreeNode::whats_my_level(TreeId tree) const { return view(tree).level; }

void QTreeNode::on_frame(const NodeId& from, const Frame& frame) {
    switch (frame.direction) {
        case Direction::kAnnounce: {
            ByteReader r(frame.payload);
            const auto root = NodeId::parse(r.str());
            const auto kind = static_cast<TopologyKind>(r.u8());
            if (!knows(frame.tree_id)) install(frame.tree_id, root, kind);
            forward_down(views_.at(frame.tree_id), Direction::kAnnounce, frame.payload,
                         frame.value_units);
            break;
        }
        case Direction::kDown: {
            const auto& v = view(frame.tree_id);
            if (handlers_.on_down) handlers_.on_down(v.handle, frame.payload);
            forward_down(v, Direction::kDown, frame.payload, frame.value_units);
            break;
        }
        case Direction::kUp: {
            const auto& v = view(frame.tree_id);
            if (handlers_.on_up) handlers_.on_up(v.handle, from, frame.payload);
            break;
        }
    }
}

}  // namespace acme::qtree
