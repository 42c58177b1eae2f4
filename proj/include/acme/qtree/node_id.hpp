#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace acme::qtree {

/// Fixed-width base-4 identifier of a virtual node. Digit 0 is the most
/// significant; prefix routing compares digits from the front.
class NodeId {
public:
    static constexpr unsigned kBase = 4;
    static constexpr std::size_t kDefaultDigits = 16;
    static constexpr std::size_t kMaxDigits = 128;

    NodeId() = default;

    /// Throws std::invalid_argument if a digit is >= kBase or the width is
    /// zero or larger than kMaxDigits.
    explicit NodeId(std::vector<std::uint8_t> digits);

    /// Parses a string of '0'..'3' characters.
    static NodeId parse(std::string_view text);

    std::size_t size() const { return digits_.size(); }
    bool empty() const { return digits_.empty(); }
    std::uint8_t operator[](std::size_t i) const { return digits_[i]; }
    std::span<const std::uint8_t> digits() const { return digits_; }

    std::string to_string() const;

    auto operator<=>(const NodeId&) const = default;
    bool operator==(const NodeId&) const = default;

private:
    std::vector<std::uint8_t> digits_;
};

/// Hashes a node name (SHA-256) into a NodeId of the given width.
NodeId node_id_from_name(std::string_view name, std::size_t digits = NodeId::kDefaultDigits);

/// Number of leading digits a and b share.
std::size_t shared_prefix(const NodeId& a, const NodeId& b);

struct NodeIdHash {
    std::size_t operator()(const NodeId& id) const noexcept;
};

}  // namespace acme::qtree
