#include "acme/qtree/node_id.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace acme::qtree {

NodeId::NodeId(std::vector<std::uint8_t> digits) : digits_(std::move(digits)) {
    if (digits_.empty() || digits_.size() > kMaxDigits) {
        throw std::invalid_argument("NodeId width must be in 1.." + std::to_string(kMaxDigits));
    }
    for (auto d : digits_) {
        if (d >= kBase) throw std::invalid_argument("NodeId digit out of range");
    }
}

NodeId NodeId::parse(std::string_view text) {
    std::vector<std::uint8_t> digits;
    digits.reserve(text.size());
    for (char c : text) {
        if (c < '0' || c >= static_cast<char>('0' + kBase)) {
            throw std::invalid_argument("invalid NodeId digit '" + std::string(1, c) + "'");
        }
        digits.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return NodeId(std::move(digits));
}

std::string NodeId::to_string() const {
    std::string s;
    s.reserve(digits_.size());
    for (auto d : digits_) s.push_back(static_cast<char>('0' + d));
    return s;
}

NodeId node_id_from_name(std::string_view name, std::size_t digits) {
    if (digits == 0 || digits > NodeId::kMaxDigits) {
        throw std::invalid_argument("NodeId width must be in 1.." + std::to_string(NodeId::kMaxDigits));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(name.data(), name.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::vector<std::uint8_t> out;
    out.reserve(digits);
    // Two bits per digit, most significant bits first.
    for (std::size_t i = 0; i < digits; ++i) {
        const auto byte = md[i / 4];
        const auto shift = 6 - 2 * (i % 4);
        out.push_back(static_cast<std::uint8_t>((byte >> shift) & 0x3));
    }
    return NodeId(std::move(out));
}

std::size_t shared_prefix(const NodeId& a, const NodeId& b) {
    const auto n = std::min(a.size(), b.size());
    std::size_t i = 0;
    while (i < n && a[i] == b[i]) ++i;
    return i;
}

std::size_t NodeIdHash::operator()(const NodeId& id) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (auto d : id.digits()) {
        h ^= d;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace acme::qtree
