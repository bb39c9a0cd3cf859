#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace autosec {

// Closed capability vocabulary. Used as block requirements at bind time and as
// planner state during attack-path search.
enum class Capability : std::uint8_t {
  BUS_ACCESS,
  DIAG_REQUEST,
  SESSION_DEFAULT,
  SESSION_EXTENDED,
  SESSION_PROGRAMMING,
  SECURITY_L1,
  DID_READ,
  ECU_RESET,
};

inline constexpr std::size_t kCapabilityCount = 8;

inline constexpr std::array<std::string_view, kCapabilityCount> kCapabilityNames = {
    "BUS_ACCESS", "DIAG_REQUEST", "SESSION_DEFAULT", "SESSION_EXTENDED",
    "SESSION_PROGRAMMING", "SECURITY_L1", "DID_READ", "ECU_RESET",
};

inline constexpr std::string_view to_string(Capability c) noexcept {
  return kCapabilityNames[static_cast<std::size_t>(c)];
}

inline std::optional<Capability> capability_from_string(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kCapabilityCount; ++i) {
    if (kCapabilityNames[i] == name) return static_cast<Capability>(i);
  }
  return std::nullopt;
}

// Bit set over the eight capabilities.
class CapabilitySet {
 public:
  constexpr CapabilitySet() noexcept = default;
  constexpr CapabilitySet(std::initializer_list<Capability> caps) noexcept {
    for (Capability c : caps) insert(c);
  }
  static constexpr CapabilitySet from_bits(std::uint8_t bits) noexcept {
    CapabilitySet s;
    s.bits_ = bits;
    return s;
  }

  constexpr void insert(Capability c) noexcept { bits_ |= bit(c); }
  constexpr void erase(Capability c) noexcept { bits_ &= static_cast<std::uint8_t>(~bit(c)); }
  constexpr bool contains(Capability c) const noexcept { return (bits_ & bit(c)) != 0; }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  constexpr std::uint8_t bits() const noexcept { return bits_; }
  constexpr std::size_t size() const noexcept { return static_cast<std::size_t>(__builtin_popcount(bits_)); }

  constexpr bool subset_of(CapabilitySet other) const noexcept { return (bits_ & ~other.bits_) == 0; }
  constexpr bool intersects(CapabilitySet other) const noexcept { return (bits_ & other.bits_) != 0; }

  constexpr CapabilitySet operator|(CapabilitySet o) const noexcept { return from_bits(bits_ | o.bits_); }
  constexpr CapabilitySet operator&(CapabilitySet o) const noexcept { return from_bits(bits_ & o.bits_); }
  constexpr CapabilitySet operator-(CapabilitySet o) const noexcept {
    return from_bits(static_cast<std::uint8_t>(bits_ & ~o.bits_));
  }
  constexpr CapabilitySet& operator|=(CapabilitySet o) noexcept {
    bits_ |= o.bits_;
    return *this;
  }
  constexpr bool operator==(const CapabilitySet&) const noexcept = default;

  // Members in vocabulary order.
  std::vector<Capability> members() const {
    std::vector<Capability> out;
    for (std::size_t i = 0; i < kCapabilityCount; ++i) {
      if (bits_ & (1u << i)) out.push_back(static_cast<Capability>(i));
    }
    return out;
  }

  std::string to_string() const {
    std::string out = "{";
    bool first = true;
    for (Capability c : members()) {
      if (!first) out += ", ";
      out += autosec::to_string(c);
      first = false;
    }
    return out + "}";
  }

 private:
  static constexpr std::uint8_t bit(Capability c) noexcept {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(c));
  }
  std::uint8_t bits_ = 0;
};

}  // namespace autosec
