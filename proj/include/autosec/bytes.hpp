#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace autosec {

using Byte = std::uint8_t;
using Bytes = std::vector<Byte>;

// Uppercase hex without separators, e.g. {0x7F,0x22} -> "7F22".
inline std::string to_hex(std::span<const Byte> bytes) {
  static constexpr char digits[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (Byte b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0F]);
  }
  return out;
}

inline std::optional<Bytes> from_hex(std::string_view text) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (text.size() % 2 != 0) return std::nullopt;
  Bytes out;
  out.reserve(text.size() / 2);
  for (std::size_t i = 0; i < text.size(); i += 2) {
    int hi = nibble(text[i]);
    int lo = nibble(text[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<Byte>((hi << 4) | lo));
  }
  return out;
}

// "0x7E0" style rendering used by the JSON documents.
inline std::string hex_literal(std::uint32_t value, int min_digits = 2) {
  static constexpr char digits[] = "0123456789ABCDEF";
  std::string body;
  do {
    body.insert(body.begin(), digits[value & 0x0F]);
    value >>= 4;
  } while (value != 0);
  while (static_cast<int>(body.size()) < min_digits) body.insert(body.begin(), '0');
  return "0x" + body;
}

inline std::optional<std::uint32_t> parse_hex_literal(std::string_view text) {
  if (text.size() < 3 || text.size() > 10 || text[0] != '0' || (text[1] != 'x' && text[1] != 'X')) {
    return std::nullopt;
  }
  std::uint32_t value = 0;
  for (char c : text.substr(2)) {
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
    else return std::nullopt;
    value = (value << 4) | static_cast<std::uint32_t>(d);
  }
  return value;
}

// 32-bit FNV-1a, used for deterministic short digests in identifiers.
inline std::uint32_t fnv1a32(std::string_view text) {
  std::uint32_t hash = 0x811C9DC5u;
  for (char c : text) {
    hash ^= static_cast<std::uint8_t>(c);
    hash *= 0x01000193u;
  }
  return hash;
}

}  // namespace autosec
