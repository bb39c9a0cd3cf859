#pragma once

#include <cstdint>

namespace autosec {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Counter-based generator: output i is a pure function of (key, i). Streams
// derived with `fork` are independent of how many values the parent has drawn.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

  // Stream for one campaign node; inserting other nodes does not shift it.
  static constexpr CounterRng for_node(std::uint64_t campaign_seed, std::uint64_t node_index) noexcept {
    return CounterRng(splitmix64(campaign_seed ^ splitmix64(node_index + 0x6A09E667F3BCC909ull)));
  }

  constexpr CounterRng fork(std::uint64_t stream) const noexcept {
    return CounterRng(splitmix64(key_ ^ splitmix64(stream + 0xBB67AE8584CAA73Bull)));
  }

  constexpr std::uint64_t operator()() noexcept { return splitmix64(key_ + 0xD1B54A32D192ED03ull * ++counter_); }

  // Uniform in [0, bound); bound must be non-zero. Multiply-shift keeps the
  // mapping identical across standard libraries, unlike std distributions.
  constexpr std::uint64_t below(std::uint64_t bound) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * bound) >> 64);
  }

  constexpr std::uint8_t byte() noexcept { return static_cast<std::uint8_t>((*this)() >> 56); }

  static constexpr std::uint64_t min() noexcept { return 0; }
  static constexpr std::uint64_t max() noexcept { return ~std::uint64_t{0}; }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace autosec
