#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "autosec/blocks.hpp"
#include "autosec/capability.hpp"

// Attack-path search over capability states. Blocks only ever add
// capabilities, so the reachable state space is at most 2^8 states.
namespace autosec::paths {

using blocks::BlockSpec;

inline constexpr unsigned kMaxDepth = 8;

enum class PathErrc { DepthLimitExceeded };
using PathError = ErrorOf<PathErrc>;

struct AttackPath {
  std::vector<std::string> steps;
  CapabilitySet start;
  Capability goal = Capability::BUS_ACCESS;
  bool operator==(const AttackPath&) const = default;
};

// Replays `path` from its start: every step's preconditions must hold in the
// accumulated state and the goal must hold at the end.
inline bool replays(const AttackPath& path, std::span<const BlockSpec> blocks) {
  CapabilitySet state = path.start;
  for (const auto& step : path.steps) {
    auto it = std::find_if(blocks.begin(), blocks.end(), [&](const BlockSpec& b) { return b.name == step; });
    if (it == blocks.end() || !it->preconditions.subset_of(state)) return false;
    state |= it->effects;
  }
  return state.contains(path.goal);
}

namespace detail {
inline std::vector<const BlockSpec*> by_name(std::span<const BlockSpec> blocks) {
  std::vector<const BlockSpec*> out;
  for (const auto& b : blocks) out.push_back(&b);
  std::stable_sort(out.begin(), out.end(), [](const BlockSpec* a, const BlockSpec* b) { return a->name < b->name; });
  return out;
}
}  // namespace detail

// Breadth-first search. Expanding blocks in name order from a FIFO queue makes
// the first goal state discovered the lexicographically smallest among the
// minimum-length paths.
inline std::optional<AttackPath> find_path(std::span<const BlockSpec> blocks, CapabilitySet start, Capability goal) {
  AttackPath result{{}, start, goal};
  if (start.contains(goal)) return result;

  const auto order = detail::by_name(blocks);
  constexpr std::size_t kStates = 1u << kCapabilityCount;
  std::array<int, kStates> parent_state;
  std::array<int, kStates> via_block;
  parent_state.fill(-2);
  via_block.fill(-1);
  parent_state[start.bits()] = -1;

  std::queue<std::uint8_t> frontier;
  frontier.push(start.bits());
  while (!frontier.empty()) {
    const auto current = CapabilitySet::from_bits(frontier.front());
    frontier.pop();
    for (std::size_t i = 0; i < order.size(); ++i) {
      const BlockSpec& b = *order[i];
      if (!b.preconditions.subset_of(current)) continue;
      const CapabilitySet next = current | b.effects;
      if (parent_state[next.bits()] != -2) continue;
      parent_state[next.bits()] = current.bits();
      via_block[next.bits()] = static_cast<int>(i);
      if (next.contains(goal)) {
        for (int s = next.bits(); parent_state[s] != -1; s = parent_state[s]) {
          result.steps.push_back(order[static_cast<std::size_t>(via_block[s])]->name);
        }
        std::reverse(result.steps.begin(), result.steps.end());
        return result;
      }
      frontier.push(next.bits());
    }
  }
  return std::nullopt;
}

// All paths of length <= max_depth whose states strictly grow at every step and
// which stop as soon as the goal holds. Sorted by (length, steps).
inline std::vector<AttackPath> enumerate_paths(std::span<const BlockSpec> blocks, CapabilitySet start, Capability goal,
                                               unsigned max_depth) {
  if (max_depth == 0 || max_depth > kMaxDepth) {
    throw PathError(PathErrc::DepthLimitExceeded, "max_depth must be within 1.." + std::to_string(kMaxDepth));
  }
  std::vector<AttackPath> out;
  if (start.contains(goal)) {
    out.push_back({{}, start, goal});
    return out;
  }
  const auto order = detail::by_name(blocks);
  std::vector<std::string> steps;

  auto dfs = [&](auto&& self, CapabilitySet state) -> void {
    if (steps.size() == max_depth) return;
    for (const BlockSpec* b : order) {
      if (!b->preconditions.subset_of(state)) continue;
      const CapabilitySet next = state | b->effects;
      if (next == state) continue;  // would revisit the current state
      steps.push_back(b->name);
      if (next.contains(goal)) out.push_back({steps, start, goal});
      else self(self, next);
      steps.pop_back();
    }
  };
  dfs(dfs, start);

  std::stable_sort(out.begin(), out.end(), [](const AttackPath& a, const AttackPath& b) {
    if (a.steps.size() != b.steps.size()) return a.steps.size() < b.steps.size();
    return a.steps < b.steps;
  });
  return out;
}

inline std::string format_path(const AttackPath& p) {
  if (p.steps.empty()) return "(already satisfied)";
  std::string out;
  for (std::size_t i = 0; i < p.steps.size(); ++i) {
    if (i) out += " -> ";
    out += p.steps[i];
  }
  return out;
}

}  // namespace autosec::paths
