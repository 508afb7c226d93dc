#pragma once

// Brute-force world enumeration: every total initial state (nothing carried)
// is simulated through the ground-truth transition function, and worlds in
// which some statement cannot happen are discarded. Used as the reference
// against which belief tracking is checked.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "microworld/world.hpp"

namespace mw {

struct EnumerationBound {
  int max_agents = 4;
  int max_locations = 6;
  int max_objects = 4;
  int max_statements = 70;
};

// states[0] is the initial state, states[k] the state after statement k-1.
using Trajectory = std::vector<WorldState>;

// Throws InstanceTooLarge when the instance exceeds `bound`.
void check_bound(const Declaration& decl, std::size_t statement_count,
                 const EnumerationBound& bound = {});

std::uint64_t initial_state_count(const Declaration& decl);

// Calls `visit` for every initial state, in a fixed order.
void for_each_initial_state(const Declaration& decl,
                            const std::function<void(const WorldState&)>& visit);

// Every trajectory consistent with all statements. Empty iff the statements
// are inconsistent.
std::vector<Trajectory> enumerate_worlds(const Declaration& decl,
                                         std::span<const Statement> statements,
                                         const EnumerationBound& bound = {});

}  // namespace mw
