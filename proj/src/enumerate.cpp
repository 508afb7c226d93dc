#include "microworld/enumerate.hpp"

#include "microworld/errors.hpp"

namespace mw {

void check_bound(const Declaration& decl, std::size_t statement_count,
                 const EnumerationBound& bound) {
  if (decl.agent_count() > bound.max_agents || decl.location_count() > bound.max_locations ||
      decl.object_count() > bound.max_objects ||
      statement_count > static_cast<std::size_t>(bound.max_statements)) {
    throw InstanceTooLarge(
        "instance with " + std::to_string(decl.agent_count()) + " agents, " +
        std::to_string(decl.location_count()) + " locations, " +
        std::to_string(decl.object_count()) + " objects and " +
        std::to_string(statement_count) + " statements exceeds the enumeration bound");
  }
}

std::uint64_t initial_state_count(const Declaration& decl) {
  std::uint64_t n = 1;
  for (int i = 0; i < decl.agent_count() + decl.object_count(); ++i) {
    n *= static_cast<std::uint64_t>(decl.location_count());
  }
  return n;
}

void for_each_initial_state(const Declaration& decl,
                            const std::function<void(const WorldState&)>& visit) {
  const int agents = decl.agent_count();
  const int slots = agents + decl.object_count();
  const int base = decl.location_count();
  if (base == 0) return;
  std::vector<int> digits(slots, 0);
  WorldState state = make_uniform_state(decl);
  while (true) {
    for (int i = 0; i < slots; ++i) {
      if (i < agents) {
        state.agent_location[i] = LocationId{digits[i]};
      } else {
        state.object_place[i - agents] = LocationId{digits[i]};
      }
    }
    visit(state);
    int pos = 0;
    while (pos < slots && ++digits[pos] == base) digits[pos++] = 0;
    if (pos == slots) return;
  }
}

std::vector<Trajectory> enumerate_worlds(const Declaration& decl,
                                         std::span<const Statement> statements,
                                         const EnumerationBound& bound) {
  check_bound(decl, statements.size(), bound);
  for (const auto& s : statements) validate_event(decl, s.event);
  std::vector<Trajectory> out;
  for_each_initial_state(decl, [&](const WorldState& initial) {
    Trajectory trajectory;
    trajectory.reserve(statements.size() + 1);
    trajectory.push_back(initial);
    WorldState state = initial;
    for (const auto& s : statements) {
      if (!try_apply(decl, state, s.event)) return;
      trajectory.push_back(state);
    }
    out.push_back(std::move(trajectory));
  });
  return out;
}

}  // namespace mw
