#pragma once

#include <string>
#include <vector>

#include "microworld/rng.hpp"
#include "microworld/world.hpp"

namespace mw::fixtures {

inline Declaration people(int agents, int locations, int objects) {
  static const std::vector<Agent> kAgents = {
      {"mary", "she"}, {"john", "he"}, {"sandra", "she"}, {"daniel", "he"}};
  static const std::vector<std::string> kLocations = {"kitchen", "garden", "office",
                                                      "bathroom", "hallway", "bedroom"};
  static const std::vector<std::string> kObjects = {"apple", "football", "milk", "book"};
  return Declaration({kAgents.begin(), kAgents.begin() + agents},
                     {kLocations.begin(), kLocations.begin() + locations},
                     {kObjects.begin(), kObjects.begin() + objects});
}

inline WorldState random_state(const Declaration& decl, Rng& rng, bool allow_carried = false) {
  WorldState s = make_uniform_state(decl);
  for (auto& l : s.agent_location) l = LocationId{static_cast<int>(rng.below(decl.location_count()))};
  for (auto& p : s.object_place) {
    if (allow_carried && rng.chance(0.4)) {
      p = AgentId{static_cast<int>(rng.below(decl.agent_count()))};
    } else {
      p = LocationId{static_cast<int>(rng.below(decl.location_count()))};
    }
  }
  return s;
}

// Statements that all hold along a random ground-truth run from an uncarried
// start: legal actions mixed with true location facts and negations.
inline std::vector<Statement> random_statements(const Declaration& decl, std::size_t n, Rng& rng,
                                                WorldState* start = nullptr) {
  WorldState s = random_state(decl, rng);
  if (start) *start = s;
  std::vector<Statement> out;
  while (out.size() < n) {
    Event e;
    const AgentId a{static_cast<int>(rng.below(decl.agent_count()))};
    const int roll = static_cast<int>(rng.below(10));
    if (roll == 0) {
      e = LocationFact{a, s.agent_location[a.value]};
    } else if (roll == 1 && decl.location_count() > 1) {
      LocationId l{static_cast<int>(rng.below(decl.location_count()))};
      if (l == s.agent_location[a.value]) continue;
      e = Negation{a, l};
    } else {
      auto legal = legal_actions(decl, s);
      if (legal.empty()) break;
      e = to_event(legal[rng.below(legal.size())]);
    }
    try_apply(decl, s, e);
    out.push_back({e, static_cast<int>(out.size()), false});
  }
  return out;
}

}  // namespace mw::fixtures
