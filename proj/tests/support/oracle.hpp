#pragma once

// Test-only brute-force reference. Worlds are enumerated and stepped with a
// transition written here from the rules, independent of the library's own.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "microworld/enumerate.hpp"
#include "microworld/question.hpp"
#include "microworld/world.hpp"

namespace mw::oracle {

// place >= 0: lying at that location; place < 0: carried by agent -1 - place.
struct World {
  std::vector<int> agent;
  std::vector<int> place;

  int object_location(int o) const {
    return place[o] >= 0 ? place[o] : agent[-1 - place[o]];
  }
  int carrier(int o) const { return place[o] >= 0 ? -1 : -1 - place[o]; }
  bool operator==(const World&) const = default;
};

inline World from_state(const WorldState& s) {
  World w;
  for (auto l : s.agent_location) w.agent.push_back(l.value);
  for (std::size_t o = 0; o < s.object_place.size(); ++o) {
    const auto& p = s.object_place[o];
    w.place.push_back(std::holds_alternative<LocationId>(p) ? std::get<LocationId>(p).value
                                                             : -1 - std::get<AgentId>(p).value);
  }
  return w;
}

inline bool step(World& w, const Event& e) {
  if (auto* m = std::get_if<Move>(&e)) {
    if (w.agent[m->agent.value] == m->to.value) return false;
    w.agent[m->agent.value] = m->to.value;
  } else if (auto* c = std::get_if<CoMove>(&e)) {
    if (w.agent[c->first.value] == c->to.value || w.agent[c->second.value] == c->to.value) {
      return false;
    }
    w.agent[c->first.value] = w.agent[c->second.value] = c->to.value;
  } else if (auto* g = std::get_if<Grab>(&e)) {
    const int o = g->object.value;
    if (w.place[o] < 0 || w.place[o] != w.agent[g->agent.value]) return false;
    w.place[o] = -1 - g->agent.value;
  } else if (auto* d = std::get_if<Drop>(&e)) {
    const int o = d->object.value;
    if (w.carrier(o) != d->agent.value) return false;
    w.place[o] = w.agent[d->agent.value];
  } else if (auto* v = std::get_if<Give>(&e)) {
    const int o = v->object.value;
    if (w.carrier(o) != v->giver.value) return false;
    if (w.agent[v->giver.value] != w.agent[v->receiver.value]) return false;
    w.place[o] = -1 - v->receiver.value;
  } else if (auto* f = std::get_if<LocationFact>(&e)) {
    if (w.agent[f->agent.value] != f->at.value) return false;
  } else if (auto* n = std::get_if<Negation>(&e)) {
    if (w.agent[n->agent.value] == n->at.value) return false;
  }
  return true;
}

inline bool holds(const World& w, const Proposition& p) {
  if (auto* a = std::get_if<At>(&p)) return w.agent[a->agent.value] == a->location.value;
  if (auto* h = std::get_if<Holds>(&p)) return w.carrier(h->object.value) == h->agent.value;
  const auto& o = std::get<ObjAt>(p);
  return w.object_location(o.object.value) == o.location.value;
}

// Every initial world: agents and objects at any location, nothing carried.
template <class Visit>
void for_each_initial(int agents, int locations, int objects, Visit visit) {
  World w{std::vector<int>(agents, 0), std::vector<int>(objects, 0)};
  const int n = agents + objects;
  while (true) {
    visit(static_cast<const World&>(w));
    int i = 0;
    for (; i < n; ++i) {
      int& digit = i < agents ? w.agent[i] : w.place[i - agents];
      if (++digit < locations) break;
      digit = 0;
    }
    if (i == n) return;
  }
}

// Labels after every statement prefix, rows[k] after statements 0..k. Empty
// when some prefix has no consistent world.
inline std::vector<std::vector<Label>> labels(const Declaration& decl,
                                              std::span<const Statement> statements,
                                              std::span<const Proposition> universe) {
  const std::size_t n = statements.size();
  const std::size_t p = universe.size();
  std::vector<std::uint64_t> alive(n, 0);
  std::vector<std::uint64_t> truth(n * p, 0);
  for_each_initial(decl.agent_count(), decl.location_count(), decl.object_count(),
                   [&](const World& start) {
                     World w = start;
                     for (std::size_t k = 0; k < n; ++k) {
                       if (!step(w, statements[k].event)) return;
                       ++alive[k];
                       for (std::size_t i = 0; i < p; ++i) {
                         truth[k * p + i] += holds(w, universe[i]) ? 1 : 0;
                       }
                     }
                   });
  std::vector<std::vector<Label>> rows;
  for (std::size_t k = 0; k < n; ++k) {
    if (alive[k] == 0) return {};
    auto& row = rows.emplace_back(p);
    for (std::size_t i = 0; i < p; ++i) {
      const auto t = truth[k * p + i];
      row[i] = t == alive[k] ? Label::True : t == 0 ? Label::False : Label::Unknown;
    }
  }
  return rows;
}

// The answer every world agrees on, from trajectories of the prefix up to
// and including the question position. YesNo gives "maybe" on disagreement;
// other types give nothing.
inline std::optional<std::string> answer(const Declaration& decl,
                                         std::span<const Trajectory> worlds,
                                         const QuestionQuery& q) {
  if (worlds.empty()) return std::nullopt;
  std::set<std::string> seen;
  for (const auto& t : worlds) {
    const World w = from_state(t.back());
    std::string text;
    switch (q.type) {
      case QuestionType::WhereAgent:
        text = decl.locations()[w.agent[q.agent.value]];
        break;
      case QuestionType::WhereObject:
        text = decl.locations()[w.object_location(q.object.value)];
        break;
      case QuestionType::YesNo:
        text = w.agent[q.agent.value] == q.location.value ? "yes" : "no";
        break;
      case QuestionType::Counting:
      case QuestionType::List: {
        std::vector<std::pair<std::size_t, int>> held;  // acquired at, object
        for (int o = 0; o < decl.object_count(); ++o) {
          if (w.carrier(o) != q.agent.value) continue;
          std::size_t when = 0;
          for (std::size_t k = t.size() - 1; k > 0; --k) {
            if (from_state(t[k - 1]).carrier(o) != q.agent.value) {
              when = k;
              break;
            }
          }
          held.emplace_back(when, o);
        }
        std::sort(held.begin(), held.end());
        if (q.type == QuestionType::Counting) {
          text = std::to_string(held.size());
        } else if (held.empty()) {
          text = "nothing";
        } else {
          for (const auto& [when, o] : held) {
            text += (text.empty() ? "" : ",") + decl.objects()[o];
          }
        }
        break;
      }
    }
    seen.insert(text);
  }
  if (seen.size() == 1) return *seen.begin();
  if (q.type == QuestionType::YesNo) return "maybe";
  return std::nullopt;
}

}  // namespace mw::oracle
