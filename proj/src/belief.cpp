#include "microworld/belief.hpp"

#include <algorithm>
#include <iterator>

#include "microworld/errors.hpp"

namespace mw {

namespace {

void add_index(std::vector<int>& prov, int index) {
  auto it = std::lower_bound(prov.begin(), prov.end(), index);
  if (it == prov.end() || *it != index) prov.insert(it, index);
}

}  // namespace

std::vector<int> merge_indices(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

LocationSet LocationSet::all(int location_count) {
  if (location_count >= 64) return LocationSet(~std::uint64_t{0});
  return LocationSet((std::uint64_t{1} << location_count) - 1);
}

std::optional<LocationId> LocationSet::only() const {
  if (size() != 1) return std::nullopt;
  return LocationId{std::countr_zero(bits_)};
}

std::vector<LocationId> LocationSet::members() const {
  std::vector<LocationId> out;
  for (std::uint64_t rest = bits_; rest != 0; rest &= rest - 1) {
    out.push_back(LocationId{std::countr_zero(rest)});
  }
  return out;
}

BeliefState::BeliefState(const Declaration& decl) : location_count_(decl.location_count()) {
  const auto all = LocationSet::all(location_count_);
  for (int a = 0; a < decl.agent_count(); ++a) agent_class_.push_back(new_class(all, {}));
  for (int o = 0; o < decl.object_count(); ++o) object_class_.push_back(new_class(all, {}));
  carrier_.assign(decl.object_count(), -1);
  carry_prov_.assign(decl.object_count(), {});
}

int BeliefState::new_class(LocationSet domain, std::vector<int> prov) {
  classes_.push_back({domain, std::move(prov)});
  return static_cast<int>(classes_.size()) - 1;
}

void BeliefState::merge_into(int keep, int drop, LocationSet domain, std::vector<int> prov) {
  classes_[keep].domain = domain;
  classes_[keep].prov = std::move(prov);
  for (auto& c : agent_class_) {
    if (c == drop) c = keep;
  }
  for (std::size_t o = 0; o < object_class_.size(); ++o) {
    if (carrier_[o] < 0 && object_class_[o] == drop) object_class_[o] = keep;
  }
}

int BeliefState::location_class(ObjectId o) const {
  const int c = carrier_.at(o.value);
  return c >= 0 ? agent_class_[c] : object_class_[o.value];
}

LocationSet BeliefState::possible_locations(AgentId a) const {
  return cls(agent_class_.at(a.value)).domain;
}

LocationSet BeliefState::possible_locations(ObjectId o) const {
  return cls(location_class(o)).domain;
}

std::optional<AgentId> BeliefState::carrier(ObjectId o) const {
  const int c = carrier_.at(o.value);
  if (c < 0) return std::nullopt;
  return AgentId{c};
}

std::vector<int> BeliefState::provenance(AgentId a) const {
  return cls(agent_class_.at(a.value)).prov;
}

std::vector<int> BeliefState::provenance(ObjectId o) const {
  return merge_indices(cls(location_class(o)).prov, carry_prov_.at(o.value));
}

Label BeliefState::label(const Proposition& prop) const {
  auto locate = [](LocationSet domain, LocationId l) {
    if (!domain.contains(l)) return Label::False;
    return domain.size() == 1 ? Label::True : Label::Unknown;
  };
  return std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, At>) {
          return locate(possible_locations(p.agent), p.location);
        } else if constexpr (std::is_same_v<T, Holds>) {
          return carrier(p.object) == p.agent ? Label::True : Label::False;
        } else {
          return locate(possible_locations(p.object), p.location);
        }
      },
      prop);
}

std::vector<int> BeliefState::label_provenance(const Proposition& prop) const {
  return std::visit(
      [&](const auto& p) -> std::vector<int> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, At>) {
          return provenance(p.agent);
        } else if constexpr (std::is_same_v<T, Holds>) {
          return carry_provenance(p.object);
        } else {
          return provenance(p.object);
        }
      },
      prop);
}

void BeliefState::apply(const Declaration& decl, const Statement& stmt) {
  validate_event(decl, stmt.event);
  const int i = stmt.index;
  auto fail = [&](std::vector<int> evidence, std::string reason) {
    throw Contradiction(i, std::move(evidence), std::move(reason));
  };
  // Every check below runs before the first mutation of its branch.
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, Move> || std::is_same_v<T, CoMove>) {
          std::vector<AgentId> movers;
          if constexpr (std::is_same_v<T, Move>) {
            movers = {e.agent};
          } else {
            movers = {e.first, e.second};
          }
          for (auto a : movers) {
            const auto& c = cls(agent_class_[a.value]);
            if (c.domain.without(e.to).empty()) {
              fail(c.prov, decl.name(a) + " is already in the " + decl.name(e.to));
            }
          }
          // The movers were not at the destination beforehand.
          for (auto a : movers) {
            auto& c = classes_[agent_class_[a.value]];
            if (c.domain.contains(e.to)) {
              c.domain = c.domain.without(e.to);
              add_index(c.prov, i);
            }
          }
          const int fresh = new_class(LocationSet::single(e.to), {i});
          for (auto a : movers) agent_class_[a.value] = fresh;
        } else if constexpr (std::is_same_v<T, Grab>) {
          const int o = e.object.value;
          if (carrier_[o] >= 0) {
            fail(carry_prov_[o], decl.name(e.object) + " is carried by " +
                                     decl.name(AgentId{carrier_[o]}));
          }
          const int ca = agent_class_[e.agent.value];
          const int co = object_class_[o];
          // A lone object about whose place nothing narrower is known tells
          // the reader nothing new about the agent.
          bool alone = std::none_of(agent_class_.begin(), agent_class_.end(),
                                    [&](int c) { return c == co; });
          for (std::size_t other = 0; alone && other < object_class_.size(); ++other) {
            alone = static_cast<int>(other) == o || carrier_[other] >= 0 ||
                    object_class_[other] != co;
          }
          const bool informative =
              !alone || (cls(ca).domain & cls(co).domain) != cls(ca).domain;
          if (ca != co && informative) {
            const auto domain = cls(ca).domain & cls(co).domain;
            auto prov = merge_indices(merge_indices(cls(ca).prov, cls(co).prov),
                                      carry_prov_[o]);
            if (domain.empty()) {
              fail(prov, decl.name(e.object) + " cannot be where " + decl.name(e.agent) +
                             " is");
            }
            add_index(prov, i);
            merge_into(ca, co, domain, std::move(prov));
          }
          carrier_[o] = e.agent.value;
          carry_prov_[o] = {i};
        } else if constexpr (std::is_same_v<T, Drop>) {
          const int o = e.object.value;
          if (carrier_[o] != e.agent.value) {
            fail(carry_prov_[o], decl.name(e.agent) + " does not carry " +
                                     decl.name(e.object));
          }
          carrier_[o] = -1;
          object_class_[o] = agent_class_[e.agent.value];
          add_index(carry_prov_[o], i);
        } else if constexpr (std::is_same_v<T, Give>) {
          const int o = e.object.value;
          if (carrier_[o] != e.giver.value) {
            fail(carry_prov_[o], decl.name(e.giver) + " does not carry " +
                                     decl.name(e.object));
          }
          const int cg = agent_class_[e.giver.value];
          const int cr = agent_class_[e.receiver.value];
          if (cg != cr) {
            const auto domain = cls(cg).domain & cls(cr).domain;
            auto prov = merge_indices(cls(cg).prov, cls(cr).prov);
            if (domain.empty()) {
              fail(prov, decl.name(e.giver) + " and " + decl.name(e.receiver) +
                             " cannot be in the same place");
            }
            add_index(prov, i);
            merge_into(cg, cr, domain, std::move(prov));
          }
          carrier_[o] = e.receiver.value;
          add_index(carry_prov_[o], i);
        } else if constexpr (std::is_same_v<T, LocationFact>) {
          auto& c = classes_[agent_class_[e.agent.value]];
          if (!c.domain.contains(e.at)) {
            fail(c.prov, decl.name(e.agent) + " cannot be in the " + decl.name(e.at));
          }
          if (c.domain.size() != 1) {
            c.domain = LocationSet::single(e.at);
            add_index(c.prov, i);
          }
        } else {
          auto& c = classes_[agent_class_[e.agent.value]];
          if (c.domain.without(e.at).empty()) {
            fail(c.prov, decl.name(e.agent) + " is known to be in the " + decl.name(e.at));
          }
          if (c.domain.contains(e.at)) {
            c.domain = c.domain.without(e.at);
            add_index(c.prov, i);
          }
        }
      },
      stmt.event);
  ++read_;
}

BeliefState update_belief(const Declaration& decl, const BeliefState& belief,
                          const Statement& stmt) {
  BeliefState next = belief;
  next.apply(decl, stmt);
  return next;
}

Label label(const BeliefState& belief, const Proposition& prop) { return belief.label(prop); }

}  // namespace mw
