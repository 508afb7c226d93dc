#include "microworld/world.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_set>

#include "microworld/errors.hpp"

namespace mw {

namespace {

constexpr std::array<std::string_view, kStatementKindCount> kKindNames = {
    "Move", "CoMove", "Grab", "Drop", "Give", "LocationFact", "Negation"};

bool valid_name(std::string_view name) {
  if (name.empty() || !std::islower(static_cast<unsigned char>(name[0]))) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return std::islower(u) || std::isdigit(u) || c == '_';
  });
}

template <class Range, class Key>
auto find_index(const Range& names, std::string_view wanted, Key key)
    -> std::optional<int> {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (key(names[i]) == wanted) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::Agent:
      return "agent";
    case EntityKind::Object:
      return "object";
    case EntityKind::Location:
      return "location";
  }
  return "?";
}

Declaration::Declaration(std::vector<Agent> agents, std::vector<std::string> locations,
                         std::vector<std::string> objects)
    : agents_(std::move(agents)),
      locations_(std::move(locations)),
      objects_(std::move(objects)) {
  std::unordered_set<std::string> seen;
  auto check = [&](const std::string& name, EntityKind kind) {
    if (!valid_name(name)) {
      throw InvalidConfig("invalid " + std::string(to_string(kind)) + " name \"" +
                          name + "\" (expected a lowercase token)");
    }
    if (!seen.insert(name).second) {
      throw InvalidConfig("duplicate entity name \"" + name + "\"");
    }
  };
  for (const auto& a : agents_) check(a.name, EntityKind::Agent);
  for (const auto& l : locations_) check(l, EntityKind::Location);
  for (const auto& o : objects_) check(o, EntityKind::Object);
  if (locations_.size() > 64) throw InvalidConfig("at most 64 locations are supported");
}

std::optional<AgentId> Declaration::find_agent(std::string_view name) const {
  if (auto i = find_index(agents_, name, [](const Agent& a) -> std::string_view {
        return a.name;
      })) {
    return AgentId{*i};
  }
  return std::nullopt;
}

std::optional<LocationId> Declaration::find_location(std::string_view name) const {
  if (auto i = find_index(locations_, name,
                          [](const std::string& s) -> std::string_view { return s; })) {
    return LocationId{*i};
  }
  return std::nullopt;
}

std::optional<ObjectId> Declaration::find_object(std::string_view name) const {
  if (auto i = find_index(objects_, name,
                          [](const std::string& s) -> std::string_view { return s; })) {
    return ObjectId{*i};
  }
  return std::nullopt;
}

LocationId WorldState::location_of(ObjectId o) const {
  const Place& place = object_place.at(o.value);
  if (const auto* loc = std::get_if<LocationId>(&place)) return *loc;
  return agent_location.at(std::get<AgentId>(place).value);
}

std::optional<AgentId> WorldState::carrier_of(ObjectId o) const {
  const Place& place = object_place.at(o.value);
  if (const auto* a = std::get_if<AgentId>(&place)) return *a;
  return std::nullopt;
}

WorldState make_uniform_state(const Declaration& decl) {
  WorldState s;
  s.agent_location.assign(decl.agent_count(), LocationId{0});
  s.object_place.assign(decl.object_count(), Place{LocationId{0}});
  return s;
}

void validate_state(const Declaration& decl, const WorldState& state) {
  if (state.agent_location.size() != decl.agents().size() ||
      state.object_place.size() != decl.objects().size()) {
    throw InvalidConfig("world state is not total over the declared entities");
  }
  for (auto l : state.agent_location) {
    if (!decl.contains(l)) throw InvalidConfig("agent placed at an undeclared location");
  }
  for (const auto& p : state.object_place) {
    bool ok = std::visit(
        [&](auto id) { return decl.contains(id); }, p);
    if (!ok) throw InvalidConfig("object placed at an undeclared place");
  }
}

std::string_view to_string(StatementKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

std::optional<StatementKind> statement_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<StatementKind>(i);
  }
  return std::nullopt;
}

StatementKind kind_of(const Event& event) {
  return static_cast<StatementKind>(event.index());
}

Event to_event(const Action& action) {
  return std::visit([](const auto& a) -> Event { return a; }, action);
}

std::optional<Action> to_action(const Event& event) {
  return std::visit(
      [](const auto& e) -> std::optional<Action> {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, LocationFact> || std::is_same_v<T, Negation>) {
          return std::nullopt;
        } else {
          return Action{e};
        }
      },
      event);
}

std::optional<AgentId> single_subject(const Event& event) {
  return std::visit(
      [](const auto& e) -> std::optional<AgentId> {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, CoMove>) {
          return std::nullopt;
        } else if constexpr (std::is_same_v<T, Give>) {
          return e.giver;
        } else {
          return e.agent;
        }
      },
      event);
}

std::vector<AgentId> agents_of(const Event& event) {
  return std::visit(
      [](const auto& e) -> std::vector<AgentId> {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, CoMove>) {
          return {e.first, e.second};
        } else if constexpr (std::is_same_v<T, Give>) {
          return {e.giver, e.receiver};
        } else {
          return {e.agent};
        }
      },
      event);
}

std::optional<ObjectId> object_of(const Event& event) {
  return std::visit(
      [](const auto& e) -> std::optional<ObjectId> {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, Grab> || std::is_same_v<T, Drop> ||
                      std::is_same_v<T, Give>) {
          return e.object;
        } else {
          return std::nullopt;
        }
      },
      event);
}

char label_code(Label label) {
  switch (label) {
    case Label::True:
      return 'T';
    case Label::False:
      return 'F';
    case Label::Unknown:
      return 'U';
  }
  return '?';
}

Label label_from_code(char code) {
  switch (code) {
    case 'T':
      return Label::True;
    case 'F':
      return Label::False;
    case 'U':
      return Label::Unknown;
    default:
      throw Error(std::string("unknown label code '") + code + "'");
  }
}

std::string to_string(const Declaration& decl, const Proposition& prop) {
  return std::visit(
      [&](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, At>) {
          return "At(" + decl.name(p.agent) + "," + decl.name(p.location) + ")";
        } else if constexpr (std::is_same_v<T, Holds>) {
          return "Holds(" + decl.name(p.agent) + "," + decl.name(p.object) + ")";
        } else {
          return "ObjAt(" + decl.name(p.object) + "," + decl.name(p.location) + ")";
        }
      },
      prop);
}

std::string to_program_line(const Declaration& decl, const Action& action) {
  return std::visit(
      [&](const auto& a) -> std::string {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Move>) {
          return "move(" + decl.name(a.agent) + ", " + decl.name(a.to) + ")";
        } else if constexpr (std::is_same_v<T, CoMove>) {
          return "comove(" + decl.name(a.first) + ", " + decl.name(a.second) + ", " +
                 decl.name(a.to) + ")";
        } else if constexpr (std::is_same_v<T, Grab>) {
          return "grab(" + decl.name(a.agent) + ", " + decl.name(a.object) + ")";
        } else if constexpr (std::is_same_v<T, Drop>) {
          return "drop(" + decl.name(a.agent) + ", " + decl.name(a.object) + ")";
        } else {
          return "give(" + decl.name(a.giver) + ", " + decl.name(a.receiver) + ", " +
                 decl.name(a.object) + ")";
        }
      },
      action);
}

std::string to_string(const Declaration& decl, const Event& event) {
  if (auto action = to_action(event)) return to_program_line(decl, *action);
  if (const auto* f = std::get_if<LocationFact>(&event)) {
    return "is_at(" + decl.name(f->agent) + ", " + decl.name(f->at) + ")";
  }
  const auto& n = std::get<Negation>(event);
  return "not_at(" + decl.name(n.agent) + ", " + decl.name(n.at) + ")";
}

Event parse_event_line(const Declaration& decl, std::string_view line) {
  const std::string text(line);
  line = trim(line);
  auto open = line.find('(');
  if (open == std::string_view::npos || line.empty() || line.back() != ')') {
    throw ParseError(0, "verb(arguments)", text);
  }
  std::string_view verb = trim(line.substr(0, open));
  std::string_view inner = line.substr(open + 1, line.size() - open - 2);
  std::vector<std::string_view> args;
  while (true) {
    auto comma = inner.find(',');
    args.push_back(trim(inner.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    inner.remove_prefix(comma + 1);
  }
  auto agent = [&](std::size_t i) {
    if (auto a = decl.find_agent(args[i])) return *a;
    throw UnknownEntity(std::string(args[i]), "agent");
  };
  auto location = [&](std::size_t i) {
    if (auto l = decl.find_location(args[i])) return *l;
    throw UnknownEntity(std::string(args[i]), "location");
  };
  auto object = [&](std::size_t i) {
    if (auto o = decl.find_object(args[i])) return *o;
    throw UnknownEntity(std::string(args[i]), "object");
  };
  auto arity = [&](std::size_t n) {
    if (args.size() != n) {
      throw ParseError(args.size(), std::to_string(n) + " arguments", text);
    }
  };
  if (verb == "move") {
    arity(2);
    return Move{agent(0), location(1)};
  }
  if (verb == "comove") {
    arity(3);
    return CoMove{agent(0), agent(1), location(2)};
  }
  if (verb == "grab") {
    arity(2);
    return Grab{agent(0), object(1)};
  }
  if (verb == "drop") {
    arity(2);
    return Drop{agent(0), object(1)};
  }
  if (verb == "give") {
    arity(3);
    return Give{agent(0), agent(1), object(2)};
  }
  if (verb == "is_at") {
    arity(2);
    return LocationFact{agent(0), location(1)};
  }
  if (verb == "not_at") {
    arity(2);
    return Negation{agent(0), location(1)};
  }
  throw ParseError(0, "one of move, comove, grab, drop, give, is_at, not_at", text);
}

Action parse_program_line(const Declaration& decl, std::string_view line) {
  auto action = to_action(parse_event_line(decl, line));
  if (!action) throw ParseError(0, "an action", std::string(line));
  return *action;
}

void validate_event(const Declaration& decl, const Event& event) {
  for (auto a : agents_of(event)) {
    if (!decl.contains(a)) throw InvalidStatement("statement references an undeclared agent");
  }
  if (auto o = object_of(event); o && !decl.contains(*o)) {
    throw InvalidStatement("statement references an undeclared object");
  }
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, Move> || std::is_same_v<T, CoMove>) {
          if (!decl.contains(e.to)) {
            throw InvalidStatement("statement references an undeclared location");
          }
        }
        if constexpr (std::is_same_v<T, LocationFact> || std::is_same_v<T, Negation>) {
          if (!decl.contains(e.at)) {
            throw InvalidStatement("statement references an undeclared location");
          }
        }
        if constexpr (std::is_same_v<T, CoMove>) {
          if (e.first == e.second) throw InvalidStatement("co-movers must be distinct");
        }
        if constexpr (std::is_same_v<T, Give>) {
          if (e.giver == e.receiver) throw InvalidStatement("giver and receiver must differ");
        }
      },
      event);
}

std::optional<std::string> violation(const Declaration& decl, const WorldState& state,
                                     const Event& event) {
  auto at = [&](AgentId a) { return state.agent_location[a.value]; };
  return std::visit(
      [&](const auto& e) -> std::optional<std::string> {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, Move>) {
          if (at(e.agent) == e.to) {
            return decl.name(e.agent) + " is already in the " + decl.name(e.to);
          }
        } else if constexpr (std::is_same_v<T, CoMove>) {
          for (auto a : {e.first, e.second}) {
            if (at(a) == e.to) return decl.name(a) + " is already in the " + decl.name(e.to);
          }
        } else if constexpr (std::is_same_v<T, Grab>) {
          if (auto c = state.carrier_of(e.object)) {
            return decl.name(e.object) + " is carried by " + decl.name(*c);
          }
          if (state.location_of(e.object) != at(e.agent)) {
            return decl.name(e.object) + " is not where " + decl.name(e.agent) + " is";
          }
        } else if constexpr (std::is_same_v<T, Drop>) {
          if (state.carrier_of(e.object) != e.agent) {
            return decl.name(e.agent) + " does not carry " + decl.name(e.object);
          }
        } else if constexpr (std::is_same_v<T, Give>) {
          if (state.carrier_of(e.object) != e.giver) {
            return decl.name(e.giver) + " does not carry " + decl.name(e.object);
          }
          if (at(e.giver) != at(e.receiver)) {
            return decl.name(e.giver) + " and " + decl.name(e.receiver) +
                   " are not in the same place";
          }
        } else if constexpr (std::is_same_v<T, LocationFact>) {
          if (at(e.agent) != e.at) {
            return decl.name(e.agent) + " is not in the " + decl.name(e.at);
          }
        } else {
          if (at(e.agent) == e.at) return decl.name(e.agent) + " is in the " + decl.name(e.at);
        }
        return std::nullopt;
      },
      event);
}

bool try_apply(const Declaration& decl, WorldState& state, const Event& event) {
  if (violation(decl, state, event)) return false;
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, Move>) {
          state.agent_location[e.agent.value] = e.to;
        } else if constexpr (std::is_same_v<T, CoMove>) {
          state.agent_location[e.first.value] = e.to;
          state.agent_location[e.second.value] = e.to;
        } else if constexpr (std::is_same_v<T, Grab>) {
          state.object_place[e.object.value] = e.agent;
        } else if constexpr (std::is_same_v<T, Drop>) {
          state.object_place[e.object.value] = state.agent_location[e.agent.value];
        } else if constexpr (std::is_same_v<T, Give>) {
          state.object_place[e.object.value] = e.receiver;
        }
      },
      event);
  return true;
}

WorldState apply_statement(const Declaration& decl, const WorldState& state,
                           const Statement& stmt) {
  validate_event(decl, stmt.event);
  if (auto why = violation(decl, state, stmt.event)) {
    throw PreconditionViolation(stmt.index, *why);
  }
  WorldState next = state;
  try_apply(decl, next, stmt.event);
  return next;
}

std::vector<Action> legal_actions(const Declaration& decl, const WorldState& state) {
  std::vector<Action> out;
  const int agents = decl.agent_count();
  const int locations = decl.location_count();
  const int objects = decl.object_count();
  for (int a = 0; a < agents; ++a) {
    const AgentId agent{a};
    const LocationId here = state.agent_location[a];
    for (int l = 0; l < locations; ++l) {
      if (l != here.value) out.push_back(Move{agent, LocationId{l}});
    }
    for (int b = 0; b < agents; ++b) {
      if (b == a) continue;
      for (int l = 0; l < locations; ++l) {
        if (l != here.value && l != state.agent_location[b].value) {
          out.push_back(CoMove{agent, AgentId{b}, LocationId{l}});
        }
      }
    }
    for (int o = 0; o < objects; ++o) {
      const ObjectId object{o};
      const auto carrier = state.carrier_of(object);
      if (!carrier) {
        if (state.location_of(object) == here) out.push_back(Grab{agent, object});
      } else if (*carrier == agent) {
        out.push_back(Drop{agent, object});
        for (int b = 0; b < agents; ++b) {
          if (b != a && state.agent_location[b] == here) {
            out.push_back(Give{agent, AgentId{b}, object});
          }
        }
      }
    }
  }
  return out;
}

bool holds(const WorldState& state, const Proposition& prop) {
  return std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, At>) {
          return state.agent_location.at(p.agent.value) == p.location;
        } else if constexpr (std::is_same_v<T, Holds>) {
          return state.carrier_of(p.object) == p.agent;
        } else {
          return state.location_of(p.object) == p.location;
        }
      },
      prop);
}

}  // namespace mw
