#pragma once

// Ground-truth micro-world: entities, total world states, the statement
// vocabulary and its transition semantics.

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mw {

template <class Tag>
struct Id {
  int value = -1;
  auto operator<=>(const Id&) const = default;
};

using AgentId = Id<struct AgentTag>;
using LocationId = Id<struct LocationTag>;
using ObjectId = Id<struct ObjectTag>;

enum class EntityKind { Agent, Object, Location };

std::string_view to_string(EntityKind kind);

struct Agent {
  std::string name;
  std::string pronoun;  // "he", "she", ... ; empty disables pronominal reference
};

// The closed set of entities a story or session is about. Names are
// lowercase single tokens, unique across all kinds.
class Declaration {
 public:
  Declaration() = default;
  // Throws InvalidConfig on duplicate or malformed names.
  Declaration(std::vector<Agent> agents, std::vector<std::string> locations,
              std::vector<std::string> objects);

  const std::vector<Agent>& agents() const { return agents_; }
  const std::vector<std::string>& locations() const { return locations_; }
  const std::vector<std::string>& objects() const { return objects_; }

  int agent_count() const { return static_cast<int>(agents_.size()); }
  int location_count() const { return static_cast<int>(locations_.size()); }
  int object_count() const { return static_cast<int>(objects_.size()); }

  const std::string& name(AgentId a) const { return agents_.at(a.value).name; }
  const std::string& name(LocationId l) const { return locations_.at(l.value); }
  const std::string& name(ObjectId o) const { return objects_.at(o.value); }

  std::optional<AgentId> find_agent(std::string_view name) const;
  std::optional<LocationId> find_location(std::string_view name) const;
  std::optional<ObjectId> find_object(std::string_view name) const;

  bool contains(AgentId a) const { return a.value >= 0 && a.value < agent_count(); }
  bool contains(LocationId l) const {
    return l.value >= 0 && l.value < location_count();
  }
  bool contains(ObjectId o) const { return o.value >= 0 && o.value < object_count(); }

  bool operator==(const Declaration&) const = default;

 private:
  std::vector<Agent> agents_;
  std::vector<std::string> locations_;
  std::vector<std::string> objects_;
};

// Where an object is: lying at a location or carried by an agent.
using Place = std::variant<LocationId, AgentId>;

// Total assignment of every agent to a location and every object to a place.
struct WorldState {
  std::vector<LocationId> agent_location;
  std::vector<Place> object_place;

  LocationId location_of(ObjectId o) const;
  std::optional<AgentId> carrier_of(ObjectId o) const;

  bool operator==(const WorldState&) const = default;
};

// A state with every agent at location 0 and every object lying there.
WorldState make_uniform_state(const Declaration& decl);

// Throws InvalidConfig unless `state` is total and in range for `decl`.
void validate_state(const Declaration& decl, const WorldState& state);

struct Move {
  AgentId agent;
  LocationId to;
  bool operator==(const Move&) const = default;
};
struct CoMove {
  AgentId first;
  AgentId second;
  LocationId to;
  bool operator==(const CoMove&) const = default;
};
struct Grab {
  AgentId agent;
  ObjectId object;
  bool operator==(const Grab&) const = default;
};
struct Drop {
  AgentId agent;
  ObjectId object;
  bool operator==(const Drop&) const = default;
};
struct Give {
  AgentId giver;
  AgentId receiver;
  ObjectId object;
  bool operator==(const Give&) const = default;
};
struct LocationFact {
  AgentId agent;
  LocationId at;
  bool operator==(const LocationFact&) const = default;
};
struct Negation {
  AgentId agent;
  LocationId at;
  bool operator==(const Negation&) const = default;
};

using Action = std::variant<Move, CoMove, Grab, Drop, Give>;

// Statement payloads; the alternative order defines StatementKind.
using Event = std::variant<Move, CoMove, Grab, Drop, Give, LocationFact, Negation>;

enum class StatementKind { Move, CoMove, Grab, Drop, Give, LocationFact, Negation };
inline constexpr int kStatementKindCount = 7;

std::string_view to_string(StatementKind kind);
std::optional<StatementKind> statement_kind_from_string(std::string_view name);
StatementKind kind_of(const Event& event);
inline StatementKind kind_of(const Action& action) {
  return static_cast<StatementKind>(action.index());
}

Event to_event(const Action& action);
std::optional<Action> to_action(const Event& event);

struct Statement {
  Event event;
  int index = 0;
  bool coref = false;

  bool operator==(const Statement&) const = default;
};

// The single agent the statement is about, if there is exactly one. CoMove
// has two subjects and therefore none.
std::optional<AgentId> single_subject(const Event& event);

std::vector<AgentId> agents_of(const Event& event);
std::optional<ObjectId> object_of(const Event& event);

struct At {
  AgentId agent;
  LocationId location;
  bool operator==(const At&) const = default;
};
struct Holds {
  AgentId agent;
  ObjectId object;
  bool operator==(const Holds&) const = default;
};
struct ObjAt {
  ObjectId object;
  LocationId location;
  bool operator==(const ObjAt&) const = default;
};

using Proposition = std::variant<At, Holds, ObjAt>;

enum class Label { True, False, Unknown };

char label_code(Label label);
Label label_from_code(char code);

// Human-readable forms: "At(mary,kitchen)", "grab(mary, apple)".
std::string to_string(const Declaration& decl, const Proposition& prop);
std::string to_program_line(const Declaration& decl, const Action& action);
std::string to_string(const Declaration& decl, const Event& event);

// Parses a program line such as "give(mary, john, apple)". Throws
// ParseError / UnknownEntity.
Action parse_program_line(const Declaration& decl, std::string_view line);
// Also accepts the fact forms is_at(agent, location) and not_at(agent, location).
Event parse_event_line(const Declaration& decl, std::string_view line);

// Returns the reason the event cannot happen in `state`, or nothing if it can.
// Entity references must already be in range; see validate_event.
std::optional<std::string> violation(const Declaration& decl,
                                     const WorldState& state, const Event& event);

// Throws InvalidStatement when an event references missing entities or
// repeats an agent where two distinct agents are required.
void validate_event(const Declaration& decl, const Event& event);

// The transition function. Throws PreconditionViolation.
WorldState apply_statement(const Declaration& decl, const WorldState& state,
                           const Statement& stmt);

// In-place variant for hot loops; returns false (leaving `state` untouched)
// when a precondition fails.
bool try_apply(const Declaration& decl, WorldState& state, const Event& event);

// Every action whose preconditions hold, in a fixed order.
std::vector<Action> legal_actions(const Declaration& decl, const WorldState& state);

bool holds(const WorldState& state, const Proposition& prop);

}  // namespace mw
