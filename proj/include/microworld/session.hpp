#pragma once

// Live annotation sessions: a human executes a procedural text as commands
// against a world; every accepted command is recorded as a trace step.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "microworld/env.hpp"
#include "microworld/language.hpp"
#include "microworld/world.hpp"

namespace mw {

struct SessionConfig {
  Declaration entities;
  WorldState initial;
  std::optional<Goal> goal;
  std::vector<std::string> source_text;
  std::shared_ptr<const Lexicon> lexicon;
  AgentId agent;
  nlohmann::json raw;  // the validated input document, kept for persistence

  // {"world": {"agents", "locations", "objects", "initial", "goal"?},
  //  "source_text": [...], "lexicon": "default" | {...}, "agent": name}
  // Throws InvalidConfig.
  static SessionConfig from_json(const nlohmann::json& doc);
};

std::string state_digest(const Declaration& decl, const WorldState& state);

struct TraceStep {
  int index = 0;
  std::string command;
  Action action;
  std::string pre_digest;
  std::string post_digest;
  std::optional<int> segment;
  std::string timestamp;  // UTC, ISO 8601 with milliseconds
};

nlohmann::ordered_json trace_step_to_json(const Declaration& decl, const TraceStep& step);
TraceStep trace_step_from_json(const Declaration& decl, const nlohmann::json& doc);

struct ActionGraph {
  struct Node {
    std::string id;    // "entity:<name>" or "action:<k>"
    std::string kind;  // agent | object | location | action
    std::string label;
  };
  struct Edge {
    std::string from;
    std::string to;
    std::string type;  // argument | temporal
    std::string role;  // agent, co-agent, object, location, recipient; empty for temporal
  };
  std::vector<Node> nodes;
  std::vector<Edge> edges;
};

ActionGraph build_action_graph(const Declaration& decl, std::span<const Action> actions);
// Inverse of build_action_graph. Throws InvalidConfig on malformed graphs.
std::vector<Action> actions_from_graph(const Declaration& decl, const ActionGraph& graph);
nlohmann::ordered_json action_graph_to_json(const ActionGraph& graph);
ActionGraph action_graph_from_json(const nlohmann::json& doc);

std::string program_text(const Declaration& decl, std::span<const Action> actions);

enum class ExportFormat { TraceJsonl, ActionGraph, Program };
std::optional<ExportFormat> export_format_from_string(std::string_view name);

struct CommandOutcome {
  bool ok = false;
  std::string observation;
  nlohmann::ordered_json delta = nlohmann::ordered_json::object();
  bool goal_reached = false;
  int step = -1;  // index of the recorded step when ok
  std::string error_kind;  // ParseError, UnknownEntity, UnresolvedPronoun, PreconditionViolation
  std::string error;
  std::vector<std::string> hints;  // legal commands, at most 10
};

class Session {
 public:
  Session(std::string id, SessionConfig config);

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return config_; }

  // Serialized per session; `persist` runs under the command lock before the
  // step becomes visible.
  CommandOutcome execute(const std::string& text, std::optional<int> segment,
                         const std::function<void(const TraceStep&)>& persist = {});
  // Re-applies a recorded step; throws PreconditionViolation on mismatch.
  void restore(const TraceStep& step);

  struct Snapshot {
    WorldState state;
    std::vector<TraceStep> trace;
    bool goal_reached = false;
  };
  Snapshot snapshot() const;

  std::string observation(const WorldState& state) const;
  nlohmann::ordered_json state_json() const;
  nlohmann::ordered_json legal_json() const;
  std::string export_trace(ExportFormat format) const;

  using Listener = std::function<void(const nlohmann::ordered_json&)>;
  int subscribe(Listener listener);
  void unsubscribe(int token);

 private:
  std::vector<std::string> hints(const WorldState& state) const;

  std::string id_;
  SessionConfig config_;
  mutable std::mutex command_mutex_;
  mutable std::mutex snapshot_mutex_;
  WorldState state_;
  std::vector<TraceStep> trace_;
  std::mutex listener_mutex_;
  std::map<int, Listener> listeners_;
  int next_listener_ = 0;
};

// Owns all sessions; optional persistence as one append-only JSON Lines log
// per session in `data_dir`.
class SessionManager {
 public:
  explicit SessionManager(std::optional<std::filesystem::path> data_dir = std::nullopt);

  // Returns the new id. Throws InvalidConfig.
  std::string create(const nlohmann::json& config);
  // Throws SessionNotFound.
  std::shared_ptr<Session> get(const std::string& id) const;
  CommandOutcome execute(const std::string& id, const std::string& text,
                         std::optional<int> segment);
  std::vector<std::string> ids() const;
  // Number of sessions recovered from the data directory at construction.
  std::size_t recovered() const { return recovered_; }

 private:
  std::string fresh_id();
  void append(const std::string& id, const nlohmann::ordered_json& record) const;

  std::optional<std::filesystem::path> data_dir_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
  std::uint64_t salt_ = 0;
  std::size_t recovered_ = 0;
};

}  // namespace mw
