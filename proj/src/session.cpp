#include "microworld/session.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <random>

#include "microworld/dataset.hpp"
#include "microworld/digest.hpp"
#include "microworld/errors.hpp"
#include "microworld/rng.hpp"

namespace mw {

namespace {

std::string now_iso() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  const auto n = std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  std::snprintf(buf + n, sizeof buf - n, ".%03dZ", static_cast<int>(ms));
  return buf;
}

std::string capitalized(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

AgentId actor_of(const Action& action) {
  return std::visit(
      [](const auto& a) -> AgentId {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, CoMove>) {
          return a.first;
        } else if constexpr (std::is_same_v<T, Give>) {
          return a.giver;
        } else {
          return a.agent;
        }
      },
      action);
}

std::string verb_of(const Action& action) {
  return std::visit(
      [](const auto& a) -> std::string {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Move>) return "move";
        if constexpr (std::is_same_v<T, CoMove>) return "comove";
        if constexpr (std::is_same_v<T, Grab>) return "grab";
        if constexpr (std::is_same_v<T, Drop>) return "drop";
        return "give";
      },
      action);
}

std::string entity_node(const std::string& name) { return "entity:" + name; }

// Imperative text when the lexicon has one, else the program line.
std::string command_text(const Action& action, const Lexicon& lex, const Declaration& decl) {
  if (lex.commands(kind_of(action)).empty()) return to_program_line(decl, action);
  return render_command(action, lex, decl);
}

nlohmann::ordered_json state_delta(const Declaration& decl, const WorldState& before,
                                   const WorldState& after) {
  const auto a = state_to_json(decl, before);
  const auto b = state_to_json(decl, after);
  nlohmann::ordered_json delta = {{"agents", nlohmann::ordered_json::object()},
                                  {"objects", nlohmann::ordered_json::object()}};
  for (const char* kind : {"agents", "objects"}) {
    for (const auto& [name, value] : b.at(kind).items()) {
      if (a.at(kind).at(name) != value) delta[kind][name] = value;
    }
  }
  return delta;
}

std::shared_ptr<const Lexicon> load_lexicon(const nlohmann::json& ref) {
  if (ref.is_null() || (ref.is_string() && ref.get<std::string>() == "default")) {
    return std::shared_ptr<const Lexicon>(&Lexicon::default_english(), [](const Lexicon*) {});
  }
  if (ref.is_object()) return std::make_shared<const Lexicon>(Lexicon::from_json(ref));
  if (ref.is_string()) {
    std::ifstream in(ref.get<std::string>());
    if (!in) throw InvalidConfig("lexicon: cannot open " + ref.get<std::string>());
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidConfig("lexicon: " + std::string(e.what()));
    }
    return std::make_shared<const Lexicon>(Lexicon::from_json(doc));
  }
  throw InvalidConfig("lexicon: expected \"default\", a file path or an inline lexicon");
}

}  // namespace

SessionConfig SessionConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InvalidConfig("session config: expected an object");
  if (!doc.contains("world")) throw InvalidConfig("world: missing");
  const auto& world = doc.at("world");
  SessionConfig c;
  try {
    c.entities = declaration_from_json(world);
    if (c.entities.agent_count() == 0 || c.entities.location_count() == 0) {
      throw InvalidConfig("world: at least one agent and one location are required");
    }
    if (!world.contains("initial")) throw InvalidConfig("world.initial: missing");
    c.initial = state_from_json(c.entities, world.at("initial"));
    if (world.contains("goal") && !world.at("goal").is_null()) {
      c.goal = goal_from_json(c.entities, world.at("goal"));
    }
  } catch (const UnknownEntity& e) {
    throw InvalidConfig(std::string("world: ") + e.what());
  }
  const auto segments = doc.value("source_text", nlohmann::json::array());
  if (!segments.is_array() || segments.empty()) {
    throw InvalidConfig("source_text: expected a non-empty list of segments");
  }
  for (const auto& s : segments) {
    if (!s.is_string()) throw InvalidConfig("source_text: segments must be strings");
    c.source_text.push_back(s.get<std::string>());
  }
  c.lexicon = load_lexicon(doc.value("lexicon", nlohmann::json("default")));
  const auto agent = doc.contains("agent") ? doc.at("agent") : nlohmann::json(nullptr);
  if (agent.is_null()) {
    c.agent = AgentId{0};
  } else if (auto a = agent.is_string() ? c.entities.find_agent(agent.get<std::string>())
                                        : std::nullopt) {
    c.agent = *a;
  } else {
    throw InvalidConfig("agent: " + agent.dump() + " is not a declared agent");
  }
  c.raw = doc;
  return c;
}

std::string state_digest(const Declaration& decl, const WorldState& state) {
  return sha256_hex(state_to_json(decl, state).dump());
}

nlohmann::ordered_json trace_step_to_json(const Declaration& decl, const TraceStep& step) {
  nlohmann::ordered_json j;
  j["step"] = step.index;
  j["command"] = step.command;
  j["action"] = to_program_line(decl, step.action);
  j["pre_digest"] = step.pre_digest;
  j["post_digest"] = step.post_digest;
  j["segment"] = step.segment ? nlohmann::ordered_json(*step.segment) : nlohmann::ordered_json();
  j["timestamp"] = step.timestamp;
  return j;
}

TraceStep trace_step_from_json(const Declaration& decl, const nlohmann::json& doc) {
  TraceStep s;
  s.index = doc.at("step").get<int>();
  s.command = doc.value("command", std::string());
  s.action = parse_program_line(decl, doc.at("action").get<std::string>());
  s.pre_digest = doc.value("pre_digest", std::string());
  s.post_digest = doc.value("post_digest", std::string());
  if (doc.contains("segment") && !doc.at("segment").is_null()) s.segment = doc.at("segment").get<int>();
  s.timestamp = doc.value("timestamp", std::string());
  return s;
}

ActionGraph build_action_graph(const Declaration& decl, std::span<const Action> actions) {
  ActionGraph g;
  for (const auto& a : decl.agents()) g.nodes.push_back({entity_node(a.name), "agent", a.name});
  for (const auto& o : decl.objects()) g.nodes.push_back({entity_node(o), "object", o});
  for (const auto& l : decl.locations()) g.nodes.push_back({entity_node(l), "location", l});
  for (std::size_t k = 0; k < actions.size(); ++k) {
    const std::string id = "action:" + std::to_string(k);
    g.nodes.push_back({id, "action", verb_of(actions[k])});
    auto arg = [&](const std::string& name, const char* role) {
      g.edges.push_back({id, entity_node(name), "argument", role});
    };
    std::visit(
        [&](const auto& a) {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, Move>) {
            arg(decl.name(a.agent), "agent");
            arg(decl.name(a.to), "location");
          } else if constexpr (std::is_same_v<T, CoMove>) {
            arg(decl.name(a.first), "agent");
            arg(decl.name(a.second), "co-agent");
            arg(decl.name(a.to), "location");
          } else if constexpr (std::is_same_v<T, Give>) {
            arg(decl.name(a.giver), "agent");
            arg(decl.name(a.receiver), "recipient");
            arg(decl.name(a.object), "object");
          } else {
            arg(decl.name(a.agent), "agent");
            arg(decl.name(a.object), "object");
          }
        },
        actions[k]);
  }
  for (std::size_t k = 0; k + 1 < actions.size(); ++k) {
    g.edges.push_back({"action:" + std::to_string(k), "action:" + std::to_string(k + 1),
                       "temporal", ""});
  }
  return g;
}

std::vector<Action> actions_from_graph(const Declaration& decl, const ActionGraph& graph) {
  std::map<std::string, const ActionGraph::Node*> nodes;
  std::vector<std::string> action_ids;
  for (const auto& n : graph.nodes) {
    if (!nodes.emplace(n.id, &n).second) throw InvalidConfig("graph: duplicate node " + n.id);
    if (n.kind == "action") action_ids.push_back(n.id);
  }
  std::map<std::string, std::string> next, prev;
  std::map<std::string, std::map<std::string, std::string>> args;
  for (const auto& e : graph.edges) {
    if (!nodes.count(e.from) || !nodes.count(e.to)) {
      throw InvalidConfig("graph: edge references an unknown node");
    }
    if (e.type == "temporal") {
      if (!next.emplace(e.from, e.to).second || !prev.emplace(e.to, e.from).second) {
        throw InvalidConfig("graph: branching temporal edges at " + e.from);
      }
    } else if (e.type == "argument") {
      if (!args[e.from].emplace(e.role, nodes.at(e.to)->label).second) {
        throw InvalidConfig("graph: repeated role " + e.role + " on " + e.from);
      }
    } else {
      throw InvalidConfig("graph: unknown edge type " + e.type);
    }
  }
  std::vector<std::string> order;
  for (const auto& id : action_ids) {
    if (!prev.count(id)) order.push_back(id);
  }
  if (action_ids.empty()) return {};
  if (order.size() != 1) throw InvalidConfig("graph: temporal edges do not form a single chain");
  while (next.count(order.back())) order.push_back(next.at(order.back()));
  if (order.size() != action_ids.size()) {
    throw InvalidConfig("graph: temporal chain does not cover every action");
  }
  std::vector<Action> out;
  for (const auto& id : order) {
    const auto& verb = nodes.at(id)->label;
    const auto& roles = args[id];
    auto role = [&](const char* r) {
      auto it = roles.find(r);
      if (it == roles.end()) throw InvalidConfig("graph: " + id + " lacks a " + r + " argument");
      return it->second;
    };
    std::string line;
    if (verb == "move") {
      line = "move(" + role("agent") + ", " + role("location") + ")";
    } else if (verb == "comove") {
      line = "comove(" + role("agent") + ", " + role("co-agent") + ", " + role("location") + ")";
    } else if (verb == "give") {
      line = "give(" + role("agent") + ", " + role("recipient") + ", " + role("object") + ")";
    } else {
      line = verb + "(" + role("agent") + ", " + role("object") + ")";
    }
    out.push_back(parse_program_line(decl, line));
  }
  return out;
}

nlohmann::ordered_json action_graph_to_json(const ActionGraph& graph) {
  nlohmann::ordered_json j;
  auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : graph.nodes) nodes.push_back({{"id", n.id}, {"kind", n.kind}, {"label", n.label}});
  auto& edges = j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : graph.edges) {
    nlohmann::ordered_json edge = {{"from", e.from}, {"to", e.to}, {"type", e.type}};
    if (!e.role.empty()) edge["role"] = e.role;
    edges.push_back(std::move(edge));
  }
  return j;
}

ActionGraph action_graph_from_json(const nlohmann::json& doc) {
  ActionGraph g;
  try {
    for (const auto& n : doc.at("nodes")) {
      g.nodes.push_back({n.at("id").get<std::string>(), n.at("kind").get<std::string>(),
                         n.at("label").get<std::string>()});
    }
    for (const auto& e : doc.at("edges")) {
      g.edges.push_back({e.at("from").get<std::string>(), e.at("to").get<std::string>(),
                         e.at("type").get<std::string>(), e.value("role", std::string())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("graph: ") + e.what());
  }
  return g;
}

std::string program_text(const Declaration& decl, std::span<const Action> actions) {
  std::string out;
  for (const auto& a : actions) out += to_program_line(decl, a) + "\n";
  return out;
}

std::optional<ExportFormat> export_format_from_string(std::string_view name) {
  if (name == "trace-jsonl") return ExportFormat::TraceJsonl;
  if (name == "action-graph") return ExportFormat::ActionGraph;
  if (name == "program") return ExportFormat::Program;
  return std::nullopt;
}

Session::Session(std::string id, SessionConfig config)
    : id_(std::move(id)), config_(std::move(config)), state_(config_.initial) {}

std::string Session::observation(const WorldState& state) const {
  const auto& decl = config_.entities;
  const AgentId me = config_.agent;
  const LocationId here = state.agent_location[me.value];
  std::string out = "You are " + capitalized(decl.name(me)) + ". You are in the " +
                    decl.name(here) + ".";
  std::vector<std::string> seen, carried, others;
  for (int o = 0; o < decl.object_count(); ++o) {
    const ObjectId object{o};
    const auto carrier = state.carrier_of(object);
    if (carrier == me) {
      carried.push_back("the " + decl.name(object));
    } else if (!carrier && state.location_of(object) == here) {
      seen.push_back("the " + decl.name(object));
    }
  }
  for (int a = 0; a < decl.agent_count(); ++a) {
    if (a != me.value && state.agent_location[a] == here) {
      others.push_back(capitalized(decl.name(AgentId{a})));
    }
  }
  auto join = [](const std::vector<std::string>& items) {
    std::string s;
    for (std::size_t k = 0; k < items.size(); ++k) {
      if (k) s += (k + 1 == items.size()) ? " and " : ", ";
      s += items[k];
    }
    return s;
  };
  if (!seen.empty()) out += " You see " + join(seen) + ".";
  if (!others.empty()) out += " " + join(others) + (others.size() == 1 ? " is" : " are") + " here.";
  out += " You are carrying " + (carried.empty() ? std::string("nothing") : join(carried)) + ".";
  return out;
}

std::vector<std::string> Session::hints(const WorldState& state) const {
  std::vector<std::string> out;
  for (const auto& a : legal_actions(config_.entities, state)) {
    if (actor_of(a) != config_.agent) continue;
    out.push_back(command_text(a, *config_.lexicon, config_.entities));
    if (out.size() == 10) break;
  }
  return out;
}

CommandOutcome Session::execute(const std::string& text, std::optional<int> segment,
                                const std::function<void(const TraceStep&)>& persist) {
  std::lock_guard command_lock(command_mutex_);
  const auto& decl = config_.entities;
  CommandOutcome out;
  auto fail = [&](const char* kind, const std::string& message) {
    out.error_kind = kind;
    out.error = message;
    out.hints = hints(state_);
    out.observation = observation(state_);
    out.goal_reached = config_.goal && config_.goal->reached(state_);
    return out;
  };
  if (segment && (*segment < 0 || *segment >= static_cast<int>(config_.source_text.size()))) {
    return fail("InvalidSegment", "segment " + std::to_string(*segment) + " is out of range");
  }
  std::optional<Action> action;
  try {
    ParseContext context;
    context.actor = config_.agent;
    context.index = static_cast<int>(trace_.size());
    if (!trace_.empty()) context.coref = CorefContext::after({to_event(trace_.back().action), 0, false});
    if (text.find('(') != std::string::npos) {
      action = parse_program_line(decl, text);
    } else {
      auto parsed = parse_sentence(text, *config_.lexicon, decl, context);
      if (const auto* stmt = std::get_if<Statement>(&parsed.value)) action = to_action(stmt->event);
      if (!action) return fail("ParseError", "expected an action command in \"" + text + "\"");
    }
  } catch (const ParseError& e) {
    return fail("ParseError", e.what());
  } catch (const UnknownEntity& e) {
    return fail("UnknownEntity", e.what());
  } catch (const UnresolvedPronoun& e) {
    return fail("UnresolvedPronoun", e.what());
  }
  const Statement stmt{to_event(*action), static_cast<int>(trace_.size()), false};
  if (auto reason = violation(decl, state_, stmt.event)) {
    return fail("PreconditionViolation",
                PreconditionViolation(stmt.index, *reason).what());
  }
  const WorldState next = apply_statement(decl, state_, stmt);
  TraceStep step{stmt.index,
                 text,
                 *action,
                 state_digest(decl, state_),
                 state_digest(decl, next),
                 segment,
                 now_iso()};
  if (persist) persist(step);
  out.ok = true;
  out.step = step.index;
  out.delta = state_delta(decl, state_, next);
  out.goal_reached = config_.goal && config_.goal->reached(next);
  out.observation =
      render_with_template(stmt, *config_.lexicon, decl, 0, CorefContext::none()).text + " " +
      observation(next);
  {
    std::lock_guard snapshot_lock(snapshot_mutex_);
    state_ = next;
    trace_.push_back(step);
  }
  nlohmann::ordered_json message = {{"type", "step"},
                                    {"step", out.step},
                                    {"observation", out.observation},
                                    {"delta", out.delta},
                                    {"goal_reached", out.goal_reached},
                                    {"digest", step.post_digest}};
  std::lock_guard listener_lock(listener_mutex_);
  for (const auto& [token, listener] : listeners_) listener(message);
  return out;
}

void Session::restore(const TraceStep& step) {
  std::lock_guard command_lock(command_mutex_);
  const auto& decl = config_.entities;
  if (step.index != static_cast<int>(trace_.size())) {
    throw PreconditionViolation(step.index, "trace steps are not contiguous");
  }
  if (!step.pre_digest.empty() && step.pre_digest != state_digest(decl, state_)) {
    throw PreconditionViolation(step.index, "recorded pre-state digest does not match");
  }
  const WorldState next = apply_statement(decl, state_, {to_event(step.action), step.index, false});
  if (!step.post_digest.empty() && step.post_digest != state_digest(decl, next)) {
    throw PreconditionViolation(step.index, "recorded post-state digest does not match");
  }
  std::lock_guard snapshot_lock(snapshot_mutex_);
  state_ = next;
  trace_.push_back(step);
}

Session::Snapshot Session::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return {state_, trace_, config_.goal && config_.goal->reached(state_)};
}

nlohmann::ordered_json Session::state_json() const {
  const auto snap = snapshot();
  const auto& decl = config_.entities;
  nlohmann::ordered_json j;
  j["id"] = id_;
  j["agent"] = decl.name(config_.agent);
  j["steps"] = snap.trace.size();
  j["digest"] = state_digest(decl, snap.state);
  j["state"] = state_to_json(decl, snap.state);
  j["observation"] = observation(snap.state);
  j["goal"] = config_.goal ? goal_to_json(decl, *config_.goal) : nlohmann::ordered_json();
  j["goal_reached"] = snap.goal_reached;
  j["source_text"] = config_.source_text;
  std::vector<int> covered;
  for (const auto& s : snap.trace) {
    if (s.segment) covered.push_back(*s.segment);
  }
  std::sort(covered.begin(), covered.end());
  covered.erase(std::unique(covered.begin(), covered.end()), covered.end());
  j["covered_segments"] = covered;
  j["entities"] = declaration_to_json(decl);
  return j;
}

nlohmann::ordered_json Session::legal_json() const {
  const auto snap = snapshot();
  const auto& decl = config_.entities;
  nlohmann::ordered_json actions = nlohmann::ordered_json::array();
  for (const auto& a : legal_actions(decl, snap.state)) {
    nlohmann::ordered_json entry = {{"program", to_program_line(decl, a)},
                                    {"agent", decl.name(actor_of(a))}};
    if (actor_of(a) == config_.agent) {
      entry["command"] = command_text(a, *config_.lexicon, decl);
    }
    actions.push_back(std::move(entry));
  }
  return {{"id", id_}, {"actions", actions}};
}

std::string Session::export_trace(ExportFormat format) const {
  const auto snap = snapshot();
  const auto& decl = config_.entities;
  std::vector<Action> actions;
  for (const auto& s : snap.trace) actions.push_back(s.action);
  switch (format) {
    case ExportFormat::TraceJsonl: {
      std::string out;
      for (const auto& s : snap.trace) out += trace_step_to_json(decl, s).dump() + "\n";
      return out;
    }
    case ExportFormat::ActionGraph:
      return action_graph_to_json(build_action_graph(decl, actions)).dump(2) + "\n";
    case ExportFormat::Program:
      return program_text(decl, actions);
  }
  return {};
}

int Session::subscribe(Listener listener) {
  std::lock_guard lock(listener_mutex_);
  listeners_.emplace(next_listener_, std::move(listener));
  return next_listener_++;
}

void Session::unsubscribe(int token) {
  std::lock_guard lock(listener_mutex_);
  listeners_.erase(token);
}

SessionManager::SessionManager(std::optional<std::filesystem::path> data_dir)
    : data_dir_(std::move(data_dir)) {
  std::random_device rd;
  salt_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^
          static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
  if (!data_dir_) return;
  std::filesystem::create_directories(*data_dir_);
  std::vector<std::filesystem::path> logs;
  for (const auto& entry : std::filesystem::directory_iterator(*data_dir_)) {
    if (entry.path().extension() == ".jsonl") logs.push_back(entry.path());
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& path : logs) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) lines.push_back(line);
    }
    std::shared_ptr<Session> session;
    for (std::size_t k = 0; k < lines.size(); ++k) {
      nlohmann::json record;
      try {
        record = nlohmann::json::parse(lines[k]);
      } catch (const nlohmann::json::exception&) {
        if (k + 1 == lines.size()) break;  // torn final write
        throw InvalidConfig(path.string() + ": corrupt record on line " + std::to_string(k + 1));
      }
      const auto type = record.value("type", std::string());
      if (type == "create") {
        session = std::make_shared<Session>(record.at("id").get<std::string>(),
                                            SessionConfig::from_json(record.at("config")));
      } else if (type == "step" && session) {
        session->restore(trace_step_from_json(session->config().entities, record));
      } else {
        throw InvalidConfig(path.string() + ": unexpected record on line " + std::to_string(k + 1));
      }
    }
    if (session) {
      sessions_.emplace(session->id(), session);
      ++recovered_;
    }
  }
}

std::string SessionManager::fresh_id() {
  for (;;) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "s%016llx",
                  static_cast<unsigned long long>(derive_seed(salt_, counter_++)));
    if (!sessions_.count(buf)) return buf;
  }
}

void SessionManager::append(const std::string& id, const nlohmann::ordered_json& record) const {
  if (!data_dir_) return;
  std::ofstream out(*data_dir_ / (id + ".jsonl"), std::ios::app);
  out << record.dump() << '\n';
  out.flush();
  if (!out) throw Error("cannot write session log for " + id);
}

std::string SessionManager::create(const nlohmann::json& config) {
  auto parsed = SessionConfig::from_json(config);
  std::unique_lock lock(mutex_);
  const auto id = fresh_id();
  append(id, {{"type", "create"}, {"id", id}, {"created", now_iso()}, {"config", parsed.raw}});
  sessions_.emplace(id, std::make_shared<Session>(id, std::move(parsed)));
  return id;
}

std::shared_ptr<Session> SessionManager::get(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw SessionNotFound(id);
  return it->second;
}

CommandOutcome SessionManager::execute(const std::string& id, const std::string& text,
                                       std::optional<int> segment) {
  auto session = get(id);
  return session->execute(text, segment, [&](const TraceStep& step) {
    nlohmann::ordered_json record = {{"type", "step"}};
    record.update(trace_step_to_json(session->config().entities, step));
    append(id, record);
  });
}

std::vector<std::string> SessionManager::ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

}  // namespace mw
