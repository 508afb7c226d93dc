#include "microworld/env.hpp"

#include <algorithm>

#include "microworld/errors.hpp"

namespace mw {

namespace {

std::string field(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_string()) {
    throw InvalidConfig(std::string("goal.") + key + ": expected a name");
  }
  return doc.at(key).get<std::string>();
}

void collect(const Declaration& decl, const nlohmann::json& doc, std::vector<Proposition>& out) {
  if (!doc.is_object()) throw InvalidConfig("goal: expected an object");
  const auto type = field(doc, "type");
  auto agent = [&] {
    auto name = field(doc, "agent");
    if (auto a = decl.find_agent(name)) return *a;
    throw InvalidConfig("goal.agent: unknown agent " + name);
  };
  auto location = [&] {
    auto name = field(doc, "location");
    if (auto l = decl.find_location(name)) return *l;
    throw InvalidConfig("goal.location: unknown location " + name);
  };
  auto object = [&] {
    auto name = field(doc, "object");
    if (auto o = decl.find_object(name)) return *o;
    throw InvalidConfig("goal.object: unknown object " + name);
  };
  if (type == "at") {
    out.push_back(At{agent(), location()});
  } else if (type == "holds") {
    out.push_back(Holds{agent(), object()});
  } else if (type == "obj_at") {
    out.push_back(ObjAt{object(), location()});
  } else if (type == "all") {
    if (!doc.contains("of") || !doc.at("of").is_array()) {
      throw InvalidConfig("goal.of: expected a list of goals");
    }
    for (const auto& g : doc.at("of")) collect(decl, g, out);
  } else {
    throw InvalidConfig("goal.type: unknown goal type " + type);
  }
}

}  // namespace

bool Goal::reached(const WorldState& state) const {
  return !all.empty() &&
         std::all_of(all.begin(), all.end(), [&](const Proposition& p) { return holds(state, p); });
}

Goal goal_from_json(const Declaration& decl, const nlohmann::json& doc) {
  Goal goal;
  collect(decl, doc, goal.all);
  return goal;
}

nlohmann::ordered_json goal_to_json(const Declaration& decl, const Goal& goal) {
  auto one = [&](const Proposition& p) -> nlohmann::ordered_json {
    if (const auto* at = std::get_if<At>(&p)) {
      return {{"type", "at"}, {"agent", decl.name(at->agent)}, {"location", decl.name(at->location)}};
    }
    if (const auto* h = std::get_if<Holds>(&p)) {
      return {{"type", "holds"}, {"agent", decl.name(h->agent)}, {"object", decl.name(h->object)}};
    }
    const auto& o = std::get<ObjAt>(p);
    return {{"type", "obj_at"}, {"object", decl.name(o.object)}, {"location", decl.name(o.location)}};
  };
  if (goal.all.size() == 1) return one(goal.all.front());
  nlohmann::ordered_json j = {{"type", "all"}, {"of", nlohmann::ordered_json::array()}};
  for (const auto& p : goal.all) j["of"].push_back(one(p));
  return j;
}

Environment::Environment(Declaration decl, WorldState initial, std::optional<Goal> goal,
                         const Lexicon& lex)
    : decl_(std::move(decl)),
      initial_(std::move(initial)),
      state_(initial_),
      goal_(std::move(goal)),
      lex_(&lex) {
  validate_state(decl_, initial_);
}

void Environment::reset() {
  state_ = initial_;
  steps_ = 0;
}

Environment::StepResult Environment::step(const Action& action) {
  const Statement stmt{to_event(action), steps_, false};
  state_ = apply_statement(decl_, state_, stmt);
  StepResult out;
  out.observation = render_with_template(stmt, *lex_, decl_, 0, CorefContext::none()).text;
  ++steps_;
  out.reward = reward();
  out.done = out.reward == 1;
  return out;
}

Action RandomPolicy::choose(std::span<const std::string>, std::span<const Action> legal) {
  if (legal.empty()) throw PolicyReturnedIllegalAction("no legal action is available");
  return legal[rng_.below(legal.size())];
}

Action ScriptedPolicy::choose(std::span<const std::string>, std::span<const Action>) {
  if (actions_.empty()) throw PolicyReturnedIllegalAction("the script is empty");
  const auto& a = actions_[std::min(next_, actions_.size() - 1)];
  ++next_;
  return a;
}

Episode run_policy(Environment& env, Policy& policy, int max_steps) {
  if (max_steps < 1) throw InvalidConfig("max_steps must be at least 1");
  env.reset();
  Episode episode;
  episode.reached_goal = env.reward() == 1;
  while (!episode.reached_goal && static_cast<int>(episode.actions.size()) < max_steps) {
    const auto legal = env.legal();
    const Action action = policy.choose(episode.observations, legal);
    if (std::find(legal.begin(), legal.end(), action) == legal.end()) {
      throw PolicyReturnedIllegalAction("policy chose " +
                                        to_program_line(env.declaration(), action) +
                                        ", which is not legal at step " +
                                        std::to_string(episode.actions.size()));
    }
    const auto result = env.step(action);
    episode.actions.push_back(action);
    episode.observations.push_back(result.observation);
    episode.rewards.push_back(result.reward);
    episode.reached_goal = result.done;
  }
  return episode;
}

}  // namespace mw
