#pragma once

// Environment loop: transition, rendered observations, 0/1 goal reward and
// the policies that drive it.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "microworld/language.hpp"
#include "microworld/rng.hpp"
#include "microworld/world.hpp"

namespace mw {

// Conjunction of propositions; an empty goal is never reached.
struct Goal {
  std::vector<Proposition> all;

  bool reached(const WorldState& state) const;
};

// {"type": "at", "agent", "location"} | {"type": "holds", "agent", "object"} |
// {"type": "obj_at", "object", "location"} | {"type": "all", "of": [...]}
Goal goal_from_json(const Declaration& decl, const nlohmann::json& doc);
nlohmann::ordered_json goal_to_json(const Declaration& decl, const Goal& goal);

class Environment {
 public:
  Environment(Declaration decl, WorldState initial, std::optional<Goal> goal = std::nullopt,
              const Lexicon& lex = Lexicon::default_english());

  struct StepResult {
    std::string observation;
    int reward = 0;
    bool done = false;
  };

  void reset();
  // Throws PreconditionViolation; the state is unchanged on error.
  StepResult step(const Action& action);

  const Declaration& declaration() const { return decl_; }
  const WorldState& state() const { return state_; }
  const WorldState& initial_state() const { return initial_; }
  const std::optional<Goal>& goal() const { return goal_; }
  int steps_taken() const { return steps_; }
  int reward() const { return goal_ && goal_->reached(state_) ? 1 : 0; }
  std::vector<Action> legal() const { return legal_actions(decl_, state_); }

 private:
  Declaration decl_;
  WorldState initial_;
  WorldState state_;
  std::optional<Goal> goal_;
  const Lexicon* lex_;
  int steps_ = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action choose(std::span<const std::string> observations,
                        std::span<const Action> legal) = 0;
};

class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
  Action choose(std::span<const std::string> observations, std::span<const Action> legal) override;

 private:
  Rng rng_;
};

// Plays a fixed action list in order, legal or not; repeats the last action
// once the list runs out.
class ScriptedPolicy : public Policy {
 public:
  explicit ScriptedPolicy(std::vector<Action> actions) : actions_(std::move(actions)) {}
  Action choose(std::span<const std::string> observations, std::span<const Action> legal) override;

 private:
  std::vector<Action> actions_;
  std::size_t next_ = 0;
};

struct Episode {
  std::vector<std::string> observations;
  std::vector<Action> actions;
  std::vector<int> rewards;
  bool reached_goal = false;
};

// Resets `env`, then steps until the goal holds or max_steps actions were
// taken. Throws PolicyReturnedIllegalAction.
Episode run_policy(Environment& env, Policy& policy, int max_steps);

}  // namespace mw
