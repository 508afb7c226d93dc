#include "microworld/taskgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "microworld/digest.hpp"
#include "microworld/errors.hpp"
#include "microworld/parallel.hpp"
#include "microworld/rng.hpp"

namespace mw {

namespace {

const std::array<Agent, PoolLimits::kAgents> kAgentPool = {{{"mary", "she"},
                                                            {"john", "he"},
                                                            {"sandra", "she"},
                                                            {"daniel", "he"},
                                                            {"julie", "she"},
                                                            {"fred", "he"},
                                                            {"emily", "she"},
                                                            {"bill", "he"}}};
const std::array<const char*, PoolLimits::kLocations> kLocationPool = {
    "kitchen", "garden", "office",  "bathroom", "hallway", "bedroom",
    "cinema",  "park",   "school",  "library",  "cellar",  "attic"};
const std::array<const char*, PoolLimits::kObjects> kObjectPool = {
    "apple", "football", "milk", "book", "key", "cup", "pen", "hat"};

constexpr int kMaxAttempts = 100;
constexpr int kMaxQuestionTries = 100;

std::string story_id(const std::string& prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "-%06zu", i);
  return prefix + buf;
}

std::set<std::pair<std::string, std::string>> tag_pairs(const std::set<std::string>& tags) {
  std::set<std::pair<std::string, std::string>> out;
  for (auto i = tags.begin(); i != tags.end(); ++i) {
    for (auto j = std::next(i); j != tags.end(); ++j) out.emplace(*i, *j);
  }
  return out;
}

// One attempt at a story; returns nothing when this attempt's random
// choices hit a dead end.
class StoryBuilder {
 public:
  StoryBuilder(const TaskSpec& spec, const Lexicon& lex, std::uint64_t seed)
      : spec_(spec), lex_(lex), rng_(seed) {}

  std::optional<Story> build(std::string& why) {
    choose_entities();
    if (!generate_statements(why)) return std::nullopt;
    if (!place_questions(why)) return std::nullopt;
    render_sentences();
    return std::move(story_);
  }

 private:
  void choose_entities() {
    std::vector<int> a(kAgentPool.size()), l(kLocationPool.size()), o(kObjectPool.size());
    std::iota(a.begin(), a.end(), 0);
    std::iota(l.begin(), l.end(), 0);
    std::iota(o.begin(), o.end(), 0);
    rng_.shuffle(std::span<int>(a));
    rng_.shuffle(std::span<int>(l));
    rng_.shuffle(std::span<int>(o));
    std::vector<Agent> agents;
    std::vector<std::string> locations, objects;
    for (int i = 0; i < spec_.agents; ++i) agents.push_back(kAgentPool[a[i]]);
    for (int i = 0; i < spec_.locations; ++i) locations.emplace_back(kLocationPool[l[i]]);
    for (int i = 0; i < spec_.objects; ++i) objects.emplace_back(kObjectPool[o[i]]);
    story_.entities = Declaration(std::move(agents), std::move(locations), std::move(objects));

    // The trailing agents/objects form a distractor group that never
    // interacts with the focus group.
    agent_group_.assign(spec_.agents, 0);
    object_group_.assign(spec_.objects, 0);
    if (spec_.distractor_rate > 0.0 && spec_.agents >= 2) {
      const int da = std::clamp(static_cast<int>(std::lround(spec_.agents * spec_.distractor_rate)),
                                1, spec_.agents - 1);
      const int dobj =
          spec_.objects >= 2
              ? std::clamp(static_cast<int>(std::lround(spec_.objects * spec_.distractor_rate)), 0,
                           spec_.objects - 1)
              : 0;
      for (int i = spec_.agents - da; i < spec_.agents; ++i) agent_group_[i] = 1;
      for (int i = spec_.objects - dobj; i < spec_.objects; ++i) object_group_[i] = 1;
      has_distractors_ = true;
    }

    state_ = make_uniform_state(story_.entities);
    for (auto& loc : state_.agent_location) loc = LocationId{static_cast<int>(rng_.below(spec_.locations))};
    for (auto& place : state_.object_place) {
      place = LocationId{static_cast<int>(rng_.below(spec_.locations))};
    }
  }

  std::vector<Event> candidates(StatementKind kind, int group) const {
    const auto& decl = story_.entities;
    std::vector<Event> out;
    auto agent_ok = [&](int a) { return agent_group_[a] == group; };
    auto object_ok = [&](int o) { return object_group_[o] == group; };
    const int agents = decl.agent_count();
    const int locations = decl.location_count();
    const int objects = decl.object_count();
    switch (kind) {
      case StatementKind::Move:
        for (int a = 0; a < agents; ++a) {
          if (!agent_ok(a)) continue;
          for (int l = 0; l < locations; ++l) {
            if (state_.agent_location[a].value != l) out.push_back(Move{AgentId{a}, LocationId{l}});
          }
        }
        break;
      case StatementKind::CoMove:
        for (int a = 0; a < agents; ++a) {
          for (int b = 0; b < agents; ++b) {
            if (a == b || !agent_ok(a) || !agent_ok(b)) continue;
            for (int l = 0; l < locations; ++l) {
              if (state_.agent_location[a].value != l && state_.agent_location[b].value != l) {
                out.push_back(CoMove{AgentId{a}, AgentId{b}, LocationId{l}});
              }
            }
          }
        }
        break;
      case StatementKind::Grab:
        for (int o = 0; o < objects; ++o) {
          if (!object_ok(o) || state_.carrier_of(ObjectId{o})) continue;
          for (int a = 0; a < agents; ++a) {
            if (agent_ok(a) && state_.agent_location[a] == state_.location_of(ObjectId{o})) {
              out.push_back(Grab{AgentId{a}, ObjectId{o}});
            }
          }
        }
        break;
      case StatementKind::Drop:
        for (int o = 0; o < objects; ++o) {
          if (auto c = state_.carrier_of(ObjectId{o}); c && object_ok(o)) {
            out.push_back(Drop{*c, ObjectId{o}});
          }
        }
        break;
      case StatementKind::Give:
        for (int o = 0; o < objects; ++o) {
          auto c = state_.carrier_of(ObjectId{o});
          if (!c || !object_ok(o)) continue;
          for (int b = 0; b < agents; ++b) {
            if (b != c->value && agent_ok(b) &&
                state_.agent_location[b] == state_.agent_location[c->value]) {
              out.push_back(Give{*c, AgentId{b}, ObjectId{o}});
            }
          }
        }
        break;
      case StatementKind::LocationFact:
        for (int a = 0; a < agents; ++a) {
          if (agent_ok(a)) out.push_back(LocationFact{AgentId{a}, state_.agent_location[a]});
        }
        break;
      case StatementKind::Negation:
        // Only right after a move away from the negated location.
        for (const auto& [agent, from] : moved_from_) {
          if (agent_ok(agent.value)) out.push_back(Negation{agent, from});
        }
        break;
    }
    return out;
  }

  bool generate_statements(std::string& why) {
    const auto& decl = story_.entities;
    story_.trajectory.push_back(state_);
    std::vector<StatementKind> kinds(spec_.statements.begin(), spec_.statements.end());
    for (int step = 0; step < spec_.story_length; ++step) {
      int group = (has_distractors_ && rng_.chance(spec_.distractor_rate)) ? 1 : 0;
      std::optional<Event> chosen;
      for (int g : {group, 1 - group}) {
        if (g == 1 && !has_distractors_) continue;
        std::vector<StatementKind> order = kinds;
        rng_.shuffle(std::span<StatementKind>(order));
        for (auto kind : order) {
          auto options = candidates(kind, g);
          if (!options.empty()) {
            chosen = options[rng_.below(options.size())];
            break;
          }
        }
        if (chosen) break;
      }
      if (!chosen) {
        why = "no allowed statement is possible after " + std::to_string(step) + " statements";
        return false;
      }
      Statement stmt{*chosen, step, false};
      const auto subject = single_subject(stmt.event);
      if (!story_.statements.empty() && subject &&
          single_subject(story_.statements.back().event) == subject &&
          !lex_.pronoun_for(decl, *subject).empty()) {
        stmt.coref = rng_.chance(spec_.coref_rate);
      }
      moved_from_.clear();
      if (const auto* m = std::get_if<Move>(&stmt.event)) {
        moved_from_.emplace_back(m->agent, state_.agent_location[m->agent.value]);
      } else if (const auto* c = std::get_if<CoMove>(&stmt.event)) {
        moved_from_.emplace_back(c->first, state_.agent_location[c->first.value]);
        moved_from_.emplace_back(c->second, state_.agent_location[c->second.value]);
      }
      try_apply(decl, state_, stmt.event);
      story_.statements.push_back(stmt);
      story_.trajectory.push_back(state_);
    }
    return true;
  }

  bool place_questions(std::string& why) {
    const auto& decl = story_.entities;
    const auto n = story_.statements.size();
    std::vector<BeliefState> snapshots;
    snapshots.reserve(n);
    BeliefState belief(decl);
    for (const auto& s : story_.statements) {
      belief.apply(decl, s);
      snapshots.push_back(belief);
    }
    std::vector<int> focus_agents, focus_objects;
    for (int a = 0; a < decl.agent_count(); ++a) {
      if (agent_group_[a] == 0) focus_agents.push_back(a);
    }
    for (int o = 0; o < decl.object_count(); ++o) {
      if (object_group_[o] == 0) focus_objects.push_back(o);
    }
    std::vector<QuestionType> types(spec_.questions.begin(), spec_.questions.end());
    std::vector<bool> used(n, false);
    for (int q = 0; q < spec_.questions_per_story; ++q) {
      bool placed = false;
      for (int attempt = 0; attempt < kMaxQuestionTries && !placed; ++attempt) {
        const int position = static_cast<int>(rng_.below(n));
        if (used[position]) continue;
        const auto type = types[rng_.below(types.size())];
        QuestionQuery query;
        query.type = type;
        if (type == QuestionType::WhereObject) {
          if (focus_objects.empty()) continue;
          query.object = ObjectId{focus_objects[rng_.below(focus_objects.size())]};
        } else {
          query.agent = AgentId{focus_agents[rng_.below(focus_agents.size())]};
        }
        if (type == QuestionType::YesNo) {
          const auto truth = story_.trajectory[position + 1].agent_location[query.agent.value];
          query.location = rng_.chance(0.5)
                               ? truth
                               : LocationId{static_cast<int>(rng_.below(decl.location_count()))};
        }
        auto answer = answer_from_belief(decl, std::span(story_.statements).first(position + 1),
                                         snapshots[position], query);
        if (!answer || answer->text == "maybe") continue;
        used[position] = true;
        story_.questions.push_back(
            {query, position, std::move(answer->text), std::move(answer->supporting), {}});
        placed = true;
      }
      if (!placed) {
        why = "no answerable question found";
        return false;
      }
    }
    std::stable_sort(story_.questions.begin(), story_.questions.end(),
                     [](const Question& x, const Question& y) { return x.position < y.position; });
    return true;
  }

  void render_sentences() {
    const auto& decl = story_.entities;
    CorefContext context;
    for (const auto& s : story_.statements) {
      story_.sentences.push_back(render(s, lex_, decl, rng_.next(), context));
      context = CorefContext::after(s);
    }
    for (auto& q : story_.questions) q.text = render_question(q.query, lex_, decl).text;
  }

  const TaskSpec& spec_;
  const Lexicon& lex_;
  Rng rng_;
  Story story_;
  WorldState state_;
  std::vector<int> agent_group_;
  std::vector<int> object_group_;
  bool has_distractors_ = false;
  std::vector<std::pair<AgentId, LocationId>> moved_from_;
};

}  // namespace

void TaskSpec::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) {
    throw InvalidConfig(field + ": " + msg);
  };
  auto range = [&](const char* field, int value, int lo, int hi) {
    if (value < lo || value > hi) {
      fail(field, "must be between " + std::to_string(lo) + " and " + std::to_string(hi) +
                      " (got " + std::to_string(value) + ")");
    }
  };
  range("agents", agents, 1, PoolLimits::kAgents);
  range("objects", objects, 1, PoolLimits::kObjects);
  range("locations", locations, 1, PoolLimits::kLocations);
  range("story_length", story_length, 1, 100000);
  range("questions_per_story", questions_per_story, 0, story_length);
  if (statements.empty()) fail("statements", "must not be empty");
  if (questions.empty()) fail("questions", "must not be empty");
  if (!(distractor_rate >= 0.0 && distractor_rate <= 1.0)) fail("distractor_rate", "must be in [0, 1]");
  if (!(coref_rate >= 0.0 && coref_rate <= 1.0)) fail("coref_rate", "must be in [0, 1]");
}

std::set<std::string> TaskSpec::tags() const {
  std::set<std::string> out;
  for (auto k : statements) out.emplace(to_string(k));
  for (auto q : questions) out.emplace(to_string(q));
  return out;
}

nlohmann::ordered_json TaskSpec::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["agents"] = agents;
  j["objects"] = objects;
  j["locations"] = locations;
  j["story_length"] = story_length;
  auto& st = j["statements"] = nlohmann::ordered_json::array();
  for (auto k : statements) st.push_back(std::string(to_string(k)));
  auto& qs = j["questions"] = nlohmann::ordered_json::array();
  for (auto q : questions) qs.push_back(std::string(to_string(q)));
  j["questions_per_story"] = questions_per_story;
  j["distractor_rate"] = distractor_rate;
  j["coref_rate"] = coref_rate;
  if (seed) j["seed"] = *seed;
  return j;
}

std::string TaskSpec::fingerprint() const {
  auto j = to_json();
  j.erase("name");
  return sha256_hex(j.dump()).substr(0, 16);
}

TaskSpec TaskSpec::from_json(const nlohmann::json& doc, const std::string& where) {
  if (!doc.is_object()) throw InvalidConfig(where + ": expected an object");
  static const std::set<std::string> kKnown = {
      "name",      "agents",    "objects",   "locations",           "story_length",
      "statements", "questions", "questions_per_story", "distractor_rate", "coref_rate",
      "seed"};
  for (const auto& [key, value] : doc.items()) {
    if (!kKnown.count(key)) throw InvalidConfig(where + "." + key + ": unknown field");
  }
  TaskSpec spec;
  auto field = [&](const char* key) { return where + "." + key; };
  auto get_int = [&](const char* key, int& out) {
    if (!doc.contains(key)) return;
    if (!doc.at(key).is_number_integer()) throw InvalidConfig(field(key) + ": expected an integer");
    out = doc.at(key).get<int>();
  };
  auto get_rate = [&](const char* key, double& out) {
    if (!doc.contains(key)) return;
    if (!doc.at(key).is_number()) throw InvalidConfig(field(key) + ": expected a number");
    out = doc.at(key).get<double>();
  };
  if (doc.contains("name")) {
    if (!doc.at("name").is_string()) throw InvalidConfig(field("name") + ": expected a string");
    spec.name = doc.at("name").get<std::string>();
  }
  get_int("agents", spec.agents);
  get_int("objects", spec.objects);
  get_int("locations", spec.locations);
  get_int("story_length", spec.story_length);
  get_int("questions_per_story", spec.questions_per_story);
  get_rate("distractor_rate", spec.distractor_rate);
  get_rate("coref_rate", spec.coref_rate);
  if (doc.contains("statements")) {
    const auto& list = doc.at("statements");
    if (!list.is_array()) throw InvalidConfig(field("statements") + ": expected a list");
    spec.statements.clear();
    for (const auto& v : list) {
      auto kind = v.is_string() ? statement_kind_from_string(v.get<std::string>()) : std::nullopt;
      if (!kind) throw InvalidConfig(field("statements") + ": unknown statement variant " + v.dump());
      spec.statements.insert(*kind);
    }
  }
  if (doc.contains("questions")) {
    const auto& list = doc.at("questions");
    if (!list.is_array()) throw InvalidConfig(field("questions") + ": expected a list");
    spec.questions.clear();
    for (const auto& v : list) {
      auto type = v.is_string() ? question_type_from_string(v.get<std::string>()) : std::nullopt;
      if (!type) throw InvalidConfig(field("questions") + ": unknown question type " + v.dump());
      spec.questions.insert(*type);
    }
  }
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned()) {
      throw InvalidConfig(field("seed") + ": expected a non-negative integer");
    }
    spec.seed = doc.at("seed").get<std::uint64_t>();
  }
  try {
    spec.validate();
  } catch (const InvalidConfig& e) {
    throw InvalidConfig(where + "." + e.what());
  }
  return spec;
}

Signature signature(const Story& story) {
  Signature sig;
  for (const auto& s : story.statements) sig.emplace(to_string(kind_of(s.event)));
  for (const auto& q : story.questions) sig.emplace(to_string(q.query.type));
  return sig;
}

std::vector<int> close_support(std::span<const Statement> statements, std::vector<int> base) {
  std::vector<bool> in(statements.size(), false);
  for (int i : base) in.at(i) = true;
  auto carry_object = [](const Event& e) -> std::optional<ObjectId> { return object_of(e); };
  auto movers = [](const Event& e) -> std::vector<AgentId> {
    if (const auto* m = std::get_if<Move>(&e)) return {m->agent};
    if (const auto* c = std::get_if<CoMove>(&e)) return {c->first, c->second};
    return {};
  };
  bool changed = true;
  while (changed) {
    changed = false;
    std::map<int, std::pair<int, int>> agent_span, object_span;  // first, last mention
    for (std::size_t k = 0; k < statements.size(); ++k) {
      if (!in[k]) continue;
      const int i = static_cast<int>(k);
      for (auto a : agents_of(statements[k].event)) {
        auto [it, fresh] = agent_span.try_emplace(a.value, i, i);
        if (!fresh) it->second.second = i;
      }
      if (auto o = carry_object(statements[k].event)) {
        auto [it, fresh] = object_span.try_emplace(o->value, i, i);
        if (!fresh) it->second.second = i;
      }
    }
    auto add = [&](std::size_t k) {
      if (!in[k]) {
        in[k] = true;
        changed = true;
      }
    };
    for (std::size_t k = 0; k < statements.size(); ++k) {
      if (in[k]) continue;
      const int i = static_cast<int>(k);
      for (auto a : movers(statements[k].event)) {
        auto it = agent_span.find(a.value);
        if (it != agent_span.end() && it->second.first < i && i < it->second.second) add(k);
      }
      if (auto o = carry_object(statements[k].event)) {
        auto it = object_span.find(o->value);
        if (it != object_span.end() && it->second.first < i && i < it->second.second) add(k);
      }
    }
    // An object first mentioned while already carried needs the statement
    // that put it in hand.
    for (const auto& [object, span] : object_span) {
      const auto& first = statements[span.first].event;
      if (std::holds_alternative<Grab>(first)) continue;
      for (int k = span.first - 1; k >= 0; --k) {
        auto o = carry_object(statements[k].event);
        if (o && o->value == object) {
          add(static_cast<std::size_t>(k));
          break;
        }
      }
    }
  }
  std::vector<int> out;
  for (std::size_t k = 0; k < statements.size(); ++k) {
    if (in[k]) out.push_back(static_cast<int>(k));
  }
  return out;
}

std::optional<Answer> answer_from_belief(const Declaration& decl,
                                         std::span<const Statement> statements,
                                         const BeliefState& belief, const QuestionQuery& query) {
  Answer answer;
  std::vector<int> base;
  switch (query.type) {
    case QuestionType::WhereAgent: {
      auto l = belief.possible_locations(query.agent).only();
      if (!l) return std::nullopt;
      answer.text = decl.name(*l);
      base = belief.provenance(query.agent);
      break;
    }
    case QuestionType::WhereObject: {
      auto l = belief.possible_locations(query.object).only();
      if (!l) return std::nullopt;
      answer.text = decl.name(*l);
      base = belief.provenance(query.object);
      break;
    }
    case QuestionType::Counting:
    case QuestionType::List: {
      std::vector<std::pair<int, ObjectId>> carried;  // acquisition index, object
      for (int o = 0; o < decl.object_count(); ++o) {
        const ObjectId object{o};
        if (belief.carrier(object) != query.agent) continue;
        const auto& prov = belief.carry_provenance(object);
        carried.emplace_back(prov.empty() ? -1 : prov.back(), object);
        base = merge_indices(base, prov);
      }
      std::sort(carried.begin(), carried.end());
      if (query.type == QuestionType::Counting) {
        answer.text = std::to_string(carried.size());
      } else if (carried.empty()) {
        answer.text = "nothing";
      } else {
        for (const auto& [when, object] : carried) {
          answer.text += (answer.text.empty() ? "" : ",") + decl.name(object);
        }
      }
      break;
    }
    case QuestionType::YesNo: {
      const Proposition prop = At{query.agent, query.location};
      switch (belief.label(prop)) {
        case Label::True:
          answer.text = "yes";
          break;
        case Label::False:
          answer.text = "no";
          break;
        case Label::Unknown:
          answer.text = "maybe";
          break;
      }
      base = belief.label_provenance(prop);
      break;
    }
  }
  answer.supporting = close_support(statements, std::move(base));
  return answer;
}

Answer answer_at(const Declaration& decl, std::span<const Statement> statements,
                 int prefix_length, const QuestionQuery& query) {
  if (prefix_length < 0 || prefix_length > static_cast<int>(statements.size())) {
    throw Unanswerable("question position lies outside the story");
  }
  const auto prefix = statements.first(prefix_length);
  BeliefState belief(decl);
  for (const auto& s : prefix) belief.apply(decl, s);
  auto answer = answer_from_belief(decl, prefix, belief, query);
  if (!answer) throw Unanswerable("the story does not determine a unique answer");
  return *answer;
}

Answer answer_question(const Story& story, const Question& question) {
  return answer_at(story.entities, story.statements, question.position + 1, question.query);
}

Story sample_story(const TaskSpec& spec, std::uint64_t seed, const Lexicon& lex) {
  spec.validate();
  const bool carrying_questions = spec.questions.count(QuestionType::Counting) ||
                                  spec.questions.count(QuestionType::List) ||
                                  spec.questions.count(QuestionType::WhereObject);
  if (carrying_questions && !spec.statements.count(StatementKind::Grab)) {
    throw GenerationExhausted(0, "object questions need Grab statements to be allowed");
  }
  std::string why;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    StoryBuilder builder(spec, lex, derive_seed(seed, attempt));
    if (auto story = builder.build(why)) {
      story->spec_fingerprint = spec.fingerprint();
      return std::move(*story);
    }
  }
  throw GenerationExhausted(kMaxAttempts, why);
}

std::vector<Story> sample_stories(const TaskSpec& spec, std::size_t n, std::uint64_t seed,
                                  const std::string& id_prefix, unsigned threads,
                                  const Lexicon& lex) {
  spec.validate();
  return parallel_map(n, threads, [&](std::size_t i) {
    Story s = sample_story(spec, derive_seed(seed, i), lex);
    s.id = story_id(id_prefix, i);
    return s;
  });
}

std::vector<int> distractor_statements(const Story& story) {
  const auto& decl = story.entities;
  std::vector<bool> agent_in(decl.agent_count(), false), object_in(decl.object_count(), false);
  auto mark_statement = [&](const Statement& s) {
    bool changed = false;
    for (auto a : agents_of(s.event)) {
      changed |= !agent_in[a.value];
      agent_in[a.value] = true;
    }
    if (auto o = object_of(s.event)) {
      changed |= !object_in[o->value];
      object_in[o->value] = true;
    }
    return changed;
  };
  auto touches = [&](const Statement& s) {
    for (auto a : agents_of(s.event)) {
      if (agent_in[a.value]) return true;
    }
    auto o = object_of(s.event);
    return o && object_in[o->value];
  };
  for (const auto& q : story.questions) {
    if (q.query.type == QuestionType::WhereObject) {
      object_in[q.query.object.value] = true;
    } else {
      agent_in[q.query.agent.value] = true;
    }
    for (int i : q.supporting) mark_statement(story.statements.at(i));
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& s : story.statements) {
      if (touches(s)) changed |= mark_statement(s);
    }
  }
  std::vector<int> out;
  for (const auto& s : story.statements) {
    if (!touches(s)) out.push_back(s.index);
  }
  return out;
}

std::optional<std::string> compositional_violation(std::span<const Story> train,
                                                   std::span<const Story> test) {
  std::set<Signature> train_sigs;
  std::set<std::pair<std::string, std::string>> covered;
  for (const auto& s : train) {
    auto sig = signature(s);
    auto pairs = tag_pairs(sig);
    covered.insert(pairs.begin(), pairs.end());
    train_sigs.insert(std::move(sig));
  }
  for (const auto& s : test) {
    auto sig = signature(s);
    if (train_sigs.count(sig)) return "test story " + s.id + " has a training signature";
    auto pairs = tag_pairs(sig);
    const bool novel = std::any_of(pairs.begin(), pairs.end(),
                                   [&](const auto& p) { return !covered.count(p); });
    if (!novel) return "test story " + s.id + " has no tag pair absent from training";
  }
  return std::nullopt;
}

DatasetSplits compose_splits(std::span<const TaskSpec> train_specs,
                             std::span<const TaskSpec> test_specs, SplitMode mode,
                             SplitSizes sizes, std::uint64_t seed, unsigned threads,
                             const Lexicon& lex) {
  DatasetSplits out;
  out.mode = mode;
  if (train_specs.empty()) throw InvalidConfig("train: at least one spec is required");
  for (const auto& s : train_specs) s.validate();
  for (const auto& s : test_specs) s.validate();

  if (mode == SplitMode::Iid) {
    std::vector<TaskSpec> pool(train_specs.begin(), train_specs.end());
    pool.insert(pool.end(), test_specs.begin(), test_specs.end());
    const std::size_t total = sizes.train + sizes.test;
    auto stories = parallel_map(total, threads, [&](std::size_t i) {
      Story s = sample_story(pool[i % pool.size()], derive_seed(seed, i), lex);
      s.id = story_id("s", i);
      return s;
    });
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, ~std::uint64_t{0}));
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t k = 0; k < total; ++k) {
      (k < sizes.train ? out.train : out.test).push_back(std::move(stories[order[k]]));
    }
    return out;
  }

  if (test_specs.empty()) throw InvalidConfig("test: compositional splits need test specs");
  std::set<std::pair<std::string, std::string>> covered;
  for (const auto& s : train_specs) {
    auto pairs = tag_pairs(s.tags());
    covered.insert(pairs.begin(), pairs.end());
  }
  for (std::size_t k = 0; k < test_specs.size(); ++k) {
    const auto pairs = tag_pairs(test_specs[k].tags());
    const bool novel = std::any_of(pairs.begin(), pairs.end(),
                                   [&](const auto& p) { return !covered.count(p); });
    if (!novel) {
      auto first = pairs.empty() ? std::pair<std::string, std::string>{} : *pairs.begin();
      throw SignatureOverlap(first.first, first.second,
                             "every tag pair of test spec #" + std::to_string(k) +
                                 " is already covered by the training specs");
    }
  }

  const std::uint64_t train_seed = derive_seed(seed, 0);
  const std::uint64_t test_seed = derive_seed(seed, 1);
  out.train = parallel_map(sizes.train, threads, [&](std::size_t i) {
    Story s = sample_story(train_specs[i % train_specs.size()], derive_seed(train_seed, i), lex);
    s.id = story_id("train", i);
    return s;
  });
  out.test = parallel_map(sizes.test, threads, [&](std::size_t i) {
    const auto& spec = test_specs[i % test_specs.size()];
    for (int r = 0; r < kMaxAttempts; ++r) {
      Story s = sample_story(spec, derive_seed(test_seed, i * kMaxAttempts + r), lex);
      const auto pairs = tag_pairs(signature(s));
      if (std::any_of(pairs.begin(), pairs.end(), [&](const auto& p) { return !covered.count(p); })) {
        s.id = story_id("test", i);
        return s;
      }
    }
    throw GenerationExhausted(kMaxAttempts,
                              "no test story realised an unseen tag combination");
  });
  return out;
}

std::vector<std::size_t> mixture_counts(std::span<const double> weights, std::size_t total) {
  if (weights.empty()) throw InvalidConfig("weights: must not be empty");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw InvalidConfig("weights: must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidConfig("weights: must sum to 1");
  std::vector<std::size_t> counts(weights.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double exact = weights[k] * static_cast<double>(total);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[k];
    remainders.emplace_back(exact - std::floor(exact), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total; ++r, ++assigned) {
    ++counts[remainders[r % remainders.size()].second];
  }
  return counts;
}

std::vector<Story> diversify(std::span<const TaskSpec> specs, std::size_t total_size,
                             std::span<const double> weights, std::uint64_t seed,
                             unsigned threads, const Lexicon& lex) {
  if (specs.size() != weights.size()) {
    throw InvalidConfig("weights: expected one weight per spec");
  }
  for (const auto& s : specs) s.validate();
  const auto counts = mixture_counts(weights, total_size);
  std::vector<std::size_t> assignment;
  for (std::size_t k = 0; k < counts.size(); ++k) assignment.insert(assignment.end(), counts[k], k);
  Rng rng(derive_seed(seed, ~std::uint64_t{0}));
  rng.shuffle(std::span<std::size_t>(assignment));
  return parallel_map(total_size, threads, [&](std::size_t i) {
    Story s = sample_story(specs[assignment[i]], derive_seed(seed, i), lex);
    s.id = story_id("mix", i);
    return s;
  });
}

}  // namespace mw
