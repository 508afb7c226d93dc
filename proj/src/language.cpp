#include "microworld/language.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <exception>
#include <set>

#include "microworld/errors.hpp"
#include "microworld/rng.hpp"

namespace mw {

namespace {

constexpr std::array<std::string_view, kQuestionTypeCount> kQuestionNames = {
    "WhereAgent", "WhereObject", "Counting", "List", "YesNo"};

std::vector<Slot> required_slots(StatementKind kind) {
  switch (kind) {
    case StatementKind::Move:
    case StatementKind::LocationFact:
    case StatementKind::Negation:
      return {Slot::Agent, Slot::Location};
    case StatementKind::CoMove:
      return {Slot::Agent, Slot::Agent2, Slot::Location};
    case StatementKind::Grab:
    case StatementKind::Drop:
      return {Slot::Agent, Slot::Object};
    case StatementKind::Give:
      return {Slot::Agent, Slot::Agent2, Slot::Object};
  }
  return {};
}

std::vector<Slot> required_slots(QuestionType type) {
  switch (type) {
    case QuestionType::WhereObject:
      return {Slot::Object};
    case QuestionType::YesNo:
      return {Slot::Agent, Slot::Location};
    default:
      return {Slot::Agent};
  }
}

std::vector<Slot> command_slots(StatementKind kind) {
  auto slots = required_slots(kind);
  slots.erase(std::remove(slots.begin(), slots.end(), Slot::Agent), slots.end());
  return slots;
}

bool is_action_kind(StatementKind kind) {
  return kind != StatementKind::LocationFact && kind != StatementKind::Negation;
}

std::optional<Slot> slot_from_placeholder(std::string_view token) {
  if (token == "{agent}") return Slot::Agent;
  if (token == "{agent2}") return Slot::Agent2;
  if (token == "{object}") return Slot::Object;
  if (token == "{location}") return Slot::Location;
  return std::nullopt;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::size_t code_points(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

Template compile(const std::string& text, const std::vector<Slot>& slots,
                 const std::string& where) {
  Template t{text, {}};
  std::multiset<Slot> seen;
  for (auto& tok : tokenize(text)) {
    if (tok.front() == '{') {
      auto slot = slot_from_placeholder(tok);
      if (!slot) throw InvalidConfig(where + ": unknown placeholder " + tok);
      seen.insert(*slot);
      t.tokens.push_back({true, *slot, {}});
    } else {
      t.tokens.push_back({false, Slot::Agent, std::move(tok)});
    }
  }
  if (seen != std::multiset<Slot>(slots.begin(), slots.end())) {
    throw InvalidConfig(where + ": template \"" + text +
                        "\" does not have exactly the required slots");
  }
  return t;
}

struct Bindings {
  std::optional<AgentId> agent;
  std::optional<AgentId> agent2;
  std::optional<ObjectId> object;
  std::optional<LocationId> location;
  bool pronoun = false;
};

Event build_event(StatementKind kind, const Bindings& b) {
  switch (kind) {
    case StatementKind::Move:
      return Move{*b.agent, *b.location};
    case StatementKind::CoMove:
      return CoMove{*b.agent, *b.agent2, *b.location};
    case StatementKind::Grab:
      return Grab{*b.agent, *b.object};
    case StatementKind::Drop:
      return Drop{*b.agent, *b.object};
    case StatementKind::Give:
      return Give{*b.agent, *b.agent2, *b.object};
    case StatementKind::LocationFact:
      return LocationFact{*b.agent, *b.location};
    case StatementKind::Negation:
      return Negation{*b.agent, *b.location};
  }
  throw InvalidStatement("unknown statement kind");
}

QuestionQuery build_query(QuestionType type, const Bindings& b) {
  QuestionQuery q;
  q.type = type;
  if (b.agent) q.agent = *b.agent;
  if (b.object) q.object = *b.object;
  if (b.location) q.location = *b.location;
  return q;
}

Bindings bindings_of(const Event& event) {
  Bindings b;
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, Move>) {
          b.agent = e.agent;
          b.location = e.to;
        } else if constexpr (std::is_same_v<T, CoMove>) {
          b.agent = e.first;
          b.agent2 = e.second;
          b.location = e.to;
        } else if constexpr (std::is_same_v<T, Grab> || std::is_same_v<T, Drop>) {
          b.agent = e.agent;
          b.object = e.object;
        } else if constexpr (std::is_same_v<T, Give>) {
          b.agent = e.giver;
          b.agent2 = e.receiver;
          b.object = e.object;
        } else {
          b.agent = e.agent;
          b.location = e.at;
        }
      },
      event);
  return b;
}

struct Rendered {
  std::string text;
  std::vector<SlotSpan> spans;
};

// Substitutes slots into the template text, keeping its spacing.
Rendered fill(const Template& t, const Declaration& decl, const Bindings& b,
              const std::string& pronoun) {
  Rendered out;
  std::string_view rest = t.text;
  while (!rest.empty()) {
    auto open = rest.find('{');
    if (open == std::string_view::npos) {
      out.text += rest;
      break;
    }
    out.text += rest.substr(0, open);
    auto close = rest.find('}', open);
    auto slot = *slot_from_placeholder(rest.substr(open, close - open + 1));
    std::string value;
    switch (slot) {
      case Slot::Agent:
        value = pronoun.empty() ? capitalize(decl.name(*b.agent)) : pronoun;
        break;
      case Slot::Agent2:
        value = capitalize(decl.name(*b.agent2));
        break;
      case Slot::Object:
        value = decl.name(*b.object);
        break;
      case Slot::Location:
        value = decl.name(*b.location);
        break;
    }
    const std::size_t begin = code_points(out.text);
    if (begin == 0) value = capitalize(std::move(value));
    out.text += value;
    out.spans.push_back({slot, {begin, begin + code_points(value)}});
    rest.remove_prefix(close + 1);
  }
  out.text = capitalize(std::move(out.text));
  return out;
}

struct Mismatch {
  std::size_t position;
  std::string expected;
};

// Structural match: literals equal, one text token per slot.
std::optional<Mismatch> match_shape(const Template& t, const std::vector<std::string>& tokens) {
  for (std::size_t i = 0; i < t.tokens.size(); ++i) {
    const auto& tt = t.tokens[i];
    if (i >= tokens.size()) {
      return Mismatch{i, tt.is_slot ? std::string(slot_name(tt.slot)) : "\"" + tt.literal + "\""};
    }
    if (!tt.is_slot && tt.literal != tokens[i]) return Mismatch{i, "\"" + tt.literal + "\""};
  }
  if (tokens.size() > t.tokens.size()) return Mismatch{t.tokens.size(), "end of sentence"};
  return std::nullopt;
}

bool is_pronoun_word(const Lexicon& lex, const Declaration& decl, const std::string& token) {
  static const std::set<std::string> kCommon = {"he", "she", "they", "it"};
  if (kCommon.count(token)) return true;
  for (int a = 0; a < decl.agent_count(); ++a) {
    if (lex.pronoun_for(decl, AgentId{a}) == token) return true;
  }
  return false;
}

// Binds slot tokens to entities; throws UnknownEntity / UnresolvedPronoun.
Bindings bind_slots(const Template& t, const std::vector<std::string>& tokens, const Lexicon& lex,
              const Declaration& decl, const CorefContext& coref) {
  Bindings b;
  for (std::size_t i = 0; i < t.tokens.size(); ++i) {
    const auto& tt = t.tokens[i];
    if (!tt.is_slot) continue;
    const std::string& tok = tokens[i];
    switch (tt.slot) {
      case Slot::Agent:
        if (auto a = decl.find_agent(tok)) {
          b.agent = a;
        } else if (is_pronoun_word(lex, decl, tok)) {
          if (!coref.subject || lex.pronoun_for(decl, *coref.subject) != tok) {
            throw UnresolvedPronoun("cannot resolve pronoun \"" + tok + "\"");
          }
          b.agent = coref.subject;
          b.pronoun = true;
        } else {
          throw UnknownEntity(tok, "agent");
        }
        break;
      case Slot::Agent2:
        if (auto a = decl.find_agent(tok)) {
          b.agent2 = a;
        } else {
          throw UnknownEntity(tok, "agent");
        }
        break;
      case Slot::Object:
        if (auto o = decl.find_object(tok)) {
          b.object = o;
        } else {
          throw UnknownEntity(tok, "object");
        }
        break;
      case Slot::Location:
        if (auto l = decl.find_location(tok)) {
          b.location = l;
        } else {
          throw UnknownEntity(tok, "location");
        }
        break;
    }
  }
  return b;
}

}  // namespace

std::string_view to_string(QuestionType type) {
  return kQuestionNames[static_cast<std::size_t>(type)];
}

std::optional<QuestionType> question_type_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kQuestionNames.size(); ++i) {
    if (kQuestionNames[i] == name) return static_cast<QuestionType>(i);
  }
  return std::nullopt;
}

std::string_view slot_name(Slot slot) {
  switch (slot) {
    case Slot::Agent:
      return "agent";
    case Slot::Agent2:
      return "agent2";
    case Slot::Object:
      return "object";
    case Slot::Location:
      return "location";
  }
  return "?";
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) break;
    std::string_view word = text.substr(i, j - i);
    std::vector<std::string> trailing;
    while (!word.empty() && (word.back() == '.' || word.back() == '?' || word.back() == '!' ||
                             word.back() == ',')) {
      trailing.emplace_back(1, word.back());
      word.remove_suffix(1);
    }
    if (!word.empty()) out.push_back(lower(word));
    out.insert(out.end(), trailing.rbegin(), trailing.rend());
    i = j;
  }
  return out;
}

Lexicon::Lexicon(Source source) : source_(std::move(source)) {
  for (int k = 0; k < kStatementKindCount; ++k) {
    const auto kind = static_cast<StatementKind>(k);
    const std::string name(to_string(kind));
    if (auto it = source_.templates.find(kind); it != source_.templates.end()) {
      for (const auto& text : it->second) {
        templates_[k].push_back(compile(text, required_slots(kind), "templates." + name));
      }
    }
    if (auto it = source_.commands.find(kind); it != source_.commands.end()) {
      if (!is_action_kind(kind) && !it->second.empty()) {
        throw InvalidConfig("commands." + name + ": facts have no imperative form");
      }
      for (const auto& text : it->second) {
        commands_[k].push_back(compile(text, command_slots(kind), "commands." + name));
      }
    }
  }
  for (const auto& [type, text] : source_.questions) {
    questions_[static_cast<std::size_t>(type)] =
        compile(text, required_slots(type), "questions." + std::string(to_string(type)));
  }
  for (const auto& [entity, pronoun] : source_.pronouns) {
    if (pronoun != lower(pronoun) || tokenize(pronoun).size() != 1) {
      throw InvalidConfig("pronouns." + entity + ": pronoun must be one lowercase token");
    }
  }
}

const Lexicon& Lexicon::default_english() {
  static const Lexicon lexicon([] {
    Source s;
    using K = StatementKind;
    s.templates[K::Move] = {"{agent} went to the {location}.",
                            "{agent} travelled to the {location}.",
                            "{agent} journeyed to the {location}."};
    s.templates[K::CoMove] = {"{agent} and {agent2} went to the {location}.",
                              "{agent} and {agent2} travelled to the {location}.",
                              "{agent} and {agent2} moved to the {location}."};
    s.templates[K::Grab] = {"{agent} picked up the {object}.", "{agent} grabbed the {object}.",
                            "{agent} took the {object}."};
    s.templates[K::Drop] = {"{agent} dropped the {object}.", "{agent} put down the {object}.",
                            "{agent} discarded the {object}."};
    s.templates[K::Give] = {"{agent} gave the {object} to {agent2}.",
                            "{agent} handed the {object} to {agent2}.",
                            "{agent} passed the {object} to {agent2}."};
    s.templates[K::LocationFact] = {"{agent} is in the {location}.",
                                    "{agent} is located in the {location}."};
    s.templates[K::Negation] = {"{agent} is no longer in the {location}.",
                                "{agent} is not in the {location}."};
    s.commands[K::Move] = {"go to the {location}", "travel to the {location}",
                           "walk to the {location}"};
    s.commands[K::CoMove] = {"go to the {location} with {agent2}",
                             "travel to the {location} with {agent2}"};
    s.commands[K::Grab] = {"grab the {object}", "pick up the {object}", "take the {object}"};
    s.commands[K::Drop] = {"drop the {object}", "put down the {object}",
                           "discard the {object}"};
    s.commands[K::Give] = {"give the {object} to {agent2}", "hand the {object} to {agent2}",
                           "pass the {object} to {agent2}"};
    s.questions[QuestionType::WhereAgent] = "Where is {agent}?";
    s.questions[QuestionType::WhereObject] = "Where is the {object}?";
    s.questions[QuestionType::Counting] = "How many objects is {agent} carrying?";
    s.questions[QuestionType::List] = "What is {agent} carrying?";
    s.questions[QuestionType::YesNo] = "Is {agent} in the {location}?";
    return Source(std::move(s));
  }());
  return lexicon;
}

Lexicon Lexicon::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InvalidConfig("lexicon: expected a JSON object");
  Source s;
  auto string_list = [](const nlohmann::json& value, const std::string& where) {
    if (!value.is_array()) throw InvalidConfig(where + ": expected a list of strings");
    std::vector<std::string> out;
    for (const auto& v : value) {
      if (!v.is_string()) throw InvalidConfig(where + ": expected a list of strings");
      out.push_back(v.get<std::string>());
    }
    return out;
  };
  for (const char* section : {"templates", "commands"}) {
    if (!doc.contains(section)) continue;
    const auto& obj = doc.at(section);
    if (!obj.is_object()) throw InvalidConfig(std::string(section) + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
      auto kind = statement_kind_from_string(key);
      const std::string where = std::string(section) + "." + key;
      if (!kind) throw InvalidConfig(where + ": unknown statement variant");
      (std::string_view(section) == "templates" ? s.templates : s.commands)[*kind] =
          string_list(value, where);
    }
  }
  if (doc.contains("questions")) {
    const auto& obj = doc.at("questions");
    if (!obj.is_object()) throw InvalidConfig("questions: expected an object");
    for (const auto& [key, value] : obj.items()) {
      auto type = question_type_from_string(key);
      if (!type) throw InvalidConfig("questions." + key + ": unknown question type");
      if (!value.is_string()) throw InvalidConfig("questions." + key + ": expected a string");
      s.questions[*type] = value.get<std::string>();
    }
  }
  if (doc.contains("pronouns")) {
    const auto& obj = doc.at("pronouns");
    if (!obj.is_object()) throw InvalidConfig("pronouns: expected an object");
    for (const auto& [key, value] : obj.items()) {
      if (!value.is_string()) throw InvalidConfig("pronouns." + key + ": expected a string");
      s.pronouns[key] = value.get<std::string>();
    }
  }
  return Lexicon(std::move(s));
}

nlohmann::json Lexicon::to_json() const {
  nlohmann::json doc;
  for (const auto& [kind, list] : source_.templates) {
    doc["templates"][std::string(to_string(kind))] = list;
  }
  for (const auto& [kind, list] : source_.commands) {
    doc["commands"][std::string(to_string(kind))] = list;
  }
  for (const auto& [type, text] : source_.questions) {
    doc["questions"][std::string(to_string(type))] = text;
  }
  doc["pronouns"] = source_.pronouns;
  return doc;
}

std::string Lexicon::pronoun_for(const Declaration& decl, AgentId agent) const {
  const auto& name = decl.name(agent);
  if (auto it = source_.pronouns.find(name); it != source_.pronouns.end()) return it->second;
  return decl.agents().at(agent.value).pronoun;
}

bool uses_pronoun(const Statement& stmt, const Lexicon& lex, const Declaration& decl,
                  const CorefContext& context) {
  if (!stmt.coref) return false;
  auto subject = single_subject(stmt.event);
  return subject && context.subject == subject && !lex.pronoun_for(decl, *subject).empty();
}

Sentence render_with_template(const Statement& stmt, const Lexicon& lex,
                              const Declaration& decl, std::size_t template_index,
                              const CorefContext& context) {
  validate_event(decl, stmt.event);
  const auto kind = kind_of(stmt.event);
  const auto& list = lex.templates(kind);
  if (list.empty()) {
    throw MissingTemplate("no template for statement variant " + std::string(to_string(kind)));
  }
  if (template_index >= list.size()) {
    throw MissingTemplate("template index out of range for " + std::string(to_string(kind)));
  }
  const bool pronoun = uses_pronoun(stmt, lex, decl, context);
  const auto bindings = bindings_of(stmt.event);
  auto rendered = fill(list[template_index], decl, bindings,
                       pronoun ? lex.pronoun_for(decl, *bindings.agent) : std::string());
  return Sentence{std::move(rendered.text), stmt, std::move(rendered.spans),
                  static_cast<int>(template_index), pronoun};
}

Sentence render(const Statement& stmt, const Lexicon& lex, const Declaration& decl,
                std::uint64_t seed, const CorefContext& context) {
  const auto& list = lex.templates(kind_of(stmt.event));
  if (list.empty()) {
    throw MissingTemplate("no template for statement variant " +
                          std::string(to_string(kind_of(stmt.event))));
  }
  return render_with_template(stmt, lex, decl, derive_seed(seed, 0) % list.size(), context);
}

Sentence render_question(const QuestionQuery& query, const Lexicon& lex,
                         const Declaration& decl) {
  if (!lex.has_question(query.type)) {
    throw MissingTemplate("no template for question type " + std::string(to_string(query.type)));
  }
  Bindings b;
  switch (query.type) {
    case QuestionType::WhereObject:
      b.object = query.object;
      break;
    case QuestionType::YesNo:
      b.agent = query.agent;
      b.location = query.location;
      break;
    default:
      b.agent = query.agent;
  }
  auto rendered = fill(lex.question(query.type), decl, b, {});
  return Sentence{std::move(rendered.text), query, std::move(rendered.spans), 0, false};
}

std::string render_command(const Action& action, const Lexicon& lex, const Declaration& decl,
                           std::size_t template_index) {
  const auto kind = kind_of(action);
  const auto& list = lex.commands(kind);
  if (template_index >= list.size()) {
    throw MissingTemplate("no command template for " + std::string(to_string(kind)));
  }
  auto rendered = fill(list[template_index], decl, bindings_of(to_event(action)), {});
  // Commands are lowercase imperatives; undo the sentence capitalisation.
  if (!rendered.text.empty()) {
    rendered.text[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(rendered.text[0])));
  }
  return rendered.text;
}

Parsed parse_sentence(std::string_view text, const Lexicon& lex, const Declaration& decl,
                      const ParseContext& context) {
  const auto tokens = tokenize(text);
  std::optional<Mismatch> best;
  std::exception_ptr entity_error;

  auto note = [&](const Mismatch& m) {
    if (!best || m.position > best->position) best = m;
  };
  // Runs `attempt`; remembers the first entity-level failure.
  auto guarded = [&](auto attempt) -> std::optional<Parsed> {
    try {
      return attempt();
    } catch (const UnknownEntity&) {
      if (!entity_error) entity_error = std::current_exception();
    } catch (const UnresolvedPronoun&) {
      if (!entity_error) entity_error = std::current_exception();
    }
    return std::nullopt;
  };

  for (int k = 0; k < kStatementKindCount; ++k) {
    const auto kind = static_cast<StatementKind>(k);
    const auto& list = lex.templates(kind);
    for (std::size_t t = 0; t < list.size(); ++t) {
      if (auto m = match_shape(list[t], tokens)) {
        note(*m);
        continue;
      }
      auto parsed = guarded([&]() -> std::optional<Parsed> {
        auto b = bind_slots(list[t], tokens, lex, decl, context.coref);
        Statement stmt{build_event(kind, b), context.index, b.pronoun};
        validate_event(decl, stmt.event);
        return Parsed{stmt, SentenceForm::Narration, static_cast<int>(t)};
      });
      if (parsed) return *parsed;
    }
  }
  for (int q = 0; q < kQuestionTypeCount; ++q) {
    const auto type = static_cast<QuestionType>(q);
    if (!lex.has_question(type)) continue;
    const auto& tmpl = lex.question(type);
    if (auto m = match_shape(tmpl, tokens)) {
      note(*m);
      continue;
    }
    auto parsed = guarded([&]() -> std::optional<Parsed> {
      auto b = bind_slots(tmpl, tokens, lex, decl, CorefContext::none());
      return Parsed{build_query(type, b), SentenceForm::Question, 0};
    });
    if (parsed) return *parsed;
  }
  for (int k = 0; k < kStatementKindCount; ++k) {
    const auto kind = static_cast<StatementKind>(k);
    const auto& list = lex.commands(kind);
    for (std::size_t t = 0; t < list.size(); ++t) {
      if (auto m = match_shape(list[t], tokens)) {
        note(*m);
        continue;
      }
      if (!context.actor) {
        throw ParseError(0, "a sentence with an explicit subject", std::string(text));
      }
      auto parsed = guarded([&]() -> std::optional<Parsed> {
        auto b = bind_slots(list[t], tokens, lex, decl, CorefContext::none());
        b.agent = context.actor;
        Statement stmt{build_event(kind, b), context.index, false};
        validate_event(decl, stmt.event);
        return Parsed{stmt, SentenceForm::Command, static_cast<int>(t)};
      });
      if (parsed) return *parsed;
    }
  }
  if (entity_error) std::rethrow_exception(entity_error);
  if (!best) best = Mismatch{0, "a sentence"};
  throw ParseError(best->position, best->expected, std::string(text));
}

}  // namespace mw
