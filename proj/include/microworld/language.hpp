#pragma once

// Surface layer shared by narration, questions and player commands: one
// template grammar drives both rendering and parsing.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "microworld/question.hpp"
#include "microworld/world.hpp"

namespace mw {

enum class Slot { Agent, Agent2, Object, Location };

std::string_view slot_name(Slot slot);

struct TemplateToken {
  bool is_slot = false;
  Slot slot = Slot::Agent;
  std::string literal;  // lowercased; set when !is_slot
};

struct Template {
  std::string text;
  std::vector<TemplateToken> tokens;
};

// Surface templates and pronouns. Immutable once constructed; construction
// validates that every template carries exactly the slots its form needs.
class Lexicon {
 public:
  struct Source {
    std::map<StatementKind, std::vector<std::string>> templates;
    std::map<StatementKind, std::vector<std::string>> commands;
    std::map<QuestionType, std::string> questions;
    std::map<std::string, std::string> pronouns;
  };

  explicit Lexicon(Source source);

  static const Lexicon& default_english();
  // Throws InvalidConfig on schema or slot errors.
  static Lexicon from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  const std::vector<Template>& templates(StatementKind kind) const {
    return templates_[static_cast<std::size_t>(kind)];
  }
  const std::vector<Template>& commands(StatementKind kind) const {
    return commands_[static_cast<std::size_t>(kind)];
  }
  const Template& question(QuestionType type) const {
    return questions_[static_cast<std::size_t>(type)];
  }
  bool has_question(QuestionType type) const {
    return !questions_[static_cast<std::size_t>(type)].text.empty();
  }

  // Lexicon override first, then the agent's declared pronoun.
  std::string pronoun_for(const Declaration& decl, AgentId agent) const;

 private:
  Source source_;
  std::array<std::vector<Template>, kStatementKindCount> templates_;
  std::array<std::vector<Template>, kStatementKindCount> commands_;
  std::array<Template, kQuestionTypeCount> questions_;
};

// Lowercased whitespace tokens with terminal punctuation split off.
std::vector<std::string> tokenize(std::string_view text);

struct Span {
  std::size_t begin = 0;  // code points
  std::size_t end = 0;
  bool operator==(const Span&) const = default;
};

struct SlotSpan {
  Slot slot;
  Span span;
};

using SentenceSource = std::variant<Statement, QuestionQuery>;

struct Sentence {
  std::string text;
  SentenceSource source;
  std::vector<SlotSpan> spans;
  int template_index = 0;
  bool pronoun = false;
};

// The antecedent available for pronoun resolution: the single subject of
// the immediately preceding sentence, if any.
struct CorefContext {
  std::optional<AgentId> subject;

  static CorefContext none() { return {}; }
  static CorefContext after(const Statement& previous) {
    return {single_subject(previous.event)};
  }
};

// Whether `stmt` would be rendered with a pronoun in this context.
bool uses_pronoun(const Statement& stmt, const Lexicon& lex, const Declaration& decl,
                  const CorefContext& context);

Sentence render(const Statement& stmt, const Lexicon& lex, const Declaration& decl,
                std::uint64_t seed, const CorefContext& context);
Sentence render_with_template(const Statement& stmt, const Lexicon& lex,
                              const Declaration& decl, std::size_t template_index,
                              const CorefContext& context);
Sentence render_question(const QuestionQuery& query, const Lexicon& lex,
                         const Declaration& decl);
// Imperative form for the acting agent, e.g. "grab the apple".
std::string render_command(const Action& action, const Lexicon& lex, const Declaration& decl,
                           std::size_t template_index = 0);

enum class SentenceForm { Narration, Command, Question };

struct ParseContext {
  CorefContext coref;
  std::optional<AgentId> actor;  // fills the agent slot of commands
  int index = 0;                 // index given to the parsed statement
};

struct Parsed {
  SentenceSource value;
  SentenceForm form = SentenceForm::Narration;
  int template_index = 0;
};

// Throws ParseError, UnknownEntity or UnresolvedPronoun.
Parsed parse_sentence(std::string_view text, const Lexicon& lex, const Declaration& decl,
                      const ParseContext& context);

}  // namespace mw
