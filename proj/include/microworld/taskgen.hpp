#pragma once

// Controllable story/question generator and dataset composition.

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "microworld/belief.hpp"
#include "microworld/language.hpp"
#include "microworld/question.hpp"
#include "microworld/world.hpp"

namespace mw {

struct TaskSpec {
  std::string name;
  int agents = 2;
  int objects = 1;
  int locations = 3;
  int story_length = 8;
  std::set<StatementKind> statements = {StatementKind::Move};
  std::set<QuestionType> questions = {QuestionType::WhereAgent};
  int questions_per_story = 1;
  double distractor_rate = 0.0;
  double coref_rate = 0.0;
  std::optional<std::uint64_t> seed;

  // Throws InvalidConfig naming the offending field.
  void validate() const;
  // Tags a story generated from this spec may carry.
  std::set<std::string> tags() const;
  // Stable hash of the canonical JSON form (name excluded).
  std::string fingerprint() const;

  nlohmann::ordered_json to_json() const;
  // `where` prefixes diagnostics, e.g. "train[0]".
  static TaskSpec from_json(const nlohmann::json& doc, const std::string& where = "spec");
};

// Largest entity counts the built-in name pools support.
struct PoolLimits {
  static constexpr int kAgents = 8;
  static constexpr int kLocations = 12;
  static constexpr int kObjects = 8;
};

struct Question {
  QuestionQuery query;
  int position = 0;  // index of the last statement read before asking
  std::string answer;
  std::vector<int> supporting;
  std::string text;
};

struct Story {
  std::string id;
  std::string spec_fingerprint;
  Declaration entities;
  std::vector<Statement> statements;
  std::vector<Sentence> sentences;
  std::vector<Question> questions;
  std::vector<WorldState> trajectory;  // ground truth, size statements + 1
};

using Signature = std::set<std::string>;

Signature signature(const Story& story);

struct Answer {
  std::string text;
  std::vector<int> supporting;
};

// Extends a set of statement indices so that replaying exactly those
// statements, in order, from a fresh reader is consistent: intervening moves
// of every mentioned agent and carry changes of every mentioned object are
// added, and an object first mentioned while carried gets the statement that
// put it in hand.
std::vector<int> close_support(std::span<const Statement> statements, std::vector<int> base);

// The entailed answer to `query` given `belief`, or nothing if the answer is
// not unique. YesNo answers "maybe" for unknown labels.
std::optional<Answer> answer_from_belief(const Declaration& decl,
                                         std::span<const Statement> statements,
                                         const BeliefState& belief, const QuestionQuery& query);

// Replays the first `prefix_length` statements and answers. Throws
// Unanswerable or Contradiction.
Answer answer_at(const Declaration& decl, std::span<const Statement> statements,
                 int prefix_length, const QuestionQuery& query);

Answer answer_question(const Story& story, const Question& question);

// Throws GenerationExhausted when constraints cannot be met.
Story sample_story(const TaskSpec& spec, std::uint64_t seed,
                   const Lexicon& lex = Lexicon::default_english());

// Stories for seeds derive_seed(seed, 0..n-1), ids "<prefix>-000000"...
std::vector<Story> sample_stories(const TaskSpec& spec, std::size_t n, std::uint64_t seed,
                                  const std::string& id_prefix, unsigned threads = 1,
                                  const Lexicon& lex = Lexicon::default_english());

// Statement indices that mention only entities unrelated to every question:
// the complement of the entity cone grown from question targets and
// supporting statements.
std::vector<int> distractor_statements(const Story& story);

enum class SplitMode { Iid, Compositional };

struct SplitSizes {
  std::size_t train = 0;
  std::size_t test = 0;
};

struct DatasetSplits {
  std::vector<Story> train;
  std::vector<Story> test;
  SplitMode mode = SplitMode::Iid;
};

// Throws SignatureOverlap in compositional mode when some test spec has no
// tag pair left uncovered by the training specs.
DatasetSplits compose_splits(std::span<const TaskSpec> train_specs,
                             std::span<const TaskSpec> test_specs, SplitMode mode,
                             SplitSizes sizes, std::uint64_t seed, unsigned threads = 1,
                             const Lexicon& lex = Lexicon::default_english());

// Describes the first violation of compositional disjointness (a test
// signature equal to a train signature, or one with no tag pair absent from
// every train signature), or nothing.
std::optional<std::string> compositional_violation(std::span<const Story> train,
                                                   std::span<const Story> test);

// Per-spec counts round(weight * total) with largest-remainder rounding;
// ties go to the lower index.
std::vector<std::size_t> mixture_counts(std::span<const double> weights, std::size_t total);

// Shuffled mixture of stories from several specs. Story i always uses seed
// derive_seed(seed, i), so a single-spec mixture equals sample_stories.
std::vector<Story> diversify(std::span<const TaskSpec> specs, std::size_t total_size,
                             std::span<const double> weights, std::uint64_t seed,
                             unsigned threads = 1,
                             const Lexicon& lex = Lexicon::default_english());

}  // namespace mw
