#pragma once

// Per-sentence proposition labels and implausible-story instances.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "microworld/language.hpp"
#include "microworld/taskgen.hpp"

namespace mw {

// Every At, Holds and ObjAt proposition over `decl`, ordered by variant and
// then by entity names.
std::vector<Proposition> proposition_universe(const Declaration& decl);

// Inverse of to_string(decl, prop). Throws ParseError / UnknownEntity.
Proposition parse_proposition(const Declaration& decl, std::string_view text);

struct BreakpointAnnotation {
  std::string story_id;
  std::vector<std::string> universe;       // canonical proposition strings
  std::vector<std::vector<Label>> labels;  // one row per sentence
};

BreakpointAnnotation annotate(const Story& story);

struct PlausibilityInstance {
  std::string id;
  std::vector<std::string> sentences;
  bool plausible = true;
  std::optional<int> bug_index;
  std::optional<std::pair<int, int>> conflict_pair;
  // The violated precondition was never established by an earlier sentence,
  // so the pair is (bug_index, bug_index).
  bool degenerate = false;
  std::vector<std::string> affected;
};

// Keeps a prefix of the story and appends one action whose precondition is
// provably false for a reader of that prefix. Non-degenerate bugs are
// preferred. Throws NoInjectionSite.
PlausibilityInstance inject_implausibility(const Story& story, std::uint64_t seed,
                                           const Lexicon& lex = Lexicon::default_english());

// The unchanged story as a plausible instance.
PlausibilityInstance passthrough_instance(const Story& story);

struct ConflictResult {
  bool plausible = true;
  std::optional<std::pair<int, int>> conflict_pair;
  bool degenerate = false;
  std::string reason;
};

// Parses and replays the sentences; the first contradiction gives the bug
// sentence j and i = the latest sentence supporting the violated fact.
ConflictResult detect_conflict(std::span<const std::string> sentences, const Lexicon& lex,
                               const Declaration& entities);

struct LabelMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold cells with this label
};

struct BreakpointMetrics {
  std::size_t cells = 0;
  double accuracy = 0.0;
  std::map<Label, LabelMetrics> per_label;
  // Mean F1 over the labels present in gold or prediction.
  double macro_f1 = 0.0;
};

// Throws ShapeMismatch.
BreakpointMetrics score_breakpoints(const BreakpointAnnotation& gold,
                                    const BreakpointAnnotation& predicted);
// Pooled over stories matched by id; throws UnresolvedId, DuplicatePrediction
// or ShapeMismatch.
BreakpointMetrics score_breakpoints(std::span<const BreakpointAnnotation> gold,
                                    std::span<const BreakpointAnnotation> predicted);

nlohmann::ordered_json breakpoints_to_json(const BreakpointAnnotation& annotation);
BreakpointAnnotation breakpoints_from_json(const nlohmann::json& doc);
nlohmann::ordered_json plausibility_to_json(const PlausibilityInstance& instance);
PlausibilityInstance plausibility_from_json(const nlohmann::json& doc);

}  // namespace mw
