#pragma once

// JSON / JSONL / bAbI serialization of worlds and stories.

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "microworld/taskgen.hpp"

namespace mw {

nlohmann::ordered_json declaration_to_json(const Declaration& decl);
// {"agents": [{"name", "pronoun"} | "name"], "locations": [...], "objects": [...]}
Declaration declaration_from_json(const nlohmann::json& doc);

// {"agents": {name: location}, "objects": {name: location-or-agent}}
nlohmann::ordered_json state_to_json(const Declaration& decl, const WorldState& state);
WorldState state_from_json(const Declaration& decl, const nlohmann::json& doc);

nlohmann::ordered_json query_to_json(const Declaration& decl, const QuestionQuery& query);
QuestionQuery query_from_json(const Declaration& decl, QuestionType type,
                              const nlohmann::json& doc);

nlohmann::ordered_json story_to_json(const Story& story);
// Rebuilds statements and the trajectory; sentences keep their text only.
Story story_from_json(const nlohmann::json& doc);

void write_jsonl(std::ostream& out, std::span<const Story> stories);
std::vector<Story> read_jsonl(std::istream& in);

// Classic line-numbered text format; numbering restarts at 1 for each story
// and counts question lines.
void write_babi(std::ostream& out, std::span<const Story> stories);

}  // namespace mw
