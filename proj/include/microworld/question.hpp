#pragma once

#include <optional>
#include <string_view>

#include "microworld/world.hpp"

namespace mw {

enum class QuestionType { WhereAgent, WhereObject, Counting, List, YesNo };
inline constexpr int kQuestionTypeCount = 5;

std::string_view to_string(QuestionType type);
std::optional<QuestionType> question_type_from_string(std::string_view name);

// What is being asked, without position or answer. Only the fields the type
// uses are meaningful: WhereAgent/Counting/List use `agent`, WhereObject
// uses `object`, YesNo asks At(agent, location).
struct QuestionQuery {
  QuestionType type = QuestionType::WhereAgent;
  AgentId agent{};
  ObjectId object{};
  LocationId location{};

  static QuestionQuery where_agent(AgentId a) { return {QuestionType::WhereAgent, a, {}, {}}; }
  static QuestionQuery where_object(ObjectId o) {
    return {QuestionType::WhereObject, {}, o, {}};
  }
  static QuestionQuery counting(AgentId a) { return {QuestionType::Counting, a, {}, {}}; }
  static QuestionQuery list(AgentId a) { return {QuestionType::List, a, {}, {}}; }
  static QuestionQuery yes_no(AgentId a, LocationId l) {
    return {QuestionType::YesNo, a, {}, l};
  }

  bool operator==(const QuestionQuery&) const = default;
};

}  // namespace mw
