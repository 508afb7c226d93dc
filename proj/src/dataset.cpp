#include "microworld/dataset.hpp"

#include <algorithm>

#include "microworld/errors.hpp"

namespace mw {

namespace {

const nlohmann::json& require(const nlohmann::json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw InvalidConfig(std::string("missing field \"") + key + "\"");
  }
  return doc.at(key);
}

std::vector<std::string> string_list(const nlohmann::json& doc, const char* key) {
  std::vector<std::string> out;
  if (!doc.contains(key)) return out;
  const auto& list = doc.at(key);
  if (!list.is_array()) throw InvalidConfig(std::string(key) + ": expected a list");
  for (const auto& v : list) {
    if (!v.is_string()) throw InvalidConfig(std::string(key) + ": expected names");
    out.push_back(v.get<std::string>());
  }
  return out;
}

LocationId location_named(const Declaration& decl, const std::string& name) {
  if (auto l = decl.find_location(name)) return *l;
  throw UnknownEntity(name, "location");
}

AgentId agent_named(const Declaration& decl, const std::string& name) {
  if (auto a = decl.find_agent(name)) return *a;
  throw UnknownEntity(name, "agent");
}

ObjectId object_named(const Declaration& decl, const std::string& name) {
  if (auto o = decl.find_object(name)) return *o;
  throw UnknownEntity(name, "object");
}

}  // namespace

nlohmann::ordered_json declaration_to_json(const Declaration& decl) {
  nlohmann::ordered_json j;
  auto& agents = j["agents"] = nlohmann::ordered_json::array();
  for (const auto& a : decl.agents()) agents.push_back({{"name", a.name}, {"pronoun", a.pronoun}});
  j["locations"] = decl.locations();
  j["objects"] = decl.objects();
  return j;
}

Declaration declaration_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InvalidConfig("world: expected an object");
  std::vector<Agent> agents;
  const auto& list = require(doc, "agents");
  if (!list.is_array()) throw InvalidConfig("agents: expected a list");
  for (const auto& a : list) {
    if (a.is_string()) {
      agents.push_back({a.get<std::string>(), ""});
    } else if (a.is_object() && a.contains("name") && a.at("name").is_string()) {
      agents.push_back({a.at("name").get<std::string>(), a.value("pronoun", std::string())});
    } else {
      throw InvalidConfig("agents: expected a name or {\"name\", \"pronoun\"}");
    }
  }
  return Declaration(std::move(agents), string_list(doc, "locations"), string_list(doc, "objects"));
}

nlohmann::ordered_json state_to_json(const Declaration& decl, const WorldState& state) {
  nlohmann::ordered_json j;
  auto& agents = j["agents"] = nlohmann::ordered_json::object();
  for (int a = 0; a < decl.agent_count(); ++a) {
    agents[decl.name(AgentId{a})] = decl.name(state.agent_location[a]);
  }
  auto& objects = j["objects"] = nlohmann::ordered_json::object();
  for (int o = 0; o < decl.object_count(); ++o) {
    const auto& place = state.object_place[o];
    if (const auto* l = std::get_if<LocationId>(&place)) {
      objects[decl.name(ObjectId{o})] = decl.name(*l);
    } else {
      objects[decl.name(ObjectId{o})] = decl.name(std::get<AgentId>(place));
    }
  }
  return j;
}

WorldState state_from_json(const Declaration& decl, const nlohmann::json& doc) {
  if (!doc.is_object()) throw InvalidConfig("initial: expected an object");
  WorldState state;
  state.agent_location.assign(decl.agent_count(), LocationId{});
  state.object_place.assign(decl.object_count(), Place{LocationId{}});
  const auto agents = doc.value("agents", nlohmann::json::object());
  for (int a = 0; a < decl.agent_count(); ++a) {
    const auto& name = decl.name(AgentId{a});
    if (!agents.contains(name)) throw InvalidConfig("initial.agents: no location for " + name);
    state.agent_location[a] = location_named(decl, agents.at(name).get<std::string>());
  }
  const auto objects = doc.value("objects", nlohmann::json::object());
  for (int o = 0; o < decl.object_count(); ++o) {
    const auto& name = decl.name(ObjectId{o});
    if (!objects.contains(name)) throw InvalidConfig("initial.objects: no place for " + name);
    const auto where = objects.at(name).get<std::string>();
    if (auto l = decl.find_location(where)) {
      state.object_place[o] = *l;
    } else if (auto a = decl.find_agent(where)) {
      state.object_place[o] = *a;
    } else {
      throw UnknownEntity(where, "location or agent");
    }
  }
  for (const auto& [key, value] : agents.items()) agent_named(decl, key);
  for (const auto& [key, value] : objects.items()) object_named(decl, key);
  validate_state(decl, state);
  return state;
}

nlohmann::ordered_json query_to_json(const Declaration& decl, const QuestionQuery& query) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (query.type == QuestionType::WhereObject) {
    j["object"] = decl.name(query.object);
  } else {
    j["agent"] = decl.name(query.agent);
  }
  if (query.type == QuestionType::YesNo) j["location"] = decl.name(query.location);
  return j;
}

QuestionQuery query_from_json(const Declaration& decl, QuestionType type,
                              const nlohmann::json& doc) {
  QuestionQuery q;
  q.type = type;
  if (type == QuestionType::WhereObject) {
    q.object = object_named(decl, require(doc, "object").get<std::string>());
  } else {
    q.agent = agent_named(decl, require(doc, "agent").get<std::string>());
  }
  if (type == QuestionType::YesNo) {
    q.location = location_named(decl, require(doc, "location").get<std::string>());
  }
  return q;
}

nlohmann::ordered_json story_to_json(const Story& story) {
  const auto& decl = story.entities;
  nlohmann::ordered_json j;
  j["id"] = story.id;
  j["spec"] = story.spec_fingerprint;
  auto& sentences = j["sentences"] = nlohmann::ordered_json::array();
  for (const auto& s : story.sentences) sentences.push_back(s.text);
  auto& questions = j["questions"] = nlohmann::ordered_json::array();
  for (const auto& q : story.questions) {
    questions.push_back({{"position", q.position},
                         {"qtype", std::string(to_string(q.query.type))},
                         {"text", q.text},
                         {"answer", q.answer},
                         {"supporting", q.supporting},
                         {"query", query_to_json(decl, q.query)}});
  }
  auto& sig = j["signature"] = nlohmann::ordered_json::array();
  for (const auto& tag : signature(story)) sig.push_back(tag);
  j["entities"] = declaration_to_json(decl);
  if (!story.trajectory.empty()) j["initial"] = state_to_json(decl, story.trajectory.front());
  auto& statements = j["statements"] = nlohmann::ordered_json::array();
  std::vector<int> coref;
  for (const auto& s : story.statements) {
    statements.push_back(to_string(decl, s.event));
    if (s.coref) coref.push_back(s.index);
  }
  j["coref"] = coref;
  return j;
}

Story story_from_json(const nlohmann::json& doc) {
  Story story;
  story.id = require(doc, "id").get<std::string>();
  story.spec_fingerprint = doc.value("spec", std::string());
  story.entities = declaration_from_json(require(doc, "entities"));
  const auto& decl = story.entities;
  const auto texts = string_list(doc, "sentences");
  const auto lines = string_list(doc, "statements");
  if (!lines.empty() && lines.size() != texts.size()) {
    throw InvalidConfig(story.id + ": sentences and statements differ in length");
  }
  std::vector<int> coref = doc.value("coref", std::vector<int>{});
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const bool c = std::find(coref.begin(), coref.end(), static_cast<int>(i)) != coref.end();
    story.statements.push_back({parse_event_line(decl, lines[i]), static_cast<int>(i), c});
  }
  for (std::size_t i = 0; i < texts.size(); ++i) {
    Sentence s;
    s.text = texts[i];
    if (i < story.statements.size()) s.source = story.statements[i];
    story.sentences.push_back(std::move(s));
  }
  if (doc.contains("initial")) {
    story.trajectory.push_back(state_from_json(decl, doc.at("initial")));
    for (const auto& s : story.statements) {
      story.trajectory.push_back(apply_statement(decl, story.trajectory.back(), s));
    }
  }
  for (const auto& q : doc.value("questions", nlohmann::json::array())) {
    Question question;
    const auto type_name = require(q, "qtype").get<std::string>();
    auto type = question_type_from_string(type_name);
    if (!type) throw InvalidConfig(story.id + ": unknown question type " + type_name);
    question.query = query_from_json(decl, *type, q.value("query", nlohmann::json::object()));
    question.position = require(q, "position").get<int>();
    question.answer = q.value("answer", std::string());
    question.supporting = q.value("supporting", std::vector<int>{});
    question.text = q.value("text", std::string());
    story.questions.push_back(std::move(question));
  }
  return story;
}

void write_jsonl(std::ostream& out, std::span<const Story> stories) {
  for (const auto& s : stories) out << story_to_json(s).dump() << '\n';
}

std::vector<Story> read_jsonl(std::istream& in) {
  std::vector<Story> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidConfig("line " + std::to_string(number) + ": " + e.what());
    }
    out.push_back(story_from_json(doc));
  }
  return out;
}

void write_babi(std::ostream& out, std::span<const Story> stories) {
  for (const auto& story : stories) {
    std::vector<int> line_of(story.sentences.size(), 0);
    std::size_t next_question = 0;
    int line = 0;
    for (std::size_t i = 0; i < story.sentences.size(); ++i) {
      line_of[i] = ++line;
      out << line << ' ' << story.sentences[i].text << '\n';
      while (next_question < story.questions.size() &&
             story.questions[next_question].position == static_cast<int>(i)) {
        const auto& q = story.questions[next_question++];
        out << ++line << ' ' << q.text << '\t' << q.answer << '\t';
        for (std::size_t k = 0; k < q.supporting.size(); ++k) {
          out << (k ? " " : "") << line_of.at(q.supporting[k]);
        }
        out << '\n';
      }
    }
  }
}

}  // namespace mw
