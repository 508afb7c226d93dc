#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "microworld/dataset.hpp"
#include "microworld/errors.hpp"
#include "microworld/server.hpp"
#include "microworld/session.hpp"

namespace mw {
namespace {

nlohmann::json lab_config() {
  return nlohmann::json::parse(R"({
    "world": {
      "agents": [{"name": "ana", "pronoun": "she"}, {"name": "ben", "pronoun": "he"}],
      "locations": ["bench", "fridge", "sink"],
      "objects": ["pipette", "sample"],
      "initial": {"agents": {"ana": "bench", "ben": "sink"},
                  "objects": {"pipette": "bench", "sample": "fridge"}},
      "goal": {"type": "obj_at", "object": "sample", "location": "bench"}
    },
    "source_text": ["Fetch the sample.", "Bring it to the bench."],
    "agent": "ana"
  })");
}

TEST(SessionConfig, Validation) {
  auto c = SessionConfig::from_json(lab_config());
  EXPECT_EQ(c.entities.agent_count(), 2);
  EXPECT_EQ(c.agent, AgentId{0});
  auto dup = lab_config();
  dup["world"]["objects"] = {"pipette", "bench"};
  EXPECT_THROW(SessionConfig::from_json(dup), InvalidConfig);
  auto no_text = lab_config();
  no_text["source_text"] = nlohmann::json::array();
  EXPECT_THROW(SessionConfig::from_json(no_text), InvalidConfig);
  auto bad_agent = lab_config();
  bad_agent["agent"] = "zed";
  EXPECT_THROW(SessionConfig::from_json(bad_agent), InvalidConfig);
}

TEST(Session, MinimalWorldObservationNamesLocation) {
  SessionManager m;
  auto id = m.create(nlohmann::json::parse(R"({
    "world": {"agents": ["ana"], "locations": ["bench"], "objects": [],
              "initial": {"agents": {"ana": "bench"}, "objects": {}}},
    "source_text": ["Wait."]})"));
  auto s = m.get(id);
  EXPECT_NE(s->observation(s->config().initial).find("bench"), std::string::npos);
}

TEST(Session, CommandsChangeStateAndReportErrors) {
  SessionManager m;
  auto id = m.create(lab_config());
  auto s = m.get(id);
  auto grab = m.execute(id, "grab the pipette", 0);
  ASSERT_TRUE(grab.ok) << grab.error;
  EXPECT_NE(grab.observation.find("picked up the pipette"), std::string::npos);
  EXPECT_TRUE(grab.delta.contains("objects"));
  const auto digest = s->state_json()["digest"];
  auto bad = m.execute(id, "grab the sample", std::nullopt);
  EXPECT_FALSE(bad.ok);
  EXPECT_EQ(bad.error_kind, "PreconditionViolation");
  EXPECT_FALSE(bad.hints.empty());
  EXPECT_LE(bad.hints.size(), 10U);
  EXPECT_EQ(s->state_json()["digest"], digest);
  EXPECT_EQ(m.execute(id, "fly to the moon", std::nullopt).error_kind, "ParseError");
  EXPECT_EQ(m.execute(id, "go to the moon", std::nullopt).error_kind, "UnknownEntity");
  EXPECT_EQ(m.execute(id, "go to the fridge", 7).error_kind, "InvalidSegment");
  EXPECT_THROW(m.get("s-none"), SessionNotFound);
}

TEST(Session, GoalAndCoverage) {
  SessionManager m;
  auto id = m.create(lab_config());
  EXPECT_TRUE(m.execute(id, "go to the fridge", 0).ok);
  EXPECT_TRUE(m.execute(id, "take the sample", 0).ok);
  EXPECT_TRUE(m.execute(id, "move(ana, bench)", 1).ok);
  auto drop = m.execute(id, "drop the sample", 1);
  EXPECT_TRUE(drop.goal_reached);
  auto state = m.get(id)->state_json();
  EXPECT_EQ(state["covered_segments"], nlohmann::ordered_json({0, 1}));
  EXPECT_EQ(state["steps"], 4);
}

TEST(Session, ExportsAndReplays) {
  SessionManager m;
  auto id = m.create(lab_config());
  auto s = m.get(id);
  EXPECT_EQ(s->export_trace(ExportFormat::Program), "");
  auto empty = action_graph_from_json(nlohmann::json::parse(s->export_trace(ExportFormat::ActionGraph)));
  EXPECT_EQ(empty.nodes.size(), 7U);
  EXPECT_TRUE(empty.edges.empty());

  m.execute(id, "grab the pipette", std::nullopt);
  m.execute(id, "go to the sink", std::nullopt);
  auto graph = action_graph_from_json(nlohmann::json::parse(s->export_trace(ExportFormat::ActionGraph)));
  int action_nodes = 0, temporal = 0;
  for (const auto& n : graph.nodes) action_nodes += n.kind == "action";
  for (const auto& e : graph.edges) temporal += e.type == "temporal";
  EXPECT_EQ(action_nodes, 2);
  EXPECT_EQ(temporal, 1);

  const auto& decl = s->config().entities;
  WorldState state = s->config().initial;
  std::istringstream program(s->export_trace(ExportFormat::Program));
  for (std::string line; std::getline(program, line);) {
    state = apply_statement(decl, state, {to_event(parse_program_line(decl, line))});
  }
  EXPECT_EQ(state_digest(decl, state), s->state_json()["digest"]);

  std::istringstream trace(s->export_trace(ExportFormat::TraceJsonl));
  int rows = 0;
  for (std::string line; std::getline(trace, line); ++rows) {
    auto step = trace_step_from_json(decl, nlohmann::json::parse(line));
    EXPECT_EQ(step.index, rows);
  }
  EXPECT_EQ(rows, 2);
  EXPECT_EQ(export_format_from_string("action-graph"), ExportFormat::ActionGraph);
  EXPECT_FALSE(export_format_from_string("xml"));
}

TEST(Session, GraphIsInvertible) {
  auto c = SessionConfig::from_json(lab_config());
  const AgentId ana{0}, ben{1};
  std::vector<Action> actions = {Grab{ana, ObjectId{0}}, CoMove{ana, ben, LocationId{1}},
                                 Give{ana, ben, ObjectId{0}}, Drop{ben, ObjectId{0}},
                                 Move{ben, LocationId{2}}};
  auto graph = build_action_graph(c.entities, actions);
  EXPECT_EQ(actions_from_graph(c.entities, graph), actions);
  auto json = action_graph_to_json(graph);
  EXPECT_EQ(actions_from_graph(c.entities, action_graph_from_json(json)), actions);
  graph.edges.pop_back();
  EXPECT_THROW(actions_from_graph(c.entities, graph), InvalidConfig);
}

TEST(Session, SessionsAreIsolated) {
  SessionManager m;
  auto a = m.create(lab_config());
  auto b = m.create(lab_config());
  EXPECT_NE(a, b);
  const auto before = m.get(b)->state_json()["digest"];
  EXPECT_TRUE(m.execute(a, "grab the pipette", std::nullopt).ok);
  EXPECT_EQ(m.get(b)->state_json()["digest"], before);
  EXPECT_NE(m.get(a)->state_json()["digest"], before);
}

TEST(Session, ListenersReceiveSteps) {
  SessionManager m;
  auto id = m.create(lab_config());
  std::vector<nlohmann::ordered_json> seen;
  auto token = m.get(id)->subscribe([&](const nlohmann::ordered_json& msg) { seen.push_back(msg); });
  m.execute(id, "grab the pipette", std::nullopt);
  m.execute(id, "grab the pipette", std::nullopt);
  m.get(id)->unsubscribe(token);
  m.execute(id, "go to the sink", std::nullopt);
  ASSERT_EQ(seen.size(), 1U);
  EXPECT_EQ(seen[0]["type"], "step");
  EXPECT_EQ(seen[0]["step"], 0);
}

TEST(Session, LogsAreRecovered) {
  auto dir = std::filesystem::temp_directory_path() / "microworld_session_test";
  std::filesystem::remove_all(dir);
  std::string id, digest;
  {
    SessionManager m(dir);
    id = m.create(lab_config());
    m.execute(id, "grab the pipette", 0);
    m.execute(id, "go to the fridge", 1);
    digest = m.get(id)->state_json()["digest"];
  }
  {
    std::ofstream torn(dir / (id + ".jsonl"), std::ios::app);
    torn << R"({"type": "step", "ste)";
  }
  SessionManager again(dir);
  EXPECT_EQ(again.recovered(), 1U);
  EXPECT_EQ(again.get(id)->state_json()["digest"], digest);
  EXPECT_EQ(again.get(id)->snapshot().trace.size(), 2U);
  std::filesystem::remove_all(dir);
}

TEST(Routes, HttpContract) {
  SessionManager m;
  EXPECT_EQ(handle_request(m, "GET", "/v1/health", "").status, 200);
  auto created = handle_request(m, "POST", "/v1/sessions", lab_config().dump());
  ASSERT_EQ(created.status, 201);
  const auto id = nlohmann::json::parse(created.body)["id"].get<std::string>();
  const auto base = "/v1/sessions/" + id;
  auto ok = handle_request(m, "POST", base + "/command", R"({"text": "grab the pipette"})");
  EXPECT_EQ(ok.status, 200);
  auto bad = handle_request(m, "POST", base + "/command", R"({"text": "grab the sample"})");
  EXPECT_EQ(bad.status, 422);
  EXPECT_FALSE(nlohmann::json::parse(bad.body)["hints"].empty());
  EXPECT_EQ(handle_request(m, "POST", base + "/command", R"({"txt": 1})").status, 400);
  EXPECT_EQ(handle_request(m, "GET", base + "/state", "").status, 200);
  EXPECT_EQ(handle_request(m, "GET", base + "/legal", "").status, 200);
  auto program = handle_request(m, "GET", base + "/trace?format=program", "");
  EXPECT_EQ(program.body, "grab(ana, pipette)\n");
  EXPECT_EQ(handle_request(m, "GET", base + "/trace?format=xml", "").status, 400);
  EXPECT_EQ(handle_request(m, "GET", "/v1/sessions/bad", "").status, 404);
  EXPECT_EQ(handle_request(m, "GET", "/v2/x", "").status, 404);
  EXPECT_EQ(handle_request(m, "DELETE", base + "/state", "").status, 405);
  EXPECT_EQ(handle_request(m, "POST", "/v1/sessions", "{}").status, 400);
}

}  // namespace
}  // namespace mw
