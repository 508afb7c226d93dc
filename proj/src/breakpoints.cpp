#include "microworld/breakpoints.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <tuple>

#include "microworld/belief.hpp"
#include "microworld/errors.hpp"
#include "microworld/rng.hpp"

namespace mw {

namespace {

struct BugCandidate {
  Action action;
  std::vector<Proposition> affected;
  std::vector<int> provenance;
};

std::vector<BugCandidate> bug_candidates(const Declaration& decl, const BeliefState& belief) {
  std::vector<BugCandidate> out;
  auto prov_of = [&](const std::vector<Proposition>& props) {
    std::vector<int> prov;
    for (const auto& p : props) prov = merge_indices(prov, belief.label_provenance(p));
    return prov;
  };
  auto add = [&](Action action, std::vector<Proposition> affected) {
    auto prov = prov_of(affected);
    out.push_back({action, std::move(affected), std::move(prov)});
  };
  for (int oi = 0; oi < decl.object_count(); ++oi) {
    const ObjectId o{oi};
    const auto carrier = belief.carrier(o);
    for (int ai = 0; ai < decl.agent_count(); ++ai) {
      const AgentId a{ai};
      if (carrier != a) {
        add(Drop{a, o}, {Holds{a, o}});
        for (int bi = 0; bi < decl.agent_count(); ++bi) {
          if (bi != ai) add(Give{a, AgentId{bi}, o}, {Holds{a, o}});
        }
      }
      if (carrier) {
        add(Grab{a, o}, {Holds{*carrier, o}});
      } else {
        auto la = belief.possible_locations(a).only();
        auto lo = belief.possible_locations(o).only();
        if (la && lo && *la != *lo) add(Grab{a, o}, {At{a, *la}, ObjAt{o, *lo}});
      }
    }
    if (carrier) {
      const auto lg = belief.possible_locations(*carrier).only();
      for (int bi = 0; bi < decl.agent_count() && lg; ++bi) {
        const AgentId b{bi};
        const auto lr = belief.possible_locations(b).only();
        if (b != *carrier && lr && *lr != *lg) {
          add(Give{*carrier, b, o}, {At{*carrier, *lg}, At{b, *lr}});
        }
      }
    }
  }
  for (int ai = 0; ai < decl.agent_count(); ++ai) {
    const AgentId a{ai};
    if (auto la = belief.possible_locations(a).only()) add(Move{a, *la}, {At{a, *la}});
  }
  return out;
}

std::vector<std::string> texts(const Story& story) {
  std::vector<std::string> out;
  for (const auto& s : story.sentences) out.push_back(s.text);
  return out;
}

Label parse_label(const nlohmann::json& v) {
  const auto s = v.get<std::string>();
  if (s.size() != 1 || (s[0] != 'T' && s[0] != 'F' && s[0] != 'U')) {
    throw InvalidConfig("labels: expected T, F or U, got \"" + s + "\"");
  }
  return label_from_code(s[0]);
}

}  // namespace

std::vector<Proposition> proposition_universe(const Declaration& decl) {
  using Key = std::tuple<int, std::string, std::string>;
  std::vector<std::pair<Key, Proposition>> keyed;
  for (int a = 0; a < decl.agent_count(); ++a) {
    for (int l = 0; l < decl.location_count(); ++l) {
      keyed.push_back({{0, decl.name(AgentId{a}), decl.name(LocationId{l})},
                       At{AgentId{a}, LocationId{l}}});
    }
  }
  for (int a = 0; a < decl.agent_count(); ++a) {
    for (int o = 0; o < decl.object_count(); ++o) {
      keyed.push_back({{1, decl.name(AgentId{a}), decl.name(ObjectId{o})},
                       Holds{AgentId{a}, ObjectId{o}}});
    }
  }
  for (int o = 0; o < decl.object_count(); ++o) {
    for (int l = 0; l < decl.location_count(); ++l) {
      keyed.push_back({{2, decl.name(ObjectId{o}), decl.name(LocationId{l})},
                       ObjAt{ObjectId{o}, LocationId{l}}});
    }
  }
  std::sort(keyed.begin(), keyed.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<Proposition> out;
  for (auto& [key, prop] : keyed) out.push_back(prop);
  return out;
}

Proposition parse_proposition(const Declaration& decl, std::string_view text) {
  const std::string original(text);
  const auto open = text.find('(');
  const auto comma = text.find(',');
  if (open == std::string_view::npos || comma == std::string_view::npos || text.back() != ')') {
    throw ParseError(0, "Kind(first,second)", original);
  }
  const auto kind = text.substr(0, open);
  const std::string first(text.substr(open + 1, comma - open - 1));
  const std::string second(text.substr(comma + 1, text.size() - comma - 2));
  auto agent = [&] {
    if (auto a = decl.find_agent(first)) return *a;
    throw UnknownEntity(first, "agent");
  };
  auto location = [&] {
    if (auto l = decl.find_location(second)) return *l;
    throw UnknownEntity(second, "location");
  };
  if (kind == "At") return At{agent(), location()};
  if (kind == "Holds") {
    auto o = decl.find_object(second);
    if (!o) throw UnknownEntity(second, "object");
    return Holds{agent(), *o};
  }
  if (kind == "ObjAt") {
    auto o = decl.find_object(first);
    if (!o) throw UnknownEntity(first, "object");
    return ObjAt{*o, location()};
  }
  throw ParseError(0, "At, Holds or ObjAt", original);
}

BreakpointAnnotation annotate(const Story& story) {
  const auto& decl = story.entities;
  const auto universe = proposition_universe(decl);
  BreakpointAnnotation out;
  out.story_id = story.id;
  for (const auto& p : universe) out.universe.push_back(to_string(decl, p));
  BeliefState belief(decl);
  for (const auto& s : story.statements) {
    belief.apply(decl, s);
    std::vector<Label> row;
    row.reserve(universe.size());
    for (const auto& p : universe) row.push_back(belief.label(p));
    out.labels.push_back(std::move(row));
  }
  return out;
}

PlausibilityInstance passthrough_instance(const Story& story) {
  PlausibilityInstance out;
  out.id = story.id;
  out.sentences = texts(story);
  return out;
}

PlausibilityInstance inject_implausibility(const Story& story, std::uint64_t seed,
                                           const Lexicon& lex) {
  const auto& decl = story.entities;
  const int n = static_cast<int>(story.statements.size());
  if (n < 2) throw NoInjectionSite(story.id + ": needs at least two statements");
  std::vector<BeliefState> prefix{BeliefState(decl)};
  for (const auto& s : story.statements) {
    prefix.push_back(prefix.back());
    prefix.back().apply(decl, s);
  }
  Rng rng(seed);
  std::vector<int> positions(n);
  for (int j = 1; j <= n; ++j) positions[j - 1] = j;
  rng.shuffle(std::span<int>(positions));

  std::optional<std::pair<int, BugCandidate>> chosen;
  for (bool degenerate : {false, true}) {
    for (int j : positions) {
      auto all = bug_candidates(decl, prefix[j]);
      std::vector<BugCandidate> pick;
      for (auto& c : all) {
        if (c.provenance.empty() == degenerate) pick.push_back(std::move(c));
      }
      if (!pick.empty()) {
        chosen.emplace(j, std::move(pick[rng.below(pick.size())]));
        break;
      }
    }
    if (chosen) break;
  }
  if (!chosen) throw NoInjectionSite(story.id + ": no position admits a provable violation");

  const auto& [j, bug] = *chosen;
  PlausibilityInstance out;
  out.id = story.id;
  for (int k = 0; k < j; ++k) out.sentences.push_back(story.sentences.at(k).text);
  const Statement stmt{to_event(bug.action), j, false};
  out.sentences.push_back(render(stmt, lex, decl, rng.next(), CorefContext::none()).text);
  out.plausible = false;
  out.bug_index = j;
  out.degenerate = bug.provenance.empty();
  out.conflict_pair = {out.degenerate ? j : bug.provenance.back(), j};
  for (const auto& p : bug.affected) out.affected.push_back(to_string(decl, p));
  return out;
}

ConflictResult detect_conflict(std::span<const std::string> sentences, const Lexicon& lex,
                               const Declaration& entities) {
  BeliefState belief(entities);
  ParseContext context;
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    context.index = static_cast<int>(k);
    auto parsed = parse_sentence(sentences[k], lex, entities, context);
    const auto* stmt = std::get_if<Statement>(&parsed.value);
    if (!stmt || parsed.form != SentenceForm::Narration) {
      throw ParseError(0, "a narrative statement", sentences[k]);
    }
    try {
      belief.apply(entities, *stmt);
    } catch (const Contradiction& c) {
      ConflictResult out;
      out.plausible = false;
      const int j = static_cast<int>(k);
      out.degenerate = c.evidence().empty();
      out.conflict_pair = {out.degenerate ? j : c.evidence().back(), j};
      out.reason = c.reason();
      return out;
    }
    context.coref = CorefContext::after(*stmt);
  }
  return {};
}

BreakpointMetrics score_breakpoints(std::span<const BreakpointAnnotation> gold,
                                    std::span<const BreakpointAnnotation> predicted) {
  std::map<std::string, const BreakpointAnnotation*> by_id;
  for (const auto& p : predicted) {
    if (!by_id.emplace(p.story_id, &p).second) {
      throw DuplicatePrediction("duplicate breakpoint grid for story " + p.story_id);
    }
  }
  std::set<std::string> gold_ids;
  for (const auto& g : gold) gold_ids.insert(g.story_id);
  for (const auto& [id, p] : by_id) {
    if (!gold_ids.count(id)) throw UnresolvedId("no gold story with id " + id);
  }
  std::array<std::array<std::size_t, 3>, 3> confusion{};  // [gold][predicted]
  std::size_t cells = 0;
  for (const auto& g : gold) {
    auto it = by_id.find(g.story_id);
    if (it == by_id.end()) throw UnresolvedId("no breakpoint prediction for story " + g.story_id);
    const auto& p = *it->second;
    if (p.universe != g.universe || p.labels.size() != g.labels.size()) {
      throw ShapeMismatch(g.story_id + ": predicted grid does not match the gold shape");
    }
    for (std::size_t t = 0; t < g.labels.size(); ++t) {
      if (p.labels[t].size() != g.labels[t].size()) {
        throw ShapeMismatch(g.story_id + ": row " + std::to_string(t) + " has the wrong length");
      }
      for (std::size_t k = 0; k < g.labels[t].size(); ++k) {
        ++confusion[static_cast<int>(g.labels[t][k])][static_cast<int>(p.labels[t][k])];
        ++cells;
      }
    }
  }
  BreakpointMetrics m;
  m.cells = cells;
  std::size_t correct = 0;
  for (int l = 0; l < 3; ++l) correct += confusion[l][l];
  m.accuracy = cells ? static_cast<double>(correct) / static_cast<double>(cells) : 0.0;
  double f1_sum = 0.0;
  int present = 0;
  for (int l = 0; l < 3; ++l) {
    std::size_t gold_count = 0, pred_count = 0;
    for (int k = 0; k < 3; ++k) {
      gold_count += confusion[l][k];
      pred_count += confusion[k][l];
    }
    LabelMetrics lm;
    lm.support = gold_count;
    const double tp = static_cast<double>(confusion[l][l]);
    lm.precision = pred_count ? tp / static_cast<double>(pred_count) : 0.0;
    lm.recall = gold_count ? tp / static_cast<double>(gold_count) : 0.0;
    lm.f1 = lm.precision + lm.recall > 0 ? 2 * lm.precision * lm.recall / (lm.precision + lm.recall)
                                         : 0.0;
    m.per_label[static_cast<Label>(l)] = lm;
    if (gold_count || pred_count) {
      f1_sum += lm.f1;
      ++present;
    }
  }
  m.macro_f1 = present ? f1_sum / present : 0.0;
  return m;
}

BreakpointMetrics score_breakpoints(const BreakpointAnnotation& gold,
                                    const BreakpointAnnotation& predicted) {
  if (gold.story_id != predicted.story_id) {
    throw ShapeMismatch("grids belong to different stories: " + gold.story_id + " and " +
                        predicted.story_id);
  }
  return score_breakpoints(std::span(&gold, 1), std::span(&predicted, 1));
}

nlohmann::ordered_json breakpoints_to_json(const BreakpointAnnotation& annotation) {
  nlohmann::ordered_json j;
  j["id"] = annotation.story_id;
  j["universe"] = annotation.universe;
  auto& rows = j["labels"] = nlohmann::ordered_json::array();
  for (const auto& row : annotation.labels) {
    auto& out = rows.emplace_back(nlohmann::ordered_json::array());
    for (auto l : row) out.push_back(std::string(1, label_code(l)));
  }
  return j;
}

BreakpointAnnotation breakpoints_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("id") || !doc.contains("labels")) {
    throw InvalidConfig("breakpoint grid: expected {\"id\", \"universe\", \"labels\"}");
  }
  BreakpointAnnotation out;
  out.story_id = doc.at("id").get<std::string>();
  out.universe = doc.value("universe", std::vector<std::string>{});
  for (const auto& row : doc.at("labels")) {
    std::vector<Label> labels;
    if (row.is_string()) {
      for (char c : row.get<std::string>()) labels.push_back(parse_label(std::string(1, c)));
    } else {
      for (const auto& v : row) labels.push_back(parse_label(v));
    }
    out.labels.push_back(std::move(labels));
  }
  return out;
}

nlohmann::ordered_json plausibility_to_json(const PlausibilityInstance& instance) {
  nlohmann::ordered_json j;
  j["id"] = instance.id;
  j["sentences"] = instance.sentences;
  j["plausible"] = instance.plausible;
  j["bug_index"] = instance.bug_index ? nlohmann::ordered_json(*instance.bug_index)
                                      : nlohmann::ordered_json(nullptr);
  if (instance.conflict_pair) {
    j["conflict_pair"] = {instance.conflict_pair->first, instance.conflict_pair->second};
  } else {
    j["conflict_pair"] = nullptr;
  }
  j["degenerate"] = instance.degenerate;
  j["affected"] = instance.affected;
  return j;
}

PlausibilityInstance plausibility_from_json(const nlohmann::json& doc) {
  PlausibilityInstance out;
  out.id = doc.at("id").get<std::string>();
  out.sentences = doc.at("sentences").get<std::vector<std::string>>();
  out.plausible = doc.at("plausible").get<bool>();
  if (doc.contains("bug_index") && !doc.at("bug_index").is_null()) {
    out.bug_index = doc.at("bug_index").get<int>();
  }
  if (doc.contains("conflict_pair") && !doc.at("conflict_pair").is_null()) {
    const auto& p = doc.at("conflict_pair");
    out.conflict_pair = std::pair{p.at(0).get<int>(), p.at(1).get<int>()};
  }
  out.degenerate = doc.value("degenerate", false);
  out.affected = doc.value("affected", std::vector<std::string>{});
  return out;
}

}  // namespace mw
