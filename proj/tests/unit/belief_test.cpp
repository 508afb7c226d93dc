#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "fixtures.hpp"
#include "microworld/belief.hpp"
#include "microworld/breakpoints.hpp"
#include "microworld/enumerate.hpp"
#include "microworld/errors.hpp"
#include "oracle.hpp"

namespace mw {
namespace {

const AgentId mary{0}, john{1};
const LocationId kitchen{0}, garden{1}, office{2};
const ObjectId apple{0};

BeliefState read(const Declaration& decl, std::span<const Statement> statements) {
  BeliefState b(decl);
  for (const auto& s : statements) b.apply(decl, s);
  return b;
}

TEST(Belief, StatedMoveIsEntailed) {
  auto decl = fixtures::people(2, 3, 1);
  BeliefState b(decl);
  b = update_belief(decl, b, {Move{mary, kitchen}, 0});
  EXPECT_EQ(b.possible_locations(mary), LocationSet::single(kitchen));
  EXPECT_EQ(b.label(At{mary, kitchen}), Label::True);
}

TEST(Belief, NegationOfKnownLocationContradicts) {
  auto decl = fixtures::people(2, 3, 1);
  BeliefState b = update_belief(decl, BeliefState(decl), {Move{mary, kitchen}, 0});
  try {
    update_belief(decl, b, {Negation{mary, kitchen}, 1});
    FAIL() << "expected Contradiction";
  } catch (const Contradiction& c) {
    EXPECT_EQ(c.statement_index(), 1);
    EXPECT_EQ(c.evidence(), std::vector<int>{0});
  }
}

TEST(Belief, NegationNarrowsUnknownLocation) {
  auto decl = fixtures::people(2, 3, 1);
  BeliefState b = update_belief(decl, BeliefState(decl), {Negation{mary, kitchen}, 0});
  EXPECT_EQ(b.possible_locations(mary).members(), (std::vector<LocationId>{garden, office}));
}

TEST(Belief, LabelExamples) {
  auto decl = fixtures::people(2, 3, 1);
  BeliefState empty(decl);
  EXPECT_EQ(empty.label(At{mary, kitchen}), Label::Unknown);
  // Move away then negate: mary left the kitchen for an unstated place.
  std::vector<Statement> s = {{Move{mary, kitchen}, 0}, {Move{mary, garden}, 1},
                              {Negation{mary, kitchen}, 2}};
  auto b = read(decl, s);
  EXPECT_EQ(b.label(At{mary, kitchen}), Label::False);
  EXPECT_EQ(b.label(At{mary, garden}), Label::True);

  BeliefState n = read(decl, std::vector<Statement>{{Negation{mary, kitchen}, 0}});
  EXPECT_EQ(n.label(At{mary, kitchen}), Label::False);
  EXPECT_EQ(n.label(At{mary, garden}), Label::Unknown);
}

TEST(Belief, ObjectFollowsCarrierWithProvenance) {
  auto decl = fixtures::people(2, 3, 1);
  std::vector<Statement> s = {{Move{john, office}, 0}, {Grab{mary, apple}, 1},
                              {Move{mary, garden}, 2}};
  auto b = read(decl, s);
  EXPECT_EQ(b.label(ObjAt{apple, garden}), Label::True);
  EXPECT_EQ(b.label(Holds{mary, apple}), Label::True);
  EXPECT_EQ(b.label(Holds{john, apple}), Label::False);
  EXPECT_EQ(b.label_provenance(ObjAt{apple, garden}), (std::vector<int>{1, 2}));
}

TEST(Belief, DroppedObjectSharesUnknownLocation) {
  auto decl = fixtures::people(2, 3, 1);
  std::vector<Statement> s = {{Grab{mary, apple}, 0}, {Drop{mary, apple}, 1}};
  auto b = read(decl, s);
  EXPECT_EQ(b.location_class(mary), b.location_class(apple));
  EXPECT_EQ(b.label(ObjAt{apple, kitchen}), Label::Unknown);
  b.apply(decl, {LocationFact{mary, office}, 2});
  EXPECT_EQ(b.label(ObjAt{apple, office}), Label::True);
}

TEST(Enumerate, Examples) {
  auto one = fixtures::people(1, 2, 0);
  EXPECT_EQ(enumerate_worlds(one, {}).size(), 2U);
  std::vector<Statement> move = {{Move{mary, kitchen}, 0}};
  auto worlds = enumerate_worlds(one, move);
  ASSERT_EQ(worlds.size(), 1U);  // mary cannot already be in the kitchen
  EXPECT_EQ(worlds[0].back().agent_location[0], kitchen);

  auto two = fixtures::people(2, 3, 0);
  std::vector<Statement> s = {{Move{mary, kitchen}, 0}, {Negation{mary, kitchen}, 1}};
  EXPECT_TRUE(enumerate_worlds(two, s).empty());
  std::vector<Statement> t = {{Move{mary, kitchen}, 0}, {Move{mary, garden}, 1},
                              {Negation{mary, kitchen}, 2}};
  std::set<int> finals;
  for (const auto& w : enumerate_worlds(two, t)) finals.insert(w.back().agent_location[0].value);
  EXPECT_EQ(finals, std::set<int>{garden.value});
  std::vector<Statement> u = {{Negation{mary, kitchen}, 0}};
  finals.clear();
  for (const auto& w : enumerate_worlds(two, u)) finals.insert(w.back().agent_location[0].value);
  EXPECT_EQ(finals, (std::set<int>{garden.value, office.value}));
}

TEST(Enumerate, RejectsOversizedInstances) {
  Declaration big({{"a", ""}, {"b", ""}, {"c", ""}, {"d", ""}, {"e", ""}}, {"x"}, {});
  EXPECT_THROW(enumerate_worlds(big, {}), InstanceTooLarge);
  EXPECT_EQ(initial_state_count(fixtures::people(2, 3, 1)), 27U);
}

// The test oracle and the library enumerator agree on surviving final states.
TEST(Enumerate, AgreesWithTestOracle) {
  Rng rng(4);
  for (int run = 0; run < 200; ++run) {
    auto decl = fixtures::people(1 + rng.below(3), 2 + rng.below(2), 1 + rng.below(2));
    auto s = fixtures::random_statements(decl, 1 + rng.below(10), rng);
    if (rng.chance(0.3)) s.push_back({Negation{mary, LocationId{0}}, static_cast<int>(s.size())});
    std::multiset<std::pair<std::vector<int>, std::vector<int>>> a, b;
    for (const auto& t : enumerate_worlds(decl, s)) {
      auto w = oracle::from_state(t.back());
      a.insert({w.agent, w.place});
    }
    oracle::for_each_initial(decl.agent_count(), decl.location_count(), decl.object_count(),
                             [&](const oracle::World& start) {
                               auto w = start;
                               for (const auto& st : s) {
                                 if (!oracle::step(w, st.event)) return;
                               }
                               b.insert({w.agent, w.place});
                             });
    EXPECT_EQ(a, b);
  }
}

TEST(BeliefProperty, LabelsMatchBruteForceAtEveryPrefix) {
  Rng rng(5);
  for (int run = 0; run < 300; ++run) {
    auto decl = fixtures::people(1 + rng.below(3), 2 + rng.below(3), 1 + rng.below(2));
    auto s = fixtures::random_statements(decl, 1 + rng.below(15), rng);
    auto universe = proposition_universe(decl);
    auto expected = oracle::labels(decl, s, universe);
    ASSERT_EQ(expected.size(), s.size());
    BeliefState b(decl);
    for (std::size_t k = 0; k < s.size(); ++k) {
      b.apply(decl, s[k]);
      for (std::size_t i = 0; i < universe.size(); ++i) {
        ASSERT_EQ(b.label(universe[i]), expected[k][i])
            << "run " << run << " prefix " << k << " " << to_string(decl, universe[i]);
      }
    }
  }
}

TEST(BeliefProperty, GroundTruthIsNeverContradicted) {
  Rng rng(6);
  for (int run = 0; run < 200; ++run) {
    auto decl = fixtures::people(1 + rng.below(3), 2 + rng.below(3), 1 + rng.below(2));
    WorldState start;
    auto s = fixtures::random_statements(decl, 1 + rng.below(12), rng, &start);
    Trajectory truth{start};
    for (const auto& st : s) truth.push_back(apply_statement(decl, truth.back(), st));
    auto worlds = enumerate_worlds(decl, s);
    EXPECT_NE(std::find(worlds.begin(), worlds.end(), truth), worlds.end());
    BeliefState b(decl);
    for (std::size_t k = 0; k < s.size(); ++k) {
      b.apply(decl, s[k]);
      for (const auto& p : proposition_universe(decl)) {
        const auto l = b.label(p);
        if (l == Label::True) {
          EXPECT_TRUE(holds(truth[k + 1], p));
        }
        if (l == Label::False) {
          EXPECT_FALSE(holds(truth[k + 1], p));
        }
      }
    }
  }
}

// Possibility sets only change for mentioned entities, objects they carry,
// and entities already known to share a location with one of those.
TEST(BeliefProperty, UpdatesAreLocal) {
  Rng rng(7);
  for (int run = 0; run < 300; ++run) {
    auto decl = fixtures::people(2 + rng.below(2), 3 + rng.below(2), 1 + rng.below(3));
    auto s = fixtures::random_statements(decl, 2 + rng.below(15), rng);
    BeliefState b(decl);
    for (const auto& st : s) {
      const BeliefState before = b;
      b.apply(decl, st);
      std::set<int> classes;
      for (auto a : agents_of(st.event)) {
        classes.insert(before.location_class(a));
        for (int o = 0; o < decl.object_count(); ++o) {
          if (before.carrier(ObjectId{o}) == a) classes.insert(before.location_class(ObjectId{o}));
        }
      }
      if (auto o = object_of(st.event)) classes.insert(before.location_class(*o));
      for (int a = 0; a < decl.agent_count(); ++a) {
        if (classes.count(before.location_class(AgentId{a}))) continue;
        EXPECT_EQ(b.possible_locations(AgentId{a}), before.possible_locations(AgentId{a}));
      }
      for (int o = 0; o < decl.object_count(); ++o) {
        const ObjectId obj{o};
        if (classes.count(before.location_class(obj))) continue;
        EXPECT_EQ(b.possible_locations(obj), before.possible_locations(obj));
        EXPECT_EQ(b.carrier(obj), before.carrier(obj));
      }
    }
  }
}

TEST(BeliefProperty, ContradictionLeavesStateUnchanged) {
  auto decl = fixtures::people(2, 3, 1);
  BeliefState b = read(decl, std::vector<Statement>{{Grab{mary, apple}, 0}});
  const BeliefState before = b;
  EXPECT_THROW(b.apply(decl, {Grab{john, apple}, 1}), Contradiction);
  EXPECT_EQ(b.carrier(apple), before.carrier(apple));
  EXPECT_EQ(b.statements_read(), before.statements_read());
}

}  // namespace
}  // namespace mw
