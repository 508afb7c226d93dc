#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "microworld/errors.hpp"
#include "microworld/eval.hpp"
#include "microworld/rng.hpp"
#include "rank_oracle.hpp"

namespace mw {
namespace {

std::vector<Story> tiny_dataset() {
  TaskSpec spec;
  spec.agents = 2;
  spec.objects = 2;
  spec.locations = 3;
  spec.statements = {StatementKind::Move, StatementKind::Grab};
  spec.questions = {QuestionType::WhereAgent, QuestionType::List};
  spec.questions_per_story = 2;
  return sample_stories(spec, 2, 3, "t");
}

std::vector<Prediction> gold_predictions(const std::vector<Story>& data) {
  std::vector<Prediction> out;
  for (const auto& s : data) {
    for (const auto& q : s.questions) out.push_back({s.id, q.position, q.answer, q.supporting});
  }
  return out;
}

TEST(Score, GoldAsPredictionsIsPerfect) {
  auto data = tiny_dataset();
  auto preds = gold_predictions(data);
  auto r = score(data, preds);
  EXPECT_EQ(r.overall.total, 4U);
  EXPECT_DOUBLE_EQ(r.overall.value(), 1.0);
  ASSERT_TRUE(r.supporting);
  EXPECT_DOUBLE_EQ(r.supporting->f1, 1.0);
}

TEST(Score, HalfCorrectAndMissingCountWrong) {
  auto data = tiny_dataset();
  auto preds = gold_predictions(data);
  preds[1].answer = "wrong";
  preds.pop_back();
  auto r = score(data, preds);
  EXPECT_DOUBLE_EQ(r.overall.value(), 0.5);
  EXPECT_EQ(r.missing, 1U);
}

TEST(Score, SupportingFactsExample) {
  auto data = tiny_dataset();
  std::vector<Prediction> one = {{data[0].id, data[0].questions[0].position,
                                  data[0].questions[0].answer, std::vector<int>{0, 2}}};
  data[0].questions[0].supporting = {0, 1};
  auto r = score(data, one);
  ASSERT_TRUE(r.supporting);
  EXPECT_DOUBLE_EQ(r.supporting->precision, 0.5);
  EXPECT_DOUBLE_EQ(r.supporting->recall, 0.5);
  EXPECT_DOUBLE_EQ(r.supporting->f1, 0.5);
  one[0].supporting = std::vector<int>{5};
  EXPECT_DOUBLE_EQ(score(data, one).supporting->f1, 0.0);
}

TEST(Score, RejectsUnknownAndDuplicateRows) {
  auto data = tiny_dataset();
  auto preds = gold_predictions(data);
  auto dup = preds;
  dup.push_back(preds[0]);
  EXPECT_THROW(score(data, dup), DuplicatePrediction);
  auto stray = preds;
  stray.push_back({"ghost", 0, "x", std::nullopt});
  EXPECT_THROW(score(data, stray), UnresolvedId);
}

TEST(ScoreProperty, RowOrderDoesNotMatter) {
  auto data = tiny_dataset();
  auto preds = gold_predictions(data);
  preds[0].answer = "wrong";
  Rng rng(1);
  const auto base = score(data, preds);
  for (int i = 0; i < 20; ++i) {
    rng.shuffle(std::span(preds));
    auto r = score(data, preds);
    EXPECT_EQ(r.overall.correct, base.overall.correct);
    EXPECT_DOUBLE_EQ(r.supporting->f1, base.supporting->f1);
    EXPECT_GE(r.overall.value(), 0.0);
    EXPECT_LE(r.overall.value(), 1.0);
  }
}

TEST(Answers, NormalizationAndListMatching) {
  EXPECT_EQ(normalize_answer("  The  Kitchen "), "the kitchen");
  EXPECT_TRUE(answers_match(QuestionType::WhereAgent, "kitchen", "Kitchen"));
  EXPECT_TRUE(answers_match(QuestionType::List, "apple,milk", "apple, milk"));
  EXPECT_FALSE(answers_match(QuestionType::List, "apple,milk", "milk,apple"));
}

TEST(Predictions, ReadJsonLines) {
  std::istringstream in(
      R"({"id": "a", "position": 2, "answer": "kitchen", "supporting": [0, 1]})"
      "\n"
      R"({"id": "a", "labels": [["T"]]})"
      "\n");
  auto rows = read_predictions(in);
  ASSERT_EQ(rows.size(), 1U);
  EXPECT_EQ(rows[0].answer, "kitchen");
  EXPECT_EQ(rows[0].supporting, (std::vector<int>{0, 1}));
}

TEST(Concurrence, Examples) {
  std::vector<double> a = {0.9, 0.5, 0.7, 0.2};
  std::vector<double> rev = {0.1, 0.5, 0.3, 0.8};
  EXPECT_DOUBLE_EQ(concurrence(a, a), 1.0);
  EXPECT_DOUBLE_EQ(concurrence(a, rev), -1.0);
  std::vector<double> x = {0.9, 0.5, 0.7}, y = {0.8, 0.6, 0.4};
  // Pairs (0,1) and (0,2) agree, (1,2) disagrees.
  EXPECT_NEAR(concurrence(x, y), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(concurrence(x, y), oracle::tau_b_pairs(x, y), 1e-15);
}

TEST(Concurrence, Preconditions) {
  std::vector<double> one = {0.5}, flat = {0.5, 0.5, 0.5}, three = {0.1, 0.2, 0.3};
  EXPECT_THROW(concurrence(one, one), TooFewModels);
  EXPECT_THROW(concurrence(flat, three), ConstantColumn);
  std::vector<double> two = {0.1, 0.2};
  EXPECT_THROW(concurrence(two, three), ShapeMismatch);
}

TEST(ConcurrenceProperty, MatchesPairCountingWithTies) {
  Rng rng(11);
  for (int run = 0; run < 500; ++run) {
    const std::size_t n = 2 + rng.below(40);
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = static_cast<double>(rng.below(6)) / 5;
    for (auto& v : b) v = static_cast<double>(rng.below(6)) / 5;
    if (std::all_of(a.begin(), a.end(), [&](double v) { return v == a[0]; })) continue;
    if (std::all_of(b.begin(), b.end(), [&](double v) { return v == b[0]; })) continue;
    EXPECT_NEAR(kendall_tau_b(a, b), oracle::tau_b_pairs(a, b), 1e-12);
  }
}

TEST(ConcurrenceProperty, SymmetricAndMonotoneInvariant) {
  Rng rng(12);
  for (int run = 0; run < 200; ++run) {
    std::vector<double> a(8), b(8);
    for (auto& v : a) v = static_cast<double>(rng.below(1000)) / 1000;
    for (auto& v : b) v = static_cast<double>(rng.below(10)) / 10;
    if (std::all_of(b.begin(), b.end(), [&](double v) { return v == b[0]; })) continue;
    const double base = concurrence(a, b);
    EXPECT_DOUBLE_EQ(concurrence(b, a), base);
    std::vector<double> ta, tb;
    for (double v : a) ta.push_back(std::exp(3 * v) - 7);
    for (double v : b) tb.push_back(v * v * v);
    EXPECT_DOUBLE_EQ(concurrence(ta, tb), base);
  }
}

TEST(ScoreTable, CsvAndMatrix) {
  std::istringstream in("model,task,accuracy\nm1,t1,0.9\nm1,t2,0.8\nm2,t1,0.5\nm2,t2,0.6\n"
                        "m3,t1,0.7\nm3,t2,0.4\n");
  auto table = read_score_table(in);
  EXPECT_EQ(table.models.size(), 3U);
  EXPECT_EQ(table.column(1), (std::vector<double>{0.8, 0.6, 0.4}));
  std::vector<ScoreTable> one = {table};
  std::vector<std::string> names = {"bench"};
  auto m = concurrence_matrix(one, names);
  ASSERT_EQ(m.names, (std::vector<std::string>{"t1", "t2"}));
  EXPECT_DOUBLE_EQ(m.values[0][0], 1.0);
  EXPECT_NEAR(m.values[0][1], 1.0 / 3.0, 1e-15);
  std::vector<ScoreTable> pair = {table, table};
  std::vector<std::string> two = {"a", "b"};
  EXPECT_DOUBLE_EQ(concurrence_matrix(pair, two).values[0][1], 1.0);
  std::istringstream bad("m1,t1,high\n");
  EXPECT_THROW(read_score_table(bad), InvalidConfig);
}

TEST(Pearson, IsAvailableBehindTheMethodSwitch) {
  std::vector<double> a = {1, 2, 3, 4}, b = {2, 4, 6, 8.5};
  EXPECT_NEAR(concurrence(a, a, Correlation::Pearson), 1.0, 1e-12);
  EXPECT_GT(pearson(a, b), 0.99);
}

}  // namespace
}  // namespace mw
