#pragma once

// Answer scoring and benchmark concurrence.

#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "microworld/taskgen.hpp"

namespace mw {

struct Prediction {
  std::string story_id;
  int position = 0;
  std::string answer;
  std::optional<std::vector<int>> supporting;
};

// JSON Lines rows {"id", "position", "answer", "supporting"?}. Rows carrying
// "labels" are breakpoint grids and are skipped here.
std::vector<Prediction> read_predictions(std::istream& in);

// Case-folded, whitespace-collapsed form used for exact matching.
std::string normalize_answer(std::string_view text);
bool answers_match(QuestionType type, std::string_view gold, std::string_view predicted);

struct Accuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double value() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

struct SupportMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t questions = 0;  // questions whose prediction listed supporting facts
};

struct ScoreReport {
  Accuracy overall;
  std::map<QuestionType, Accuracy> per_type;
  std::optional<SupportMetrics> supporting;
  std::size_t missing = 0;  // gold questions without a prediction
};

// Every gold question counts; unanswered ones are wrong. Throws UnresolvedId
// and DuplicatePrediction.
ScoreReport score(std::span<const Story> dataset, std::span<const Prediction> predictions);

// Model x task accuracy matrix.
struct ScoreTable {
  std::vector<std::string> models;
  std::vector<std::string> tasks;
  std::vector<std::vector<double>> values;  // [model][task]

  std::vector<double> column(std::size_t task) const;
  // Mean accuracy of each model over all tasks.
  std::vector<double> model_means() const;
};

// CSV with header model,task,accuracy. Throws InvalidConfig / ShapeMismatch.
ScoreTable read_score_table(std::istream& in);

enum class Correlation { KendallTauB, Pearson };

// Throws TooFewModels, ConstantColumn, ShapeMismatch.
double kendall_tau_b(std::span<const double> a, std::span<const double> b);
double pearson(std::span<const double> a, std::span<const double> b);
double concurrence(std::span<const double> a, std::span<const double> b,
                   Correlation method = Correlation::KendallTauB);

struct ConcurrenceMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
};

// With several tables, compares the per-model means of each table (one
// benchmark per table) over the models they share; with one table, compares
// its task columns.
ConcurrenceMatrix concurrence_matrix(std::span<const ScoreTable> tables,
                                     std::span<const std::string> names,
                                     Correlation method = Correlation::KendallTauB);

}  // namespace mw
