#include "microworld/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "microworld/errors.hpp"

namespace mw {

namespace {

std::vector<std::string> list_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void check_columns(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeMismatch("columns differ in length");
  if (a.size() < 2) throw TooFewModels("concurrence needs at least two models");
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
  };
  if (constant(a) || constant(b)) throw ConstantColumn("correlation undefined for a constant column");
}

// Number of swaps a stable merge sort performs; sorts `v` ascending.
std::uint64_t count_swaps(std::vector<double>& v, std::vector<double>& scratch, std::size_t lo,
                          std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = count_swaps(v, scratch, lo, mid) + count_swaps(v, scratch, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + lo, scratch.begin() + hi, v.begin() + lo);
  return swaps;
}

// Pairs tied within runs of equal values of a sorted sequence.
template <class Eq>
std::uint64_t tied_pairs(std::size_t n, Eq equal) {
  std::uint64_t total = 0, run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && equal(i - 1, i)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

}  // namespace

std::vector<Prediction> read_predictions(std::istream& in) {
  std::vector<Prediction> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const auto where = "predictions line " + std::to_string(number);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidConfig(where + ": " + e.what());
    }
    if (doc.contains("labels")) continue;
    if (!doc.contains("id") || !doc.contains("position") || !doc.contains("answer")) {
      throw InvalidConfig(where + ": expected {\"id\", \"position\", \"answer\"}");
    }
    Prediction p;
    try {
      p.story_id = doc.at("id").get<std::string>();
      p.position = doc.at("position").get<int>();
      p.answer = doc.at("answer").get<std::string>();
      if (doc.contains("supporting") && !doc.at("supporting").is_null()) {
        p.supporting = doc.at("supporting").get<std::vector<int>>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw InvalidConfig(where + ": " + e.what());
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::string normalize_answer(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

bool answers_match(QuestionType type, std::string_view gold, std::string_view predicted) {
  if (type == QuestionType::List) return list_tokens(gold) == list_tokens(predicted);
  return normalize_answer(gold) == normalize_answer(predicted);
}

ScoreReport score(std::span<const Story> dataset, std::span<const Prediction> predictions) {
  std::map<std::pair<std::string, int>, const Question*> gold;
  for (const auto& story : dataset) {
    for (const auto& q : story.questions) gold[{story.id, q.position}] = &q;
  }
  std::map<std::pair<std::string, int>, const Prediction*> by_key;
  for (const auto& p : predictions) {
    const std::pair key{p.story_id, p.position};
    if (!gold.count(key)) {
      throw UnresolvedId("no gold question for story " + p.story_id + " at position " +
                         std::to_string(p.position));
    }
    if (!by_key.emplace(key, &p).second) {
      throw DuplicatePrediction("duplicate prediction for story " + p.story_id +
                                " at position " + std::to_string(p.position));
    }
  }
  ScoreReport report;
  std::size_t hit = 0, predicted_total = 0, gold_total = 0, with_support = 0;
  for (const auto& [key, q] : gold) {
    auto& bucket = report.per_type[q->query.type];
    ++bucket.total;
    ++report.overall.total;
    auto it = by_key.find(key);
    if (it == by_key.end()) {
      ++report.missing;
      continue;
    }
    if (answers_match(q->query.type, q->answer, it->second->answer)) {
      ++bucket.correct;
      ++report.overall.correct;
    }
    if (const auto& sup = it->second->supporting) {
      ++with_support;
      const std::set<int> pred(sup->begin(), sup->end());
      const std::set<int> want(q->supporting.begin(), q->supporting.end());
      predicted_total += pred.size();
      gold_total += want.size();
      for (int i : pred) hit += want.count(i);
    }
  }
  if (with_support) {
    SupportMetrics m;
    m.questions = with_support;
    m.precision = predicted_total ? static_cast<double>(hit) / predicted_total : 0.0;
    m.recall = gold_total ? static_cast<double>(hit) / gold_total : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    report.supporting = m;
  }
  return report;
}

std::vector<double> ScoreTable::column(std::size_t task) const {
  std::vector<double> out;
  for (const auto& row : values) out.push_back(row.at(task));
  return out;
}

std::vector<double> ScoreTable::model_means() const {
  std::vector<double> out;
  for (const auto& row : values) {
    out.push_back(std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size()));
  }
  return out;
}

ScoreTable read_score_table(std::istream& in) {
  ScoreTable table;
  std::map<std::pair<std::string, std::string>, double> cells;
  std::string line;
  std::size_t number = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    const auto where = "line " + std::to_string(number);
    if (fields.size() != 3) throw InvalidConfig(where + ": expected model,task,accuracy");
    if (header) {
      header = false;
      if (fields[0] == "model" && fields[1] == "task") continue;
    }
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument(fields[2]);
    } catch (const std::exception&) {
      throw InvalidConfig(where + ": accuracy \"" + fields[2] + "\" is not a number");
    }
    if (!(value >= 0.0 && value <= 1.0)) throw InvalidConfig(where + ": accuracy outside [0, 1]");
    if (std::find(table.models.begin(), table.models.end(), fields[0]) == table.models.end()) {
      table.models.push_back(fields[0]);
    }
    if (std::find(table.tasks.begin(), table.tasks.end(), fields[1]) == table.tasks.end()) {
      table.tasks.push_back(fields[1]);
    }
    if (!cells.emplace(std::pair{fields[0], fields[1]}, value).second) {
      throw InvalidConfig(where + ": duplicate cell " + fields[0] + "/" + fields[1]);
    }
  }
  for (const auto& m : table.models) {
    auto& row = table.values.emplace_back();
    for (const auto& t : table.tasks) {
      auto it = cells.find({m, t});
      if (it == cells.end()) throw ShapeMismatch("score table has no cell for " + m + "/" + t);
      row.push_back(it->second);
    }
  }
  return table;
}

double kendall_tau_b(std::span<const double> a, std::span<const double> b) {
  check_columns(a, b);
  const std::size_t n = a.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a[i] != a[j] ? a[i] < a[j] : b[i] < b[j];
  });
  const auto n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t n1 = tied_pairs(n, [&](std::size_t i, std::size_t j) {
    return a[order[i]] == a[order[j]];
  });
  const std::uint64_t n3 = tied_pairs(n, [&](std::size_t i, std::size_t j) {
    return a[order[i]] == a[order[j]] && b[order[i]] == b[order[j]];
  });
  std::vector<double> ys(n), scratch(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = b[order[i]];
  const std::uint64_t swaps = count_swaps(ys, scratch, 0, n);
  const std::uint64_t n2 = tied_pairs(n, [&](std::size_t i, std::size_t j) { return ys[i] == ys[j]; });
  const double numerator = static_cast<double>(n0) - static_cast<double>(n1) -
                           static_cast<double>(n2) + static_cast<double>(n3) -
                           2.0 * static_cast<double>(swaps);
  return numerator / std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
}

double pearson(std::span<const double> a, std::span<const double> b) {
  check_columns(a, b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double concurrence(std::span<const double> a, std::span<const double> b, Correlation method) {
  return method == Correlation::Pearson ? pearson(a, b) : kendall_tau_b(a, b);
}

ConcurrenceMatrix concurrence_matrix(std::span<const ScoreTable> tables,
                                     std::span<const std::string> names, Correlation method) {
  if (tables.empty()) throw InvalidConfig("no score tables given");
  ConcurrenceMatrix out;
  std::vector<std::vector<double>> columns;
  if (tables.size() == 1) {
    const auto& t = tables[0];
    out.names = t.tasks;
    for (std::size_t k = 0; k < t.tasks.size(); ++k) columns.push_back(t.column(k));
  } else {
    // Models present in every table, in the first table's order.
    std::vector<std::string> models;
    for (const auto& m : tables[0].models) {
      bool everywhere = std::all_of(tables.begin(), tables.end(), [&](const ScoreTable& t) {
        return std::find(t.models.begin(), t.models.end(), m) != t.models.end();
      });
      if (everywhere) models.push_back(m);
    }
    for (std::size_t k = 0; k < tables.size(); ++k) {
      const auto means = tables[k].model_means();
      auto& col = columns.emplace_back();
      for (const auto& m : models) {
        const auto it = std::find(tables[k].models.begin(), tables[k].models.end(), m);
        col.push_back(means[it - tables[k].models.begin()]);
      }
      out.names.push_back(k < names.size() ? names[k] : "table" + std::to_string(k));
    }
  }
  const std::size_t n = columns.size();
  out.values.assign(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      out.values[i][j] = out.values[j][i] = concurrence(columns[i], columns[j], method);
    }
  }
  return out;
}

}  // namespace mw
