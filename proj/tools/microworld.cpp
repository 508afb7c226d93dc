// microworld: dataset generation, scoring, concurrence, session serving,
// program replay and story inspection.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "microworld/breakpoints.hpp"
#include "microworld/dataset.hpp"
#include "microworld/digest.hpp"
#include "microworld/errors.hpp"
#include "microworld/eval.hpp"
#include "microworld/rng.hpp"
#include "microworld/server.hpp"
#include "microworld/session.hpp"
#include "microworld/taskgen.hpp"

namespace fs = std::filesystem;
using namespace mw;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitGeneration = 3;
constexpr int kExitReplay = 4;

const char* kVersion = "0.1.0";

// Raised for usage and configuration problems; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(path + ": cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(path + ": cannot open");
  return in;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw UsageError(path.string() + ": cannot write");
}

std::shared_ptr<const Lexicon> lexicon_from(const nlohmann::json& ref, const fs::path& base) {
  if (ref.is_null() || ref == "default") {
    return std::shared_ptr<const Lexicon>(&Lexicon::default_english(), [](const Lexicon*) {});
  }
  if (ref.is_object()) return std::make_shared<const Lexicon>(Lexicon::from_json(ref));
  if (ref.is_string()) {
    fs::path p = ref.get<std::string>();
    if (p.is_relative()) p = base / p;
    return std::make_shared<const Lexicon>(Lexicon::from_json(read_json_file(p.string())));
  }
  throw InvalidConfig("lexicon: expected \"default\", a path or an inline lexicon");
}

// ---------------------------------------------------------------- gen

struct GenOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string format = "jsonl";
  std::string splits = "iid";
  bool breakpoints = false;
  bool plausibility = false;
  unsigned threads = 1;
};

std::vector<TaskSpec> specs_from(const nlohmann::json& doc, const char* key) {
  std::vector<TaskSpec> out;
  if (!doc.contains(key)) return out;
  if (!doc.at(key).is_array()) throw InvalidConfig(std::string(key) + ": expected a list of specs");
  for (std::size_t i = 0; i < doc.at(key).size(); ++i) {
    out.push_back(TaskSpec::from_json(doc.at(key).at(i),
                                      std::string(key) + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::size_t size_from(const nlohmann::json& doc, const char* key, std::size_t fallback) {
  if (!doc.contains(key)) return fallback;
  if (!doc.at(key).is_number_unsigned()) {
    throw InvalidConfig(std::string(key) + ": expected a non-negative integer");
  }
  return doc.at(key).get<std::size_t>();
}

int run_gen(const GenOptions& opt) {
  const auto started = std::chrono::steady_clock::now();
  const auto doc = read_json_file(opt.config);
  if (!doc.is_object()) throw InvalidConfig("config: expected an object");
  static const std::set<std::string> kKnown = {"name",       "train",     "test",    "weights",
                                               "train_size", "test_size", "seed",    "lexicon"};
  for (const auto& [key, value] : doc.items()) {
    if (!kKnown.count(key)) throw InvalidConfig(key + ": unknown field");
  }
  const auto train = specs_from(doc, "train");
  const auto test = specs_from(doc, "test");
  if (train.empty()) throw InvalidConfig("train: at least one spec is required");
  const SplitSizes sizes{size_from(doc, "train_size", 1000), size_from(doc, "test_size", 0)};
  std::uint64_t seed = 0;
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned()) throw InvalidConfig("seed: expected a non-negative integer");
    seed = doc.at("seed").get<std::uint64_t>();
  }
  if (opt.seed) seed = *opt.seed;
  const auto lex = lexicon_from(doc.value("lexicon", nlohmann::json("default")),
                                fs::path(opt.config).parent_path());
  std::vector<double> weights;
  if (doc.contains("weights")) {
    try {
      weights = doc.at("weights").get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
      throw InvalidConfig("weights: expected a list of numbers");
    }
  }

  DatasetSplits splits;
  if (opt.splits == "compositional") {
    if (test.empty()) throw InvalidConfig("test: compositional splits need test specs");
    if (!weights.empty()) throw InvalidConfig("weights: not used with compositional splits");
    splits = compose_splits(train, test, SplitMode::Compositional, sizes, seed, opt.threads, *lex);
  } else if (!weights.empty()) {
    std::vector<TaskSpec> pool = train;
    pool.insert(pool.end(), test.begin(), test.end());
    auto stories = diversify(pool, sizes.train + sizes.test, weights, seed, opt.threads, *lex);
    splits.train.assign(std::make_move_iterator(stories.begin()),
                        std::make_move_iterator(stories.begin() + sizes.train));
    splits.test.assign(std::make_move_iterator(stories.begin() + sizes.train),
                       std::make_move_iterator(stories.end()));
  } else {
    splits = compose_splits(train, test, SplitMode::Iid, sizes, seed, opt.threads, *lex);
  }

  fs::create_directories(opt.out);
  nlohmann::ordered_json files = nlohmann::ordered_json::object();
  auto emit = [&](const std::string& name, const std::string& content) {
    write_file(fs::path(opt.out) / name, content);
    files[name] = sha256_hex(content);
  };
  std::map<std::string, std::size_t> counts;
  for (const auto& [split, stories] :
       {std::pair<std::string, const std::vector<Story>*>{"train", &splits.train},
        std::pair<std::string, const std::vector<Story>*>{"test", &splits.test}}) {
    if (split == "test" && stories->empty() && sizes.test == 0) continue;
    counts[split] = stories->size();
    std::ostringstream data;
    if (opt.format == "babi") {
      write_babi(data, *stories);
      emit(split + ".txt", data.str());
    } else {
      write_jsonl(data, *stories);
      emit(split + ".jsonl", data.str());
    }
    if (opt.breakpoints) {
      std::ostringstream grids;
      for (const auto& s : *stories) grids << breakpoints_to_json(annotate(s)).dump() << '\n';
      emit(split + ".breakpoints.jsonl", grids.str());
    }
    if (opt.plausibility) {
      std::ostringstream inst;
      const auto pseed = derive_seed(seed, split == "train" ? 101 : 102);
      std::size_t skipped = 0;
      for (std::size_t i = 0; i < stories->size(); ++i) {
        const auto& s = (*stories)[i];
        auto plausible = passthrough_instance(s);
        plausible.id += "-plausible";
        inst << plausibility_to_json(plausible).dump() << '\n';
        try {
          auto bug = inject_implausibility(s, derive_seed(pseed, i), *lex);
          bug.id += "-implausible";
          inst << plausibility_to_json(bug).dump() << '\n';
        } catch (const NoInjectionSite&) {
          ++skipped;
        }
      }
      if (skipped) std::cerr << split << ": " << skipped << " stories admit no injected bug\n";
      emit(split + ".plausibility.jsonl", inst.str());
    }
  }

  nlohmann::ordered_json resolved;
  resolved["name"] = doc.value("name", std::string());
  resolved["train"] = nlohmann::ordered_json::array();
  for (const auto& s : train) resolved["train"].push_back(s.to_json());
  resolved["test"] = nlohmann::ordered_json::array();
  for (const auto& s : test) resolved["test"].push_back(s.to_json());
  if (!weights.empty()) resolved["weights"] = weights;
  resolved["train_size"] = sizes.train;
  resolved["test_size"] = sizes.test;
  resolved["lexicon"] = lex->to_json();
  resolved["splits"] = opt.splits;
  resolved["format"] = opt.format;
  resolved["breakpoints"] = opt.breakpoints;
  resolved["plausibility"] = opt.plausibility;

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  nlohmann::ordered_json manifest;
  manifest["tool"] = "microworld";
  manifest["version"] = kVersion;
  manifest["command"] = "gen";
  manifest["config"] = resolved;
  manifest["seed"] = seed;
  manifest["files"] = files;
  manifest["stories"] = counts;
  manifest["duration_seconds"] = seconds;
  write_file(fs::path(opt.out) / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote";
  for (const char* split : {"train", "test"}) {
    if (counts.count(split)) std::cout << ' ' << counts[split] << ' ' << split;
  }
  std::cout << " stories to " << opt.out << " in " << std::fixed << std::setprecision(2) << seconds
            << "s\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  std::string dataset;
  std::string predictions;
  std::string breakpoints_gold;
  std::string csv;
};

int run_eval(const EvalOptions& opt) {
  auto din = open_input(opt.dataset);
  const auto stories = read_jsonl(din);
  auto pin = open_input(opt.predictions);
  const auto predictions = read_predictions(pin);
  const auto report = score(stories, predictions);
  std::ostringstream csv;
  csv << "metric,value\n";
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "questions: " << report.overall.total << " (unanswered " << report.missing << ")\n";
  std::cout << "accuracy: " << report.overall.value() << '\n';
  csv << "accuracy," << report.overall.value() << '\n';
  for (const auto& [type, acc] : report.per_type) {
    std::cout << "  " << to_string(type) << ": " << acc.value() << " (" << acc.correct << "/"
              << acc.total << ")\n";
    csv << "accuracy." << to_string(type) << ',' << acc.value() << '\n';
  }
  if (report.supporting) {
    const auto& s = *report.supporting;
    std::cout << "supporting facts: precision " << s.precision << ", recall " << s.recall
              << ", F1 " << s.f1 << '\n';
    csv << "supporting.precision," << s.precision << "\nsupporting.recall," << s.recall
        << "\nsupporting.f1," << s.f1 << '\n';
  }
  if (!opt.breakpoints_gold.empty()) {
    std::vector<BreakpointAnnotation> gold, predicted;
    auto gin = open_input(opt.breakpoints_gold);
    for (std::string line; std::getline(gin, line);) {
      if (!line.empty()) gold.push_back(breakpoints_from_json(nlohmann::json::parse(line)));
    }
    auto pin2 = open_input(opt.predictions);
    for (std::string line; std::getline(pin2, line);) {
      if (line.empty()) continue;
      auto doc = nlohmann::json::parse(line);
      if (doc.contains("labels")) predicted.push_back(breakpoints_from_json(doc));
    }
    const auto m = score_breakpoints(gold, predicted);
    std::cout << "breakpoints: " << m.cells << " cells, accuracy " << m.accuracy << ", macro-F1 "
              << m.macro_f1 << '\n';
    csv << "breakpoints.accuracy," << m.accuracy << "\nbreakpoints.macro_f1," << m.macro_f1 << '\n';
    for (const auto& [label, lm] : m.per_label) {
      const char code = label_code(label);
      std::cout << "  " << code << ": precision " << lm.precision << ", recall " << lm.recall
                << ", F1 " << lm.f1 << " (support " << lm.support << ")\n";
      csv << "breakpoints." << code << ".f1," << lm.f1 << '\n';
    }
  }
  const std::string csv_path =
      opt.csv.empty() ? fs::path(opt.predictions).replace_extension(".scores.csv").string() : opt.csv;
  write_file(csv_path, csv.str());
  std::cerr << "scores written to " << csv_path << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- concur

struct ConcurOptions {
  std::vector<std::string> tables;
  std::string method = "kendall";
  std::string out;
};

int run_concur(const ConcurOptions& opt) {
  std::vector<ScoreTable> tables;
  std::vector<std::string> names;
  for (const auto& path : opt.tables) {
    auto in = open_input(path);
    tables.push_back(read_score_table(in));
    names.push_back(fs::path(path).stem().string());
  }
  const auto method = opt.method == "pearson" ? Correlation::Pearson : Correlation::KendallTauB;
  const auto m = concurrence_matrix(tables, names, method);
  std::ostringstream csv;
  csv << "a,b,concurrence\n";
  std::cout << std::fixed << std::setprecision(6);
  for (std::size_t i = 0; i < m.names.size(); ++i) {
    for (std::size_t j = i + 1; j < m.names.size(); ++j) {
      std::cout << m.names[i] << " vs " << m.names[j] << ": " << m.values[i][j] << '\n';
      csv << m.names[i] << ',' << m.names[j] << ',' << std::setprecision(17) << m.values[i][j]
          << std::setprecision(6) << '\n';
    }
  }
  if (!opt.out.empty()) write_file(opt.out, csv.str());
  return kExitOk;
}

// ---------------------------------------------------------------- serve

struct ServeOptions {
  std::string addr = "127.0.0.1:8080";
  std::string data_dir = "sessions";
  unsigned threads = 2;
};

int run_serve(const ServeOptions& opt) {
  const auto colon = opt.addr.rfind(':');
  if (colon == std::string::npos) throw UsageError("--addr: expected host:port");
  const auto host = opt.addr.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(opt.addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw UsageError("--addr: bad port in " + opt.addr);
  }
  if (port < 0 || port > 65535) throw UsageError("--addr: port out of range");
  SessionManager sessions(opt.data_dir.empty() ? std::nullopt
                                               : std::optional<fs::path>(opt.data_dir));
  Server server(sessions, host, static_cast<std::uint16_t>(port));
  std::cerr << "recovered " << sessions.recovered() << " sessions from " << opt.data_dir << '\n';
  std::cout << "listening on " << host << ':' << server.port() << std::endl;
  server.run(opt.threads);
  return kExitOk;
}

// ---------------------------------------------------------------- replay

int run_replay(const std::string& program, const std::string& world_path) {
  auto doc = read_json_file(world_path);
  const nlohmann::json world = doc.contains("world") ? doc.at("world") : doc;
  Declaration decl;
  WorldState state;
  try {
    decl = declaration_from_json(world);
    if (!world.contains("initial")) throw InvalidConfig("initial: missing");
    state = state_from_json(decl, world.at("initial"));
  } catch (const UnknownEntity& e) {
    throw InvalidConfig(e.what());
  }
  auto in = open_input(program);
  int line_number = 0;
  int step = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    Action action;
    try {
      action = parse_program_line(decl, line);
    } catch (const Error& e) {
      throw UsageError(program + ":" + std::to_string(line_number) + ": " + e.what());
    }
    try {
      state = apply_statement(decl, state, {to_event(action), step++, false});
    } catch (const PreconditionViolation& e) {
      std::cerr << program << ":" << line_number << ": " << line << ": " << e.reason() << '\n';
      return kExitReplay;
    }
  }
  std::cout << state_digest(decl, state) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- inspect

int run_inspect(const std::string& dataset, const std::string& id) {
  auto in = open_input(dataset);
  const auto stories = read_jsonl(in);
  const auto it = std::find_if(stories.begin(), stories.end(),
                               [&](const Story& s) { return s.id == id; });
  if (it == stories.end()) throw UsageError("no story with id " + id + " in " + dataset);
  const auto& story = *it;
  std::cout << "story " << story.id << " (spec " << story.spec_fingerprint << ")\n";
  std::size_t q = 0;
  for (std::size_t i = 0; i < story.sentences.size(); ++i) {
    std::cout << std::setw(4) << i << "  " << story.sentences[i].text << '\n';
    while (q < story.questions.size() && story.questions[q].position == static_cast<int>(i)) {
      const auto& question = story.questions[q++];
      std::cout << "      ? " << question.text << " -> " << question.answer << "  [";
      for (std::size_t k = 0; k < question.supporting.size(); ++k) {
        std::cout << (k ? " " : "") << question.supporting[k];
      }
      std::cout << "]\n";
    }
  }
  if (story.statements.empty()) return kExitOk;
  const auto grid = annotate(story);
  std::size_t width = 0;
  for (const auto& p : grid.universe) width = std::max(width, p.size());
  std::cout << "\nbreakpoints (rows: propositions, columns: sentences)\n";
  std::cout << std::string(width + 2, ' ');
  for (std::size_t t = 0; t < grid.labels.size(); ++t) std::cout << (t % 10);
  std::cout << '\n';
  for (std::size_t k = 0; k < grid.universe.size(); ++k) {
    std::cout << std::left << std::setw(static_cast<int>(width + 2)) << grid.universe[k]
              << std::right;
    for (const auto& row : grid.labels) std::cout << label_code(row[k]);
    std::cout << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"microworld: micro-world story generation, scoring and annotation sessions"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a dataset from a JSON config");
  gen_cmd->add_option("config", gen.config, "Generator config file")->required();
  gen_cmd->add_option("--seed", gen.seed, "Root seed (overrides the config)");
  gen_cmd->add_option("--out", gen.out, "Output directory");
  gen_cmd->add_option("--format", gen.format)->check(CLI::IsMember({"jsonl", "babi"}));
  gen_cmd->add_option("--splits", gen.splits)->check(CLI::IsMember({"iid", "compositional"}));
  gen_cmd->add_flag("--breakpoints", gen.breakpoints, "Also write breakpoint label grids");
  gen_cmd->add_flag("--plausibility", gen.plausibility, "Also write plausibility instances");
  gen_cmd->add_option("--threads", gen.threads, "Worker threads")->check(CLI::Range(1u, 256u));

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against a dataset");
  eval_cmd->add_option("--dataset", eval.dataset)->required();
  eval_cmd->add_option("--predictions", eval.predictions)->required();
  eval_cmd->add_option("--breakpoints-gold", eval.breakpoints_gold);
  eval_cmd->add_option("--csv", eval.csv, "Where to write the score CSV");

  ConcurOptions concur;
  auto* concur_cmd = app.add_subcommand("concur", "Concurrence between benchmark score tables");
  concur_cmd->add_option("--tables", concur.tables, "CSV files (model,task,accuracy)")
      ->required()
      ->expected(1, -1);
  concur_cmd->add_option("--method", concur.method)->check(CLI::IsMember({"kendall", "pearson"}));
  concur_cmd->add_option("--out", concur.out, "Where to write the pairwise CSV");

  ServeOptions serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the annotation session service");
  serve_cmd->add_option("--addr", serve.addr, "host:port to bind");
  serve_cmd->add_option("--data-dir", serve.data_dir, "Session log directory");
  serve_cmd->add_option("--threads", serve.threads)->check(CLI::Range(1u, 64u));

  std::string program, world;
  auto* replay_cmd = app.add_subcommand("replay", "Replay a program export and print the digest");
  replay_cmd->add_option("--program", program)->required();
  replay_cmd->add_option("--world", world, "World or session config JSON")->required();

  std::string dataset, id;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print one story with its breakpoint grid");
  inspect_cmd->add_option("--dataset", dataset)->required();
  inspect_cmd->add_option("--id", id)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*eval_cmd) return run_eval(eval);
    if (*concur_cmd) return run_concur(concur);
    if (*serve_cmd) return run_serve(serve);
    if (*replay_cmd) return run_replay(program, world);
    if (*inspect_cmd) return run_inspect(dataset, id);
  } catch (const SignatureOverlap& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitGeneration;
  } catch (const GenerationExhausted& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitGeneration;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
