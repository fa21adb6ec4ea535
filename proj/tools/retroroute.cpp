// retroroute: data preparation, training, prediction, evaluation and corpus
// statistics for whole-route sequence models.
//
// Exit codes: 0 success, 2 input or parse error, 3 numeric failure,
// 4 compatibility mismatch. Human-readable messages go to stderr; JSON goes
// to stdout or to files.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "retroroute/beam_search.hpp"
#include "retroroute/checkpoint.hpp"
#include "retroroute/corpus.hpp"
#include "retroroute/errors.hpp"
#include "retroroute/evaluate.hpp"
#include "retroroute/filter.hpp"
#include "retroroute/kernels.hpp"
#include "retroroute/ops.hpp"
#include "retroroute/route_json.hpp"
#include "retroroute/smiles_lint.hpp"
#include "retroroute/stats.hpp"
#include "retroroute/train.hpp"
#include "retroroute/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace retroroute;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitCompat = 4;

int exit_code(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::kInput: return kExitInput;
    case ErrorCategory::kNumeric: return kExitNumeric;
    case ErrorCategory::kCompatibility: return kExitCompat;
  }
  return 1;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

struct Common {
  int threads = 0;
  bool deterministic = false;

  void apply() const {
    int n = threads;
    if (n == 0) {
      if (const char* env = std::getenv("RETROROUTE_THREADS")) n = std::atoi(env);
    }
    if (n < 0) throw InputError("--threads must be >= 0");
    kernels::set_num_threads(n);
    nn::set_deterministic(deterministic);
  }
  json to_json() const {
    return {{"threads", kernels::num_threads()}, {"deterministic", deterministic}};
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--threads", c.threads, "Worker thread cap (0 = RETROROUTE_THREADS or all)");
  cmd->add_flag("--deterministic", c.deterministic, "Serial fixed-order reductions");
}

json provenance(const std::string& command, const json& run_config) {
  return {{"tool", "retroroute"}, {"tool_version", kToolVersion}, {"command", command},
          {"run_config", run_config}};
}

void lint_or_throw(const std::string& what, const std::string& smiles) {
  const auto report = lint(smiles);
  if (report.valid) return;
  std::cerr << what << " fails SMILES lint:\n";
  for (const auto& issue : report.issues) {
    std::cerr << "  at " << issue.position << ": " << to_string(issue.kind);
    if (!issue.detail.empty()) std::cerr << " (" << issue.detail << ")";
    std::cerr << '\n';
  }
  throw InputError(what + " '" + smiles + "' is not a valid SMILES string");
}

// --- gen-toy -----------------------------------------------------------------

struct GenToyArgs {
  std::uint64_t seed = 0;
  std::size_t n = 2000;
  int max_steps = 4;
  std::string out;
  std::string stock;
};

int run_gen_toy(const GenToyArgs& a) {
  const auto corpus = gen_toy_corpus(a.seed, a.n, a.max_steps);
  save_routes(a.out, corpus.routes);
  if (!a.stock.empty()) corpus.stock.save(a.stock);
  std::cerr << "wrote " << corpus.routes.size() << " routes to " << a.out;
  if (!a.stock.empty()) std::cerr << " and " << corpus.stock.size() << " stock molecules";
  std::cerr << '\n';
  return 0;
}

// --- prepare-data --------------------------------------------------------------

struct PrepareArgs {
  std::string routes;
  std::vector<std::string> tests;
  std::string out;
  std::size_t augment = 2;
  bool with_sm = false;
};

int run_prepare(const PrepareArgs& a, const Common& common) {
  const auto full = load_routes(a.routes);
  std::vector<std::vector<RouteNode>> tests;
  for (const auto& t : a.tests) tests.push_back(load_routes(t));
  const auto curated = curate(full, tests);
  const auto augmented = augment(curated.routes, a.augment);
  const auto entries = make_entries(augmented, a.with_sm);

  std::vector<std::string> texts;
  texts.reserve(entries.size() * 2);
  for (const auto& e : entries) {
    texts.push_back(encoder_input_text(e.target, e.sm, e.steps));
    texts.push_back(e.route);
  }
  const auto vocab = Vocab::build(texts);

  fs::create_directories(a.out);
  const fs::path dir(a.out);
  save_entries((dir / "entries.jsonl").string(), entries);
  vocab.save((dir / "vocab.txt").string());
  const json run = {{"routes", a.routes},
                    {"tests", a.tests},
                    {"augment", a.augment},
                    {"with_sm", a.with_sm},
                    {"deterministic", common.deterministic}};
  json manifest = provenance("prepare-data", run);
  manifest["counts"] = {{"input_routes", full.size()},
                        {"removed_routes", curated.removed},
                        {"curated_routes", curated.routes.size()},
                        {"augmented_routes", augmented.size()},
                        {"entries", entries.size()},
                        {"vocab_size", vocab.size()}};
  manifest["vocab_fingerprint"] = vocab.fingerprint();
  write_json(dir / "manifest.json", manifest);
  std::cerr << "curated " << curated.routes.size() << " of " << full.size() << " routes ("
            << curated.removed << " removed), " << augmented.size() << " after augmentation, "
            << entries.size() << " entries, vocabulary " << vocab.size() << '\n';
  return 0;
}

// --- train ---------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::string out;
  std::string metrics;
  std::string resume;
  std::uint64_t stop_at = 0;
};

int run_train(const TrainArgs& a, const Common& common) {
  const fs::path dir(a.data);
  const auto vocab = Vocab::load((dir / "vocab.txt").string());
  const auto entries = load_entries((dir / "entries.jsonl").string());
  TrainConfig cfg;
  if (!a.config.empty()) cfg = TrainConfig::from_json(read_json_file(a.config));
  if (a.seed) cfg.seed = *a.seed;
  if (a.epochs) cfg.epochs = *a.epochs;
  cfg.deterministic = cfg.deterministic || common.deterministic;
  cfg.model.vocab_size = static_cast<int>(vocab.size());
  cfg.validate();

  const std::string metrics = a.metrics.empty() ? a.out + ".metrics.jsonl" : a.metrics;
  json run = {{"train", cfg.to_json()},
              {"data", a.data},
              {"config_file", a.config},
              {"out", a.out},
              {"metrics", metrics},
              {"seed", cfg.seed},
              {"deterministic", cfg.deterministic},
              {"vocab_fingerprint", vocab.fingerprint()}};
  TrainOptions opts;
  opts.checkpoint_path = a.out;
  opts.metrics_path = metrics;
  opts.resume_from = a.resume;
  opts.stop_at_step = a.stop_at;
  opts.run_config = provenance("train", run);
  opts.log = &std::cerr;
  std::cerr << "training on " << entries.size() << " entries, "
            << param_count(cfg.model) << " parameters\n";
  const auto result = train(entries, vocab, cfg, opts);
  std::cerr << "finished " << result.checkpoint.step << " steps; checkpoint " << a.out << '\n';
  return 0;
}

// --- predict -------------------------------------------------------------------

struct PredictArgs {
  std::string checkpoint;
  std::string vocab;
  std::string target;
  std::optional<std::string> sm;
  int steps = 0;
  std::size_t beam = 50;
  std::size_t max_len = 0;
  std::string stock;
};

int run_predict(const PredictArgs& a, const Common& common) {
  lint_or_throw("target", a.target);
  if (a.sm) lint_or_throw("starting material", *a.sm);
  std::optional<Vocab> expected;
  if (!a.vocab.empty()) expected = Vocab::load(a.vocab);
  const auto ckpt = load_checkpoint(a.checkpoint, expected ? &*expected : nullptr);
  std::optional<StockSet> stock;
  if (!a.stock.empty()) stock = StockSet::load(a.stock);

  const auto enc = encode_encoder_input(a.target, a.sm, a.steps, ckpt.vocab).ids;
  auto session = ckpt.model.start_session(enc);
  const std::size_t max_len = a.max_len ? a.max_len : session->max_tokens();
  const auto beams = beam_search(*session, a.beam, max_len);
  const auto filtered = filter_candidates(beams, ckpt.vocab, a.target, stock ? &*stock : nullptr);

  const json run = {{"checkpoint", a.checkpoint},
                    {"target", a.target},
                    {"sm", a.sm ? json(*a.sm) : json(nullptr)},
                    {"steps", a.steps},
                    {"beam", a.beam},
                    {"max_len", max_len},
                    {"stock", a.stock},
                    {"runtime", common.to_json()},
                    {"model_run_config", ckpt.run_config}};
  json out = provenance("predict", run);
  out["predictions"] = predictions_to_json(filtered.survivors);
  out["rejections"] = filtered.rejection_counts;
  std::cout << out.dump(2) << '\n';
  std::cerr << filtered.survivors.size() << " of " << beams.size()
            << " beam candidates passed the filter\n";
  return 0;
}

// --- evaluate ------------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint;
  std::string vocab;
  std::string test;
  std::string stock;
  std::size_t beam = 50;
  std::vector<int> topk{1, 2, 3, 4, 5, 10};
  std::size_t max_len = 0;
  bool sm_mode = false;
  std::string out;
};

int run_evaluate(const EvaluateArgs& a, const Common& common) {
  std::optional<Vocab> expected;
  if (!a.vocab.empty()) expected = Vocab::load(a.vocab);
  const auto ckpt = load_checkpoint(a.checkpoint, expected ? &*expected : nullptr);
  const auto refs = load_routes(a.test);
  std::optional<StockSet> stock;
  if (!a.stock.empty()) stock = StockSet::load(a.stock);

  EvalOptions opts;
  opts.sm_mode = a.sm_mode;
  opts.width = a.beam;
  opts.ks = a.topk;
  opts.max_len = a.max_len;
  opts.stock = stock ? &*stock : nullptr;
  const auto report = evaluate(ckpt.model.session_factory(), ckpt.vocab, refs, opts);

  const json run = {{"checkpoint", a.checkpoint}, {"test", a.test},      {"stock", a.stock},
                    {"beam", a.beam},             {"topk", a.topk},      {"max_len", a.max_len},
                    {"sm_mode", a.sm_mode},       {"runtime", common.to_json()},
                    {"model_run_config", ckpt.run_config}};
  json doc = provenance("evaluate", run);
  doc["report"] = report.to_json();
  if (!a.out.empty()) {
    const fs::path dir(a.out);
    fs::create_directories(dir);
    write_json(dir / "report.json", doc);
    write_text(dir / "topk.csv", report.topk_csv());
    write_text(dir / "per_length.csv", report.per_length_csv());
    write_text(dir / "route_length.csv", report.route_length.to_csv("steps"));
    write_text(dir / "leaves_at_root.csv", report.leaves_at_root.to_csv("leaves"));
  }
  std::cout << doc.dump(2) << '\n';
  for (const auto& [k, acc] : report.topk) std::cerr << "top-" << k << " " << acc << '\n';
  return 0;
}

// --- stats ---------------------------------------------------------------------

struct StatsArgs {
  std::string routes;
  std::string out;
};

int run_stats(const StatsArgs& a) {
  const auto routes = load_routes(a.routes);
  const auto stats = corpus_stats(routes);
  json doc = provenance("stats", {{"routes", a.routes}});
  doc["stats"] = stats.to_json();
  if (!a.out.empty()) {
    const fs::path dir(a.out);
    fs::create_directories(dir);
    write_json(dir / "stats.json", doc);
    write_text(dir / "route_length.csv", stats.route_length.to_csv("steps"));
    write_text(dir / "leaves_at_root.csv", stats.leaves_at_root.to_csv("leaves"));
  }
  std::cout << doc.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Whole-route retrosynthesis sequence models"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  Common common;

  GenToyArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-toy", "Generate a synthetic route corpus");
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--n", gen.n, "Number of routes")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--max-steps", gen.max_steps)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--out", gen.out, "Route JSON output")->required();
  gen_cmd->add_option("--stock", gen.stock, "Stock file output");

  PrepareArgs prep;
  auto* prep_cmd = app.add_subcommand("prepare-data", "Curate, augment and tokenize routes");
  prep_cmd->add_option("--routes", prep.routes, "Full route corpus (JSON)")->required();
  prep_cmd->add_option("--test", prep.tests, "Test route sets to exclude (JSON)");
  prep_cmd->add_option("--out", prep.out, "Output directory")->required();
  prep_cmd->add_option("--augment", prep.augment, "Permutations added per route");
  prep_cmd->add_option("--with-sm", prep.with_sm, "One entry per (route, starting material)");
  add_common(prep_cmd, common);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on prepared data");
  train_cmd->add_option("--data", tr.data, "prepare-data output directory")->required();
  train_cmd->add_option("--config", tr.config, "Training configuration (JSON)");
  train_cmd->add_option("--seed", tr.seed);
  train_cmd->add_option("--epochs", tr.epochs);
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--metrics", tr.metrics, "Metrics file (default <out>.metrics.jsonl)");
  train_cmd->add_option("--resume", tr.resume, "Checkpoint to resume from");
  train_cmd->add_option("--stop-at", tr.stop_at, "Save and exit after this global step");
  add_common(train_cmd, common);

  PredictArgs pr;
  auto* pred_cmd = app.add_subcommand("predict", "Predict routes for one target");
  pred_cmd->add_option("--checkpoint", pr.checkpoint)->required();
  pred_cmd->add_option("--vocab", pr.vocab, "Expected vocabulary file");
  pred_cmd->add_option("--target", pr.target)->required();
  pred_cmd->add_option("--sm", pr.sm, "Starting material");
  pred_cmd->add_option("--steps", pr.steps)->required();
  pred_cmd->add_option("--beam", pr.beam)->check(CLI::PositiveNumber);
  pred_cmd->add_option("--max-len", pr.max_len, "Decoded token cap (0 = model maximum)");
  pred_cmd->add_option("--stock", pr.stock);
  add_common(pred_cmd, common);

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Top-K accuracy over a test set");
  eval_cmd->add_option("--checkpoint", ev.checkpoint)->required();
  eval_cmd->add_option("--vocab", ev.vocab, "Expected vocabulary file");
  eval_cmd->add_option("--test", ev.test, "Reference routes (JSON)")->required();
  eval_cmd->add_option("--stock", ev.stock);
  eval_cmd->add_option("--beam", ev.beam)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--topk", ev.topk)->delimiter(',');
  eval_cmd->add_option("--max-len", ev.max_len, "Decoded token cap (0 = model maximum)");
  eval_cmd->add_flag("--sm-mode", ev.sm_mode, "Condition on the deepest leaf");
  eval_cmd->add_option("--out", ev.out, "Directory for report.json and CSV histograms");
  add_common(eval_cmd, common);

  StatsArgs st;
  auto* stats_cmd = app.add_subcommand("stats", "Route-length and leaves-at-root histograms");
  stats_cmd->add_option("--routes", st.routes)->required();
  stats_cmd->add_option("--out", st.out, "Directory for stats.json and CSV histograms");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    common.apply();
    if (*gen_cmd) return run_gen_toy(gen);
    if (*prep_cmd) return run_prepare(prep, common);
    if (*train_cmd) return run_train(tr, common);
    if (*pred_cmd) return run_predict(pr, common);
    if (*eval_cmd) return run_evaluate(ev, common);
    if (*stats_cmd) return run_stats(st);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
