#include "rqgnn/cli.hpp"

#include "rqgnn/checkpoint.hpp"
#include "rqgnn/dataset.hpp"
#include "rqgnn/error.hpp"
#include "rqgnn/spectral.hpp"
#include "rqgnn/training.hpp"
#include "rqgnn/verification.hpp"
#include "rqgnn/wavelet.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

namespace rqgnn::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Stream ids below the root seed. Shared between subcommands so that, for
// example, `perturb --synthetic N` followed by `train --data` sees the same corpus
// as `train --synthetic N`.
constexpr std::uint64_t kCorpusStream = 1;
constexpr std::uint64_t kPerturbStream = 2;
constexpr std::uint64_t kSplitStream = 3;
constexpr std::uint64_t kTrainStream = 4;
constexpr std::uint64_t kAnalysisStream = 5;

std::uint64_t stream_seed(std::uint64_t root, std::uint64_t stream) {
  return Rng(root).split(stream).next();
}

struct DataOptions {
  std::string data;
  std::string name;
  int synthetic = 0;
  int nodes = 26;
  double edge_prob = 28.0 / 325.0;
  double fraction = 0.05;
  double prob = 0.15;
};

struct SplitRatios {
  double train = 0.70;
  double val = 0.15;
};

void add_data_options(CLI::App* app, DataOptions& o) {
  auto* data = app->add_option("--data", o.data, "TUDataset directory");
  app->add_option("--name", o.name, "Dataset file prefix (default: directory name)");
  auto* synthetic = app->add_option("--synthetic", o.synthetic,
                                    "Generate N Erdos-Renyi normal graphs instead of reading --data")
                        ->check(CLI::NonNegativeNumber);
  data->excludes(synthetic);
  app->add_option("--nodes", o.nodes, "Nodes per synthetic graph")->check(CLI::PositiveNumber);
  app->add_option("--edge-prob", o.edge_prob, "Edge probability of synthetic graphs")
      ->check(CLI::Range(0.0, 1.0));
  app->add_option("--fraction", o.fraction, "Fraction of normal graphs to perturb")
      ->check(CLI::Range(0.0, 1.0));
  app->add_option("--prob", o.prob, "Adjacency flip probability of perturbed graphs")
      ->check(CLI::Range(0.0, 1.0));
}

std::string dataset_name(const DataOptions& o) {
  if (!o.name.empty()) return o.name;
  fs::path dir = fs::path(o.data).lexically_normal();
  if (dir.filename().empty()) dir = dir.parent_path();
  return dir.filename().string();
}

// Synthetic corpora are perturbed here unless the subcommand does it itself.
Dataset load_data(const DataOptions& o, std::uint64_t seed, bool perturb_synthetic = true) {
  if (o.synthetic > 0) {
    SyntheticCorpusSpec spec;
    spec.graph_count = o.synthetic;
    spec.node_count = o.nodes;
    spec.edge_prob = o.edge_prob;
    spec.seed = stream_seed(seed, kCorpusStream);
    Dataset corpus = generate_er_corpus(spec);
    if (!perturb_synthetic) return corpus;
    return perturb_dataset(corpus, o.fraction, o.prob, stream_seed(seed, kPerturbStream));
  }
  if (o.data.empty()) throw ConfigError("one of --data or --synthetic is required");
  return parse_tudataset(o.data, dataset_name(o));
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ConfigError("cannot write " + path.string());
  file << text;
  if (!file) throw ConfigError("failed writing " + path.string());
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw ConfigError("output directory not writable: " + dir);
  return dir;
}

void add_train_options(CLI::App* app, TrainConfig& c, SplitRatios& r) {
  app->add_option("--lr", c.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  app->add_option("--batch-size", c.batch_size, "Graphs per batch")->check(CLI::PositiveNumber);
  app->add_option("--epochs", c.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
  app->add_option("--hidden", c.hidden, "Hidden dimension d")->check(CLI::PositiveNumber);
  app->add_option("--wavelets", c.wavelets, "Number of wavelets q")->check(CLI::PositiveNumber);
  app->add_option("--order", c.order, "Chebyshev order K of the first wavelet")
      ->check(CLI::PositiveNumber);
  app->add_option("--dropout", c.dropout, "Dropout rate")->check(CLI::Range(0.0, 0.99));
  app->add_option("--beta", c.beta, "Class-balance beta")->check(CLI::Range(0.0, 0.999999));
  app->add_option("--gamma", c.gamma, "Focal gamma")->check(CLI::NonNegativeNumber);
  app->add_option("--kernel", c.kernel_id, "Wavelet kernel")
      ->check(CLI::IsMember({"mexican_hat", "identity", "constant"}));
  app->add_option("--train-ratio", r.train, "Train fraction per class")->check(CLI::Range(0.0, 1.0));
  app->add_option("--val-ratio", r.val, "Validation fraction per class")->check(CLI::Range(0.0, 1.0));
}

DatasetSplits split_data(const Dataset& ds, const SplitRatios& r, std::uint64_t seed) {
  SplitSpec spec;
  spec.train = r.train;
  spec.val = r.val;
  spec.test = 1.0 - r.train - r.val;
  spec.seed = stream_seed(seed, kSplitStream);
  return stratified_split(ds, spec);
}

LossConfig loss_for(const Dataset& train_set, const TrainConfig& cfg) {
  LossConfig loss;
  loss.beta = cfg.beta;
  loss.gamma = cfg.gamma;
  loss.normal_count = static_cast<long long>(train_set.normal_count());
  loss.anomalous_count = static_cast<long long>(train_set.anomalous_count());
  return loss;
}

struct RunOutcome {
  TrainResult result;
  Metrics val, test;
  std::size_t sizes[3] = {0, 0, 0};
};

RunOutcome run_training(const Dataset& ds, TrainConfig cfg, const SplitRatios& r,
                        std::uint64_t seed) {
  const DatasetSplits splits = split_data(ds, r, seed);
  cfg.seed = stream_seed(seed, kTrainStream);
  WaveletBankCache banks(cfg.wavelets, cfg.order, cfg.kernel_id);
  RunOutcome outcome;
  outcome.result = train(splits.train, splits.val, cfg, banks);
  const LossConfig loss = loss_for(splits.train, cfg);
  outcome.val = evaluate(outcome.result.best, banks, splits.val, &loss);
  outcome.test = evaluate(outcome.result.best, banks, splits.test, &loss);
  outcome.sizes[0] = splits.train.size();
  outcome.sizes[1] = splits.val.size();
  outcome.sizes[2] = splits.test.size();
  return outcome;
}

json config_json(const TrainConfig& c) {
  return {{"lr", c.lr},           {"batch_size", c.batch_size}, {"epochs", c.epochs},
          {"hidden", c.hidden},   {"wavelets", c.wavelets},     {"order", c.order},
          {"dropout", c.dropout}, {"beta", c.beta},             {"gamma", c.gamma},
          {"kernel", c.kernel_id}};
}

std::string history_jsonl(const std::vector<EpochRecord>& history) {
  std::string text;
  for (const EpochRecord& rec : history) text += to_json(rec).dump() + "\n";
  return text;
}

// ---- subcommands ----

struct TrainArgs {
  DataOptions data;
  TrainConfig cfg;
  SplitRatios ratios;
  std::string out = "run";
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const fs::path dir = prepare_dir(a.out);
  const Dataset ds = load_data(a.data, a.seed);
  RunOutcome run;
  try {
    run = run_training(ds, a.cfg, a.ratios, a.seed);
  } catch (const DivergenceError& e) {
    save_checkpoint(e.last_good(), dir / "checkpoint.json");
    throw;
  }
  write_text(dir / "history.jsonl", history_jsonl(run.result.history));
  save_checkpoint(run.result.best, dir / "checkpoint.json");
  json metrics = {{"best_epoch", run.result.best_epoch},
                  {"val", to_json(run.val)},
                  {"test", to_json(run.test)},
                  {"sizes", {{"train", run.sizes[0]}, {"val", run.sizes[1]}, {"test", run.sizes[2]}}},
                  {"config", config_json(a.cfg)},
                  {"seed", a.seed}};
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  out << json{{"best_epoch", run.result.best_epoch}, {"test", to_json(run.test)}}.dump() << "\n";
  return kExitOk;
}

struct EvalArgs {
  DataOptions data;
  SplitRatios ratios;
  std::string checkpoint;
  std::string split = "all";
  std::string out = "eval.json";
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const ModelParams params = load_checkpoint(a.checkpoint);
  const Dataset ds = load_data(a.data, a.seed);
  if (ds.feature_dim() != params.config.feature_dim) {
    throw ShapeError("checkpoint expects " + std::to_string(params.config.feature_dim) +
                     " node features, dataset has " + std::to_string(ds.feature_dim()));
  }
  Dataset target = ds;
  if (a.split != "all") {
    DatasetSplits splits = split_data(ds, a.ratios, a.seed);
    target = a.split == "train" ? splits.train : a.split == "val" ? splits.val : splits.test;
  }
  WaveletBankCache banks(params.config.wavelets, params.config.order, params.config.kernel_id);
  const Metrics m = evaluate(params, banks, target);
  json doc = to_json(m);
  doc["split"] = a.split;
  doc["graphs"] = target.size();
  write_text(a.out, doc.dump(2) + "\n");
  out << doc.dump() << "\n";
  return kExitOk;
}

struct RqDistArgs {
  DataOptions data;
  int bins = 10;
  std::string out = "rq_dist.json";
  std::uint64_t seed = 0;
};

int cmd_rq_dist(const RqDistArgs& a, std::ostream& out) {
  const Dataset ds = load_data(a.data, a.seed);
  const RQHistogram hist = rq_histogram(ds.records(), a.bins);
  write_text(a.out, to_json(hist).dump(2) + "\n");
  out << json{{"bins", a.bins},
              {"total_variation", total_variation(hist.freq_normal, hist.freq_anomalous)}}
             .dump()
      << "\n";
  return kExitOk;
}

struct DistanceArgs {
  DataOptions data;
  int subsamples = 5;
  int bins = 10;
  std::string out = "distance_ratio.json";
  std::uint64_t seed = 0;
};

int cmd_distance(const DistanceArgs& a, std::ostream& out) {
  const Dataset ds = load_data(a.data, a.seed);
  const DistanceRatios r = distance_ratios(ds.of_class(kAnomalous), ds.of_class(kNormal),
                                           a.subsamples, stream_seed(a.seed, kAnalysisStream),
                                           a.bins);
  const json doc = to_json(r);
  write_text(a.out, doc.dump(2) + "\n");
  out << doc.dump() << "\n";
  return kExitOk;
}

struct PerturbArgs {
  DataOptions data;
  std::string out = "perturbed";
  std::uint64_t seed = 0;
};

int cmd_perturb(const PerturbArgs& a, std::ostream& out) {
  const fs::path dir = prepare_dir(a.out);
  const Dataset source = load_data(a.data, a.seed, false);
  const Dataset perturbed =
      perturb_dataset(source, a.data.fraction, a.data.prob, stream_seed(a.seed, kPerturbStream));
  // Named after the output directory so that `--data <out>` reads it back.
  DataOptions target;
  target.data = a.out;
  const std::string name = dataset_name(target);
  write_tudataset(perturbed, dir, name);
  const json summary = {{"name", name},
                        {"graphs", perturbed.size()},
                        {"normal", perturbed.normal_count()},
                        {"anomalous", perturbed.anomalous_count()},
                        {"fraction", a.data.fraction},
                        {"prob", a.data.prob},
                        {"seed", a.seed}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  out << summary.dump() << "\n";
  return kExitOk;
}

struct VerifyArgs {
  int trials = 1000;
  int graphs = 100;
  int signals = 5;
  int max_nodes = 12;
  int perturb_nodes = 8;
  int chebyshev_trials = 50;
  int chebyshev_nodes = 16;
  std::string out = "verify.json";
  std::uint64_t seed = 0;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  const Rng root(a.seed);
  const EnergyIdentityReport energy =
      check_energy_identity(a.graphs, a.signals, a.max_nodes, root.split(1).next());
  const PerturbationTrialsReport perturbation =
      check_perturbation_bounds(a.trials, a.perturb_nodes, root.split(2).next());
  const ChebyshevTrialsReport chebyshev =
      check_chebyshev_convergence(a.chebyshev_trials, a.chebyshev_nodes, root.split(3).next());
  const bool passed = energy.max_abs_error <= 1e-8 && perturbation.bound_violations == 0 &&
                      perturbation.max_identity_residual <= 1e-10 &&
                      chebyshev.max_error_order24 <= 1e-6 && chebyshev.monotonicity_failures == 0;
  const json doc = {{"energy_identity", to_json(energy)},
                    {"perturbation", to_json(perturbation)},
                    {"chebyshev", to_json(chebyshev)},
                    {"passed", passed}};
  write_text(a.out, doc.dump(2) + "\n");
  out << doc.dump() << "\n";
  return passed ? kExitOk : kExitNumerical;
}

struct SweepArgs {
  DataOptions data;
  TrainConfig cfg;
  SplitRatios ratios;
  std::string param;
  std::vector<std::string> values;
  std::string out = "sweep.jsonl";
  std::uint64_t seed = 0;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  const Dataset ds = load_data(a.data, a.seed);
  const bool integral = a.param == "d" || a.param == "q" || a.param == "K";
  std::vector<TrainConfig> configs;
  std::vector<json> values;
  for (const std::string& text : a.values) {
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw ConfigError("--values: not a number: " + text);
    }
    if (integral && (v != std::floor(v) || v < 1)) {
      throw ConfigError("--values: " + a.param + " needs positive integers, got " + text);
    }
    TrainConfig c = a.cfg;
    if (a.param == "d") c.hidden = static_cast<int>(v);
    else if (a.param == "q") c.wavelets = static_cast<int>(v);
    else if (a.param == "K") c.order = static_cast<int>(v);
    else if (a.param == "beta") c.beta = v;
    else c.gamma = v;
    c.validate();
    configs.push_back(c);
    values.push_back(integral ? json(static_cast<int>(v)) : json(v));
  }
  std::string lines;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const RunOutcome run = run_training(ds, configs[i], a.ratios, a.seed);
    const json line = {{"param", a.param},
                       {"value", values[i]},
                       {"best_epoch", run.result.best_epoch},
                       {"val", to_json(run.val)},
                       {"test", to_json(run.test)}};
    lines += line.dump() + "\n";
    out << line.dump() << "\n";
  }
  write_text(a.out, lines);
  return kExitOk;
}

struct GradcheckArgs {
  TrainConfig cfg;
  double h = 1e-5;
  double tolerance = 1e-4;
  std::string mode = "infer";
  std::string out = "gradcheck.json";
  std::uint64_t seed = 0;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const Dataset fixture(gradient_fixture(), 3);
  const std::vector<PreparedGraph> prepared = prepare_graphs(fixture);
  std::vector<const PreparedGraph*> batch;
  for (const PreparedGraph& g : prepared) batch.push_back(&g);
  const ModelParams params =
      ModelParams::initialize(a.cfg.model_config(3), stream_seed(a.seed, kTrainStream));
  WaveletBankCache banks(a.cfg.wavelets, a.cfg.order, a.cfg.kernel_id);
  const Mode mode = a.mode == "train" ? Mode::kTrain : Mode::kInfer;
  const GradientCheckResult r = gradient_check(params, banks, batch,
                                               gradient_fixture_loss(a.cfg.beta, a.cfg.gamma), a.h,
                                               mode, stream_seed(a.seed, kAnalysisStream));
  json doc = to_json(r);
  doc["h"] = a.h;
  doc["mode"] = a.mode;
  doc["passed"] = r.max_relative_error <= a.tolerance;
  write_text(a.out, doc.dump(2) + "\n");
  out << doc.dump() << "\n";
  return r.max_relative_error <= a.tolerance ? kExitOk : kExitNumerical;
}

// ---- wiring ----

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& about,
                      std::string& out, const std::string& out_help, std::uint64_t& seed) {
  CLI::App* sub = app.add_subcommand(name, about);
  // Handled by expand_config before parsing; registered here for --help.
  sub->add_option("--config", "key = value settings file (flags override it)")->type_name("FILE")->expected(1);
  sub->add_option("--out", out, out_help);
  sub->add_option("--seed", seed, "Root random seed");
  return sub;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// CLI11 only reads config files attached to the top-level app, so the
// subcommand's --config file is turned into flags here. Keys already given on
// the command line are skipped, which makes flags win over the file.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i > 0 && args[i] == "--config") {
      if (i + 1 == args.size()) throw ConfigError("--config needs a file");
      file = args[++i];
    } else if (i > 0 && args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (file.empty()) return rest;
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file);

  auto given = [&](const std::string& flag) {
    for (const auto& a : rest)
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  std::vector<std::string> expanded{rest.front()};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(file + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty() || key == "config") throw ConfigError(file + ":" + std::to_string(lineno) + ": bad key");
    if (given("--" + key)) continue;
    expanded.push_back("--" + key);
    expanded.push_back(value);
  }
  expanded.insert(expanded.end(), rest.begin() + 1, rest.end());
  return expanded;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral graph classifier for spotting anomalous graphs", "rqgnn"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  std::function<int()> action;

  TrainArgs train_args;
  {
    auto* sub = add_command(app, "train", "Train on a dataset and write history, checkpoint and metrics",
                            train_args.out, "Output directory", train_args.seed);
    add_data_options(sub, train_args.data);
    add_train_options(sub, train_args.cfg, train_args.ratios);
    sub->callback([&] { action = [&] { return cmd_train(train_args, out); }; });
  }
  EvalArgs eval_args;
  {
    auto* sub = add_command(app, "eval", "Evaluate a checkpoint", eval_args.out,
                            "Metrics JSON file", eval_args.seed);
    sub->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint JSON")->required();
    sub->add_option("--split", eval_args.split, "Which split of the data to score")
        ->check(CLI::IsMember({"all", "train", "val", "test"}));
    sub->add_option("--train-ratio", eval_args.ratios.train, "Train fraction per class")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--val-ratio", eval_args.ratios.val, "Validation fraction per class")
        ->check(CLI::Range(0.0, 1.0));
    add_data_options(sub, eval_args.data);
    sub->callback([&] { action = [&] { return cmd_eval(eval_args, out); }; });
  }
  RqDistArgs rq_args;
  {
    auto* sub = add_command(app, "rq-dist", "Class-conditional histogram of Rayleigh quotients",
                            rq_args.out, "Histogram JSON file", rq_args.seed);
    sub->add_option("--bins", rq_args.bins, "Histogram bins")->check(CLI::PositiveNumber);
    add_data_options(sub, rq_args.data);
    sub->callback([&] { action = [&] { return cmd_rq_dist(rq_args, out); }; });
  }
  DistanceArgs dist_args;
  {
    auto* sub = add_command(app, "distance-ratio", "Inter/intra-class RQ histogram distance ratios",
                            dist_args.out, "Ratios JSON file", dist_args.seed);
    sub->add_option("--subsamples", dist_args.subsamples, "Random parts per class")
        ->check(CLI::Range(2, 1 << 20));
    sub->add_option("--bins", dist_args.bins, "Histogram bins")->check(CLI::PositiveNumber);
    add_data_options(sub, dist_args.data);
    sub->callback([&] { action = [&] { return cmd_distance(dist_args, out); }; });
  }
  PerturbArgs perturb_args;
  {
    auto* sub = add_command(app, "perturb", "Write a perturbation anomaly dataset",
                            perturb_args.out, "Output directory", perturb_args.seed);
    add_data_options(sub, perturb_args.data);
    sub->callback([&] { action = [&] { return cmd_perturb(perturb_args, out); }; });
  }
  VerifyArgs verify_args;
  {
    auto* sub = add_command(app, "verify", "Check the spectral identities and bounds on random cases",
                            verify_args.out, "Report JSON file", verify_args.seed);
    sub->add_option("--trials", verify_args.trials, "Perturbation-bound trials")
        ->check(CLI::PositiveNumber);
    sub->add_option("--graphs", verify_args.graphs, "Graphs for the energy identity")
        ->check(CLI::PositiveNumber);
    sub->add_option("--signals", verify_args.signals, "Signals per graph")->check(CLI::PositiveNumber);
    sub->add_option("--max-nodes", verify_args.max_nodes, "Largest graph for the energy identity")
        ->check(CLI::Range(2, kOracleCap));
    sub->add_option("--perturb-nodes", verify_args.perturb_nodes, "Graph size for perturbation trials")
        ->check(CLI::Range(1, kOracleCap));
    sub->add_option("--chebyshev-trials", verify_args.chebyshev_trials, "Chebyshev filter trials")
        ->check(CLI::PositiveNumber);
    sub->add_option("--chebyshev-nodes", verify_args.chebyshev_nodes,
                    "Largest graph for the Chebyshev trials")
        ->check(CLI::Range(2, kOracleCap));
    sub->callback([&] { action = [&] { return cmd_verify(verify_args, out); }; });
  }
  SweepArgs sweep_args;
  {
    auto* sub = add_command(app, "sweep", "Retrain across values of one hyperparameter",
                            sweep_args.out, "JSON-lines results file", sweep_args.seed);
    sub->add_option("--param", sweep_args.param, "Parameter to vary")
        ->required()
        ->check(CLI::IsMember({"d", "q", "K", "beta", "gamma"}));
    sub->add_option("--values", sweep_args.values, "Comma-separated values")
        ->required()
        ->delimiter(',');
    add_data_options(sub, sweep_args.data);
    add_train_options(sub, sweep_args.cfg, sweep_args.ratios);
    sub->callback([&] { action = [&] { return cmd_sweep(sweep_args, out); }; });
  }
  GradcheckArgs grad_args;
  {
    auto* sub = add_command(app, "gradcheck", "Finite-difference check of the model gradients",
                            grad_args.out, "Report JSON file", grad_args.seed);
    sub->add_option("--step", grad_args.h, "Central-difference step")->check(CLI::PositiveNumber);
    sub->add_option("--mode", grad_args.mode,
                    "infer: running batch-norm statistics, no dropout; train: batch statistics")
        ->check(CLI::IsMember({"infer", "train"}));
    sub->add_option("--tolerance", grad_args.tolerance, "Largest accepted relative error")
        ->check(CLI::PositiveNumber);
    sub->add_option("--hidden", grad_args.cfg.hidden, "Hidden dimension d")
        ->check(CLI::PositiveNumber);
    sub->add_option("--wavelets", grad_args.cfg.wavelets, "Number of wavelets q")
        ->check(CLI::PositiveNumber);
    sub->add_option("--order", grad_args.cfg.order, "Chebyshev order K")
        ->check(CLI::PositiveNumber);
    sub->add_option("--dropout", grad_args.cfg.dropout, "Dropout rate")
        ->check(CLI::Range(0.0, 0.99));
    sub->callback([&] { action = [&] { return cmd_gradcheck(grad_args, out); }; });
  }

  std::vector<std::string> reversed;
  try {
    const std::vector<std::string> expanded = args.empty() ? args : expand_config(args);
    reversed.assign(expanded.rbegin(), expanded.rend());
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action ? action() : kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DegenerateSignalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace rqgnn::cli
