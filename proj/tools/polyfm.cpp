#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "polyfm/common.hpp"
#include "polyfm/direct.hpp"
#include "polyfm/lifted.hpp"
#include "polyfm/model_io.hpp"
#include "polyfm/sparse_data.hpp"
#include "polyfm/tuning.hpp"
#include "polyfm/verify.hpp"

namespace {

using namespace polyfm;

struct DataOpts {
  std::string path;
  Index features = 0;  // 0: infer from the file
  std::string scale = "none";
};

struct TrainOpts {
  std::string solver = "direct";
  std::string kernel = "anova";
  int degree = 2;
  Index rank = 8;
  double beta = 0.0;
  std::string loss = "squared";
  Index epochs = 100;
  double tol = 1e-5;
  std::uint64_t seed = 42;
  Index augment_count = 0;
  std::string fit_lambda = "ones";
  double init_std = 0.01;
  bool full_cache = false;
};

void add_data_options(CLI::App* cmd, DataOpts& opts) {
  cmd->add_option("--data", opts.path, "svmlight/libsvm data file")
      ->required();
  cmd->add_option("--features", opts.features,
                  "feature count override (default: inferred)");
  cmd->add_option("--scale", opts.scale,
                  "per-feature scaling applied after loading")
      ->check(CLI::IsMember({"none", "maxabs"}));
}

void add_train_options(CLI::App* cmd, TrainOpts& opts) {
  cmd->add_option("--solver", opts.solver, "training scheme")
      ->check(CLI::IsMember({"direct", "lifted"}));
  cmd->add_option("--kernel", opts.kernel, "kernel family")
      ->check(CLI::IsMember({"anova", "poly"}));
  cmd->add_option("--degree", opts.degree, "kernel degree m");
  cmd->add_option("--rank", opts.rank,
                  "basis count (direct) or factorization rank (lifted)");
  cmd->add_option("--beta", opts.beta, "regularization strength");
  cmd->add_option("--loss", opts.loss, "loss function")
      ->check(CLI::IsMember({"squared", "squared-hinge", "logistic"}));
  cmd->add_option("--epochs", opts.epochs, "maximum training epochs");
  cmd->add_option("--tol", opts.tol, "stop once the epoch change is <= tol");
  cmd->add_option("--seed", opts.seed, "random seed");
  cmd->add_option("--augment", opts.augment_count,
                  "prepend this many all-ones features");
  cmd->add_option("--fit-lambda", opts.fit_lambda,
                  "basis weight policy (direct solver)")
      ->check(CLI::IsMember({"ones", "fit", "signs"}));
  cmd->add_option("--init-std", opts.init_std,
                  "stddev of the random initialization");
  cmd->add_flag("--full-cache", opts.full_cache,
                "lifted solver: cache all factor/sample inner products");
}

SparseDataset load_data(const DataOpts& opts) {
  SparseDataset ds = load_svmlight(opts.path, opts.features);
  if (opts.scale == "maxabs") {
    // per-feature max-abs scaling; columns that are all zero stay zero
    std::vector<double> inv(ds.n_features(), 1.0);
    for (Index j = 0; j < ds.n_features(); ++j) {
      double mx = 0.0;
      for (double v : ds.col_values(j)) mx = std::max(mx, std::abs(v));
      if (mx > 0.0) inv[j] = 1.0 / mx;
    }
    std::vector<Sample> rows(ds.n_samples());
    std::vector<double> targets(ds.n_samples());
    for (Index i = 0; i < ds.n_samples(); ++i) {
      SampleView r = ds.row(i);
      for (Index t = 0; t < r.size(); ++t) {
        rows[i].indices.push_back(r.indices[t]);
        rows[i].values.push_back(r.values[t] * inv[r.indices[t]]);
      }
      targets[i] = ds.target(i);
    }
    ds = SparseDataset::from_rows(rows, targets, ds.n_features());
  }
  return ds;
}

TrainConfig to_config(const TrainOpts& opts, double beta) {
  TrainConfig config;
  config.beta = beta;
  config.rank = opts.rank;
  config.degree = opts.degree;
  config.epochs = opts.epochs;
  config.tol = opts.tol;
  config.seed = opts.seed;
  config.lambda_policy = lambda_policy_from_name(opts.fit_lambda);
  config.init_std = opts.init_std;
  config.full_cache = opts.full_cache;
  return config;
}

void validate_combo(const TrainOpts& opts) {
  if (opts.solver == "direct") {
    if (opts.kernel == "poly")
      throw ConfigError(
          "the direct solver supports the anova kernel only; train poly "
          "models with --solver lifted");
    if (opts.degree != 2 && opts.degree != 3)
      throw ConfigError("the direct solver supports --degree 2 or 3, got " +
                        std::to_string(opts.degree));
  } else {
    if (opts.kernel == "anova" && opts.degree != 2)
      throw ConfigError(
          "the lifted solver supports the anova kernel at --degree 2 only, "
          "got " +
          std::to_string(opts.degree));
    if (opts.kernel == "poly" && opts.degree < 2)
      throw ConfigError("the lifted solver requires --degree >= 2, got " +
                        std::to_string(opts.degree));
  }
}

// Trains per the option set and wraps the result for storage. Per-epoch
// lines go to `log` when it is non-null: "epoch<TAB>objective<TAB>delta".
StoredModel train_stored(const SparseDataset& raw, const TrainOpts& opts,
                         double beta, std::ostream* log) {
  validate_combo(opts);
  const SparseDataset ds =
      opts.augment_count > 0 ? augment(raw, opts.augment_count) : raw;
  const Loss loss = Loss::from_name(opts.loss);
  const TrainConfig config = to_config(opts, beta);
  Index epochs_run = 0;
  EpochCallback on_epoch = [&](Index epoch, double objective, double delta) {
    epochs_run = epoch;
    if (log)
      *log << epoch << '\t' << format_double(objective) << '\t'
           << format_double(delta) << '\n';
  };

  StoredModel stored;
  if (opts.solver == "direct") {
    stored.model = train_direct(ds, config, loss, on_epoch);
  } else {
    const KernelFamily family = opts.kernel == "poly"
                                    ? KernelFamily::homogeneous
                                    : KernelFamily::anova;
    stored.model = train_lifted(ds, config, loss, family, on_epoch);
  }
  stored.augmented_count = opts.augment_count;
  stored.training = {beta, opts.loss, opts.seed, epochs_run};
  return stored;
}

int cmd_train(const DataOpts& data_opts, const TrainOpts& train_opts,
              const std::string& model_path) {
  const SparseDataset raw = load_data(data_opts);
  const StoredModel stored =
      train_stored(raw, train_opts, train_opts.beta, &std::cout);
  save_model(stored, model_path);
  return 0;
}

int cmd_predict(const DataOpts& data_opts, const std::string& model_path) {
  const StoredModel stored = load_model(model_path);
  DataOpts opts = data_opts;
  if (opts.features == 0) opts.features = stored.raw_features();
  const SparseDataset ds = load_data(opts);
  const Eigen::VectorXd pred = predict_all(stored, ds);
  for (Index i = 0; i < pred.size(); ++i)
    std::cout << format_double(pred[i]) << '\n';
  return 0;
}

int cmd_evaluate(const DataOpts& data_opts, const std::string& model_path,
                 const std::string& metric) {
  const StoredModel stored = load_model(model_path);
  DataOpts opts = data_opts;
  if (opts.features == 0) opts.features = stored.raw_features();
  const SparseDataset ds = load_data(opts);
  const Eigen::VectorXd pred = predict_all(stored, ds);
  const double value =
      metric == "rmse" ? rmse(pred, ds.targets()) : r2(pred, ds.targets());
  std::cout << metric << '\t' << format_double(value) << '\n';
  return 0;
}

std::vector<double> parse_beta_grid(const std::string& spec) {
  const auto first = spec.find(':');
  const auto second = spec.find(':', first + 1);
  if (first == std::string::npos || second == std::string::npos)
    throw ConfigError("--beta-grid expects lo:hi:count, got '" + spec + "'");
  try {
    const double lo = std::stod(spec.substr(0, first));
    const double hi = std::stod(spec.substr(first + 1, second - first - 1));
    const Index count =
        static_cast<Index>(std::stoll(spec.substr(second + 1)));
    return log_grid(lo, hi, count);
  } catch (const std::logic_error&) {
    throw ConfigError("--beta-grid expects lo:hi:count, got '" + spec + "'");
  }
}

int cmd_cv(const DataOpts& data_opts, const TrainOpts& train_opts,
           const std::string& grid_spec, int folds, const std::string& metric,
           const std::string& model_path) {
  validate_combo(train_opts);
  const std::vector<double> betas = parse_beta_grid(grid_spec);
  const SparseDataset raw = load_data(data_opts);

  Trainer trainer = [&](const SparseDataset& train, double beta) {
    // fold models share a StoredModel wrapper so augmentation is re-applied
    auto stored = std::make_shared<StoredModel>(
        train_stored(train, train_opts, beta, nullptr));
    return [stored](SampleView x) { return stored->predict(x); };
  };
  Metric score = metric == "rmse" ? Metric(rmse) : Metric(r2);

  const auto results =
      cross_validate(raw, betas, folds, train_opts.seed, trainer, score);
  for (const auto& r : results)
    std::cout << format_double(r.beta) << '\t' << format_double(r.mean)
              << '\t' << format_double(r.sd) << '\n';
  const std::size_t best = select_best(results, metric == "rmse");
  std::cout << "selected\t" << format_double(results[best].beta) << '\n';

  if (!model_path.empty()) {
    const StoredModel stored =
        train_stored(raw, train_opts, results[best].beta, nullptr);
    save_model(stored, model_path);
  }
  return 0;
}

int cmd_verify(std::uint64_t seed, Index trials, Index max_dim) {
  const auto results = polyfm::verify::run_all(seed, trials, max_dim);
  bool all_passed = true;
  for (const auto& r : results) {
    if (r.passed) {
      std::cout << "PASS " << r.name << " (" << r.trials << " trials)\n";
    } else {
      all_passed = false;
      std::cout << "FAIL " << r.name << ": " << r.detail << '\n';
    }
  }
  return all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Low-rank polynomial models (factorization machines and polynomial "
      "networks) trained by coordinate descent"};
  app.require_subcommand(1);

  DataOpts data_opts;
  TrainOpts train_opts;
  std::string model_path;
  std::string metric = "rmse";
  std::string grid_spec;
  int folds = 5;
  std::uint64_t verify_seed = 42;
  Index verify_trials = 200;
  Index verify_max_dim = 6;

  CLI::App* train = app.add_subcommand("train", "train a model");
  add_data_options(train, data_opts);
  add_train_options(train, train_opts);
  train->add_option("--model", model_path, "output .fmjson path")->required();

  CLI::App* predict =
      app.add_subcommand("predict", "print one prediction per sample");
  add_data_options(predict, data_opts);
  predict->add_option("--model", model_path, "trained .fmjson model")
      ->required();

  CLI::App* evaluate = app.add_subcommand("evaluate", "score a model");
  add_data_options(evaluate, data_opts);
  evaluate->add_option("--model", model_path, "trained .fmjson model")
      ->required();
  evaluate->add_option("--metric", metric, "evaluation metric")
      ->check(CLI::IsMember({"rmse", "r2"}));

  CLI::App* cv = app.add_subcommand(
      "cv", "cross-validate over a beta grid, then retrain at the best one");
  add_data_options(cv, data_opts);
  add_train_options(cv, train_opts);
  cv->add_option("--beta-grid", grid_spec,
                 "log-spaced grid as lo:hi:count, e.g. 1e-3:1e3:10")
      ->required();
  cv->add_option("--folds", folds, "number of folds");
  cv->add_option("--metric", metric, "selection metric")
      ->check(CLI::IsMember({"rmse", "r2"}));
  cv->add_option("--model", model_path,
                 "write the retrained model here (optional)");

  CLI::App* verify = app.add_subcommand(
      "verify", "run randomized identity checks against the oracles");
  verify->add_option("--seed", verify_seed, "random seed");
  verify->add_option("--trials", verify_trials, "trials per property");
  verify->add_option("--max-dim", verify_max_dim,
                     "cap on oracle problem dimensions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(data_opts, train_opts, model_path);
    if (predict->parsed()) return cmd_predict(data_opts, model_path);
    if (evaluate->parsed())
      return cmd_evaluate(data_opts, model_path, metric);
    if (cv->parsed())
      return cmd_cv(data_opts, train_opts, grid_spec, folds, metric,
                    model_path);
    if (verify->parsed())
      return cmd_verify(verify_seed, verify_trials, verify_max_dim);
  } catch (const polyfm::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
