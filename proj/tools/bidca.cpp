#include <CLI11.hpp>
#include <json.hpp>

#include "bidca/models.hpp"
#include "bidca/verify.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

namespace {

using bidca::Vec;
using ordered_json = nlohmann::ordered_json;

struct ExperimentConfig {
  std::string model = "svm-cv";
  std::string data;
  int folds = 3;
  double epsilon = 1e-2;
  double tol = 1e-2;
  std::string algo = "ipdca";
  std::string criterion = "summable";
  uint64_t seeds = 1;  // base seed; repetitions use seeds, seeds+1, ...
  int reps = 1;
  double beta0 = 1.0;
  double delta_beta = 5.0;
  double rho = 1e-2;
  double sigma = 1e-2;
  double zeta0 = 1e-2;
  int max_iter = 1000;
  double beta_max = 1e6;
  std::string out;
  std::string stopping;  // empty: paper rule for svm-cv, algorithm rule otherwise
  int jobs = 1;
  double train_fraction = 0.5;
  double lambda_lb = 1e-4;
  double lambda_ub = 1e4;
  double wbar_lb = 1e-6;
  double wbar_ub = 1.5;
};

std::string resolved_stopping(const ExperimentConfig& c) {
  if (!c.stopping.empty()) return c.stopping;
  return c.model == "svm-cv" ? "paper" : "algorithm";
}

bidca::DcaParams solver_params(const ExperimentConfig& c) {
  bidca::DcaParams p;
  p.rho = c.rho;
  p.sigma = c.sigma;
  p.beta0 = c.beta0;
  p.delta_beta = c.delta_beta;
  p.beta_max = c.beta_max;
  p.criterion = c.criterion == "step" ? bidca::InexactRule::step_proportional
                                      : bidca::InexactRule::summable;
  p.zeta0 = c.zeta0;
  p.tol = c.tol;
  p.max_iter = c.max_iter;
  p.stopping = resolved_stopping(c) == "paper" ? bidca::StoppingRule::paper
                                               : bidca::StoppingRule::algorithm;
  return p;
}

bidca::DcaVariant variant_of(const ExperimentConfig& c) {
  return c.algo == "ipldca" ? bidca::DcaVariant::ipl_dca : bidca::DcaVariant::ip_dca;
}

void validate_config(const ExperimentConfig& c) {
  const bool is_toy = c.model.rfind("toy:", 0) == 0;
  if (c.model != "svm-cv" && c.model != "lasso-cv" && !is_toy) {
    throw bidca::InvalidInput("unknown model '" + c.model +
                              "' (svm-cv, lasso-cv or toy:<id>)");
  }
  if (!is_toy && c.data.empty()) {
    throw bidca::InvalidInput("--data is required for " + c.model);
  }
  if (c.algo != "ipdca" && c.algo != "ipldca") {
    throw bidca::InvalidInput("--algo must be ipdca or ipldca");
  }
  if (c.criterion != "summable" && c.criterion != "step") {
    throw bidca::InvalidInput("--criterion must be summable or step");
  }
  if (!c.stopping.empty() && c.stopping != "paper" && c.stopping != "algorithm") {
    throw bidca::InvalidInput("--stopping must be paper or algorithm");
  }
  if (c.reps < 1) throw bidca::InvalidInput("--reps must be at least 1");
  if (c.jobs < 1) throw bidca::InvalidInput("--jobs must be at least 1");
  if (c.epsilon < 0.0) throw bidca::InvalidInput("--epsilon must be nonnegative");
  solver_params(c).validate();
}

std::string dataset_name(const ExperimentConfig& c) {
  if (c.model.rfind("toy:", 0) == 0) return c.model;
  return std::filesystem::path(c.data).filename().string();
}

ordered_json config_json(const ExperimentConfig& c) {
  ordered_json j;
  j["model"] = c.model;
  j["data"] = c.data;
  j["folds"] = c.folds;
  j["epsilon"] = c.epsilon;
  j["tol"] = c.tol;
  j["algo"] = c.algo;
  j["criterion"] = c.criterion;
  j["seeds"] = c.seeds;
  j["reps"] = c.reps;
  j["beta0"] = c.beta0;
  j["delta_beta"] = c.delta_beta;
  j["rho"] = c.rho;
  j["sigma"] = c.sigma;
  j["zeta0"] = c.zeta0;
  j["max_iter"] = c.max_iter;
  j["beta_max"] = c.beta_max;
  j["stopping"] = resolved_stopping(c);
  j["train_fraction"] = c.train_fraction;
  j["lambda_lb"] = c.lambda_lb;
  j["lambda_ub"] = c.lambda_ub;
  j["wbar_lb"] = c.wbar_lb;
  j["wbar_ub"] = c.wbar_ub;
  return j;
}

bidca::RunRecord base_record(const ExperimentConfig& c, uint64_t seed) {
  bidca::RunRecord r;
  r.dataset = dataset_name(c);
  r.method = c.algo;
  r.epsilon = c.epsilon;
  r.tol = c.tol;
  r.seed = seed;
  r.cv_error = std::numeric_limits<double>::quiet_NaN();
  r.test_error = std::numeric_limits<double>::quiet_NaN();
  r.config_json = config_json(c).dump();
  return r;
}

std::string status_of(const std::exception& e) {
  if (dynamic_cast<const bidca::MaxIterationsError*>(&e)) return "max_iterations";
  if (dynamic_cast<const bidca::PenaltyUnbounded*>(&e)) return "penalty_unbounded";
  if (dynamic_cast<const bidca::SubproblemFailure*>(&e)) return "subproblem_failure";
  if (dynamic_cast<const bidca::LowerLevelInfeasible*>(&e)) return "lower_infeasible";
  return "error";
}

bidca::RunRecord run_one(const ExperimentConfig& c, const bidca::Dataset& full,
                         uint64_t seed) {
  bidca::RunRecord rec = base_record(c, seed);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (c.model.rfind("toy:", 0) == 0) {
      const bidca::ToyInstance toy = bidca::build_toy(c.model.substr(4));
      const bidca::BilevelResult res = bidca::run_bilevel(
          toy.problem, c.epsilon, solver_params(c), variant_of(c), toy.x0, toy.y0);
      const Vec z = toy.problem.stack(res.x, res.y);
      rec.cv_error = toy.problem.F1.eval(z) - toy.problem.F2.eval(z);
      rec.iters = static_cast<int>(res.trace.iterations.size());
      rec.beta_final = res.trace.beta_final;
      rec.status = res.trace.termination;
    } else if (c.model == "svm-cv") {
      const auto [train, test] = bidca::split(full, seed, c.train_fraction);
      const bidca::FoldPlan plan = bidca::fold_plan(train, c.folds, seed);
      bidca::SvmBounds bounds;
      bounds.lambda_lb = c.lambda_lb;
      bounds.lambda_ub = c.lambda_ub;
      bounds.wbar_lb = c.wbar_lb;
      bounds.wbar_ub = c.wbar_ub;
      const bidca::SvmCvModel model = bidca::build_svm_cv(train, plan, bounds);
      const bidca::BilevelResult res =
          bidca::run_bilevel(model.problem, c.epsilon, solver_params(c),
                             variant_of(c), model.start_x(), model.start_y());
      rec.cv_error = bidca::cv_error(res.lower.y, model);
      const bidca::Classifier clf =
          bidca::post_process(res.x[0], res.x.tail(model.n), train, model.T);
      rec.test_error = bidca::test_error(clf, test);
      rec.iters = static_cast<int>(res.trace.iterations.size());
      rec.beta_final = res.trace.beta_final;
      rec.status = res.trace.termination;
    } else {
      const auto [train, test] = bidca::split(full, seed, c.train_fraction);
      const bidca::FoldPlan plan = bidca::fold_plan(train, c.folds, seed);
      const bidca::LassoCvModel model =
          bidca::build_lasso_cv(train, plan, c.lambda_lb, c.lambda_ub);
      const bidca::BilevelResult res =
          bidca::run_bilevel(model.problem, c.epsilon, solver_params(c),
                             variant_of(c), model.start_x(), model.start_y());
      rec.cv_error = bidca::lasso_cv_error(res.lower.y, model);
      // No post-processing is defined for the lasso model: report the test
      // mean squared error of the fold-averaged weights.
      Vec wbar_mean = Vec::Zero(model.n);
      for (int t = 0; t < model.T; ++t) {
        wbar_mean += res.lower.y.segment(model.w_offset(t), model.n);
      }
      wbar_mean /= static_cast<double>(model.T);
      double mse = 0.0;
      for (Eigen::Index j = 0; j < test.size(); ++j) {
        const double r = test.dense_row(j, model.n).dot(wbar_mean) -
                         test.rows[static_cast<size_t>(j)].label;
        mse += r * r;
      }
      rec.test_error = mse / static_cast<double>(test.size());
      rec.iters = static_cast<int>(res.trace.iterations.size());
      rec.beta_final = res.trace.beta_final;
      rec.status = res.trace.termination;
    }
  } catch (const std::exception& e) {
    rec.status = status_of(e);
    bidca::log_line(bidca::LogLevel::info,
                    "seed " + std::to_string(seed) + " failed: " + e.what());
  }
  rec.time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

std::vector<bidca::RunRecord> run_batch(const ExperimentConfig& c) {
  bidca::Dataset full;
  if (c.model.rfind("toy:", 0) != 0) {
    full = bidca::parse_libsvm_file(c.data);
  }
  std::vector<bidca::RunRecord> records(static_cast<size_t>(c.reps));
  for (int begin = 0; begin < c.reps; begin += c.jobs) {
    const int end = std::min(begin + c.jobs, c.reps);
    std::vector<std::future<bidca::RunRecord>> futs;
    for (int i = begin; i < end; ++i) {
      const uint64_t seed = c.seeds + static_cast<uint64_t>(i);
      futs.push_back(std::async(std::launch::async,
                                [&c, &full, seed] { return run_one(c, full, seed); }));
    }
    for (int i = begin; i < end; ++i) {
      records[static_cast<size_t>(i)] = futs[static_cast<size_t>(i - begin)].get();
    }
  }
  return records;
}

int emit_results(const std::vector<bidca::RunRecord>& records,
                 const std::string& out) {
  if (out.empty()) {
    bidca::write_results(records, std::cout);
  } else {
    bidca::write_results_file(records, out);
  }
  for (const bidca::RunRecord& r : records) {
    if (r.status != "converged") return 1;
  }
  return 0;
}

struct GridSpec {
  int points = 7;
  double lambda_lo = 0.0;  // 0: inherit the model bounds
  double lambda_hi = 0.0;
  std::vector<double> wbar_multipliers = {1.0};
};

int run_grid(const ExperimentConfig& c, const GridSpec& grid) {
  if (c.model.rfind("toy:", 0) == 0) {
    throw bidca::InvalidInput("grid search needs a data-backed model");
  }
  const bidca::Dataset full = bidca::parse_libsvm_file(c.data);
  const double glo = grid.lambda_lo > 0.0 ? grid.lambda_lo : c.lambda_lb;
  const double ghi = grid.lambda_hi > 0.0 ? grid.lambda_hi : c.lambda_ub;
  if (!(glo > 0.0 && ghi >= glo) || grid.points < 1) {
    throw bidca::InvalidInput("invalid grid specification");
  }

  std::vector<bidca::RunRecord> records;
  for (int i = 0; i < c.reps; ++i) {
    const uint64_t seed = c.seeds + static_cast<uint64_t>(i);
    bidca::RunRecord rec = base_record(c, seed);
    rec.method = "grid";
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const auto [train, test] = bidca::split(full, seed, c.train_fraction);
      const bidca::FoldPlan plan = bidca::fold_plan(train, c.folds, seed);
      double best_cv = bidca::kInf;
      double best_lambda = glo;
      double best_mult = 1.0;
      Vec best_y;
      if (c.model == "svm-cv") {
        bidca::SvmBounds bounds;
        bounds.lambda_lb = c.lambda_lb;
        bounds.lambda_ub = c.lambda_ub;
        bounds.wbar_lb = c.wbar_lb;
        bounds.wbar_ub = c.wbar_ub;
        const bidca::SvmCvModel model = bidca::build_svm_cv(train, plan, bounds);
        for (int gp = 0; gp < grid.points; ++gp) {
          const double frac =
              grid.points == 1 ? 0.0
                               : static_cast<double>(gp) / (grid.points - 1.0);
          const double lambda = glo * std::pow(ghi / glo, frac);
          for (double mult : grid.wbar_multipliers) {
            Vec x(model.dim_x());
            x[0] = std::clamp(1.0 / lambda, bounds.mu_lo(), bounds.mu_hi());
            x.tail(model.n).setConstant(
                std::clamp(mult * bounds.wbar_ub, bounds.wbar_lb, bounds.wbar_ub));
            const bidca::LowerSolution sol = bidca::solve_lower(model.problem, x);
            const double cv = bidca::cv_error(sol.y, model);
            if (cv < best_cv) {
              best_cv = cv;
              best_lambda = lambda;
              best_mult = mult;
              best_y = sol.y;
            }
          }
        }
        const double mu = std::clamp(1.0 / best_lambda, bounds.mu_lo(), bounds.mu_hi());
        const Vec wbar = Vec::Constant(
            model.n,
            std::clamp(best_mult * bounds.wbar_ub, bounds.wbar_lb, bounds.wbar_ub));
        const bidca::Classifier clf = bidca::post_process(mu, wbar, train, model.T);
        rec.cv_error = best_cv;
        rec.test_error = bidca::test_error(clf, test);
      } else {
        const bidca::LassoCvModel model =
            bidca::build_lasso_cv(train, plan, c.lambda_lb, c.lambda_ub);
        for (int gp = 0; gp < grid.points; ++gp) {
          const double frac =
              grid.points == 1 ? 0.0
                               : static_cast<double>(gp) / (grid.points - 1.0);
          const double lambda = glo * std::pow(ghi / glo, frac);
          const Vec x = Vec::Constant(1, std::clamp(lambda, c.lambda_lb, c.lambda_ub));
          const bidca::LowerSolution sol = bidca::solve_lower(model.problem, x);
          const double cv = bidca::lasso_cv_error(sol.y, model);
          if (cv < best_cv) {
            best_cv = cv;
            best_lambda = lambda;
            best_y = sol.y;
          }
        }
        rec.cv_error = best_cv;
        Vec wbar_mean = Vec::Zero(model.n);
        for (int t = 0; t < model.T; ++t) {
          wbar_mean += best_y.segment(model.w_offset(t), model.n);
        }
        wbar_mean /= static_cast<double>(model.T);
        double mse = 0.0;
        for (Eigen::Index j = 0; j < test.size(); ++j) {
          const double r = test.dense_row(j, model.n).dot(wbar_mean) -
                           test.rows[static_cast<size_t>(j)].label;
          mse += r * r;
        }
        rec.test_error = mse / static_cast<double>(test.size());
      }
      rec.iters = grid.points;
      rec.beta_final = best_lambda;  // the selected hyperparameter
      rec.status = "converged";
    } catch (const std::exception& e) {
      rec.status = status_of(e);
      bidca::log_line(bidca::LogLevel::info,
                      "grid seed " + std::to_string(seed) + " failed: " + e.what());
    }
    rec.time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    records.push_back(std::move(rec));
  }
  return emit_results(records, c.out);
}

void add_common_flags(CLI::App* cmd, ExperimentConfig& c) {
  cmd->add_option("--model", c.model, "svm-cv, lasso-cv or toy:<id>");
  cmd->add_option("--data", c.data, "LIBSVM-format dataset path");
  cmd->add_option("--folds", c.folds, "cross-validation folds T");
  cmd->add_option("--epsilon", c.epsilon, "value-function relaxation");
  cmd->add_option("--tol", c.tol, "outer stopping tolerance");
  cmd->add_option("--algo", c.algo, "ipdca or ipldca");
  cmd->add_option("--criterion", c.criterion, "inexactness rule: summable or step");
  cmd->add_option("--seeds", c.seeds, "base seed");
  cmd->add_option("--reps", c.reps, "number of seeded repetitions");
  cmd->add_option("--beta0", c.beta0, "initial penalty parameter");
  cmd->add_option("--delta-beta", c.delta_beta, "penalty increment");
  cmd->add_option("--rho", c.rho, "prox modulus (ipdca)");
  cmd->add_option("--sigma", c.sigma, "strong-convexity margin (ipldca)");
  cmd->add_option("--zeta0", c.zeta0, "summable-criterion scale");
  cmd->add_option("--max-iter", c.max_iter, "outer iteration cap");
  cmd->add_option("--beta-max", c.beta_max, "penalty ceiling");
  cmd->add_option("--out", c.out, "results file (default stdout)");
  cmd->add_option("--stopping", c.stopping,
                  "stopping rule: paper or algorithm (default: paper for svm-cv)");
  cmd->add_option("--jobs", c.jobs, "concurrent repetitions");
  cmd->add_option("--train-fraction", c.train_fraction, "train split fraction");
  cmd->add_option("--lambda-lb", c.lambda_lb, "lower bound of lambda");
  cmd->add_option("--lambda-ub", c.lambda_ub, "upper bound of lambda");
  cmd->add_option("--wbar-lb", c.wbar_lb, "lower bound of wbar (svm-cv)");
  cmd->add_option("--wbar-ub", c.wbar_ub, "upper bound of wbar (svm-cv)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bidca: difference-of-convex bilevel solver and experiment runner"};
  app.require_subcommand(1);

  ExperimentConfig solve_cfg;
  CLI::App* solve = app.add_subcommand("solve", "run bilevel experiments");
  add_common_flags(solve, solve_cfg);

  ExperimentConfig grid_cfg;
  GridSpec grid_spec;
  CLI::App* grid = app.add_subcommand("grid", "grid-search baseline");
  add_common_flags(grid, grid_cfg);
  grid->add_option("--grid-points", grid_spec.points, "log-spaced lambda count");
  grid->add_option("--grid-lambda-lb", grid_spec.lambda_lo, "grid lambda lower end");
  grid->add_option("--grid-lambda-ub", grid_spec.lambda_hi, "grid lambda upper end");
  grid->add_option("--grid-wbar", grid_spec.wbar_multipliers,
                   "wbar_ub multipliers to sweep (svm-cv)");

  std::string scope = "fast";
  CLI::App* verify = app.add_subcommand("verify", "run the invariant suites");
  verify->add_option("scope", scope, "fast or full");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (solve->parsed()) {
      validate_config(solve_cfg);
      return emit_results(run_batch(solve_cfg), solve_cfg.out);
    }
    if (grid->parsed()) {
      validate_config(grid_cfg);
      return run_grid(grid_cfg, grid_spec);
    }
    if (verify->parsed()) {
      const bidca::verify::Report report = bidca::verify::run(scope);
      bidca::verify::print(report, std::cout);
      return report.all_pass() ? 0 : 1;
    }
  } catch (const bidca::InvalidInput& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const bidca::ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const bidca::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
