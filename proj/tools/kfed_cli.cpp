#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "kfed/datasets.hpp"
#include "kfed/error.hpp"
#include "kfed/experiments.hpp"
#include "kfed/federation.hpp"
#include "kfed/numfmt.hpp"
#include "kfed/validation.hpp"

namespace {

using kfed::RunConfig;

// Flags that map one-to-one onto RunConfig keys.
const std::vector<std::pair<std::string, std::string>> kConfigFlags = {
    {"experiment", "sample-size | gamma | agents"},
    {"seed", "base seed; repetition r uses seed + r"},
    {"reps", "repetitions per sweep point"},
    {"out", "output path"},
    {"gamma", "sparsity weight (a list when sweeping gamma)"},
    {"n", "training sample count (a list when sweeping sample size)"},
    {"agents", "agent count, a perfect square for synthetic data (a list when sweeping agents)"},
    {"epsilon", "margin slack in [0, 1]"},
    {"eta", "ascent step"},
    {"iters", "iteration count T"},
    {"grad-tol", "projected-gradient tolerance"},
    {"grid-res", "grid cells per dimension"},
    {"widths", "kernel widths, comma separated"},
    {"measure", "uniform | lebesgue"},
    {"inflate", "grid padding in multiples of the largest width"},
    {"data", "accelerometer CSV replacing the synthetic generator"},
    {"label-map", "activity labels, e.g. Walking=+1,Jogging=-1"},
    {"test-fraction", "held-out fraction per user for file data"},
    {"noise", "synthetic noise standard deviation"},
    {"overlap", "subspace overlap fraction"},
    {"test-size", "synthetic test-set size"},
    {"early-stop", "stop at grad-tol instead of running all iterations"},
    {"jobs", "worker threads for repetitions"},
};

struct Common {
  std::string config_path;
  std::map<std::string, std::string> values;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "key=value file (or a JSON sidecar)");
  for (const auto& [name, help] : kConfigFlags) {
    app->add_option_function<std::string>(
        "--" + name, [&c, key = name](const std::string& v) { c.values[key] = v; }, help);
  }
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : kfed::load_config(c.config_path);
  for (const auto& [k, v] : c.values) cfg.apply(k, v);
  return cfg;
}

std::shared_ptr<const kfed::QuadratureGrid> fit_grid(const std::vector<kfed::LabeledSample>& s,
                                                     const RunConfig& cfg) {
  const auto points = kfed::features_of(s);
  return std::make_shared<const kfed::QuadratureGrid>(kfed::QuadratureGrid::fit(points, cfg.grid));
}

// One configuration point: every list must hold at most one value.
RunConfig single_point(const Common& c) {
  RunConfig base = resolve(c);
  if (base.gamma_list.size() > 1 || base.n_list.size() > 1 || base.agents_list.size() > 1) {
    throw kfed::InputError("this command takes single values for gamma, n and agents");
  }
  base.experiment = kfed::Experiment::gamma;
  const RunConfig cfg = base.at(base.gamma_list.empty() ? base.hp.gamma : base.gamma_list.front());
  cfg.hp.validate();
  return cfg;
}

int cmd_gen(const Common& c) {
  const RunConfig cfg = single_point(c);
  kfed::SyntheticSpec spec = cfg.synthetic;
  spec.seed = cfg.base_seed;
  if (!cfg.out_path.empty()) kfed::check_output_path(cfg.out_path);
  const auto data = kfed::generate_synthetic(spec);
  if (cfg.out_path.empty()) {
    kfed::write_dataset_csv(std::cout, data);
  } else {
    std::ofstream out(cfg.out_path);
    kfed::write_dataset_csv(out, data);
  }
  return 0;
}

int cmd_solve(const Common& c, const std::string& mode, const std::string& model_path,
              bool trace) {
  const RunConfig cfg = single_point(c);
  if (!cfg.out_path.empty()) kfed::check_output_path(cfg.out_path);
  if (!model_path.empty()) kfed::check_output_path(model_path);

  std::vector<std::vector<kfed::LabeledSample>> partitions;
  std::vector<kfed::LabeledSample> test;
  if (cfg.data_path.empty()) {
    kfed::SyntheticSpec spec = cfg.synthetic;
    spec.seed = cfg.base_seed;
    auto data = kfed::generate_synthetic(spec);
    partitions = data.nonempty_partitions();
    test = std::move(data.test_set);
  } else {
    const auto file = kfed::ingest_accelerometer(cfg.data_path, kfed::parse_label_map(cfg.label_map));
    std::map<std::string, std::vector<kfed::LabeledSample>> by_user;
    std::vector<std::string> users;
    for (std::size_t i = 0; i < file.samples.size(); ++i) {
      auto [it, fresh] = by_user.try_emplace(file.users[i]);
      if (fresh) users.push_back(file.users[i]);
      it->second.push_back(file.samples[i]);
    }
    const std::size_t k = std::min(users.size(), cfg.agents_list.empty() ? users.size()
                                                                         : cfg.synthetic.k_subspaces);
    for (std::size_t i = 0; i < k; ++i) {
      if (by_user[users[i]].size() < 2) continue;
      auto [train, held] = kfed::split(by_user[users[i]], cfg.test_fraction, cfg.base_seed + i);
      partitions.push_back(std::move(train));
      test.insert(test.end(), held.begin(), held.end());
    }
  }
  std::vector<kfed::LabeledSample> pooled;
  for (const auto& p : partitions) pooled.insert(pooled.end(), p.begin(), p.end());
  if (pooled.empty()) throw kfed::InputError("no training samples");
  const auto grid = fit_grid(pooled, cfg);

  kfed::AscendOptions opts;
  opts.stop_at_tolerance = cfg.early_stop;
  if (trace) opts.trace = &std::cerr;

  nlohmann::ordered_json line{{"mode", mode}, {"samples", pooled.size()}};
  std::unique_ptr<kfed::CoefficientField> model;
  if (mode == "fed") {
    kfed::FederationOptions fo;
    fo.server = opts;
    fo.agent.stop_at_tolerance = cfg.early_stop;
    const auto report = kfed::run_federation(partitions, grid, cfg.hp, fo);
    line.update(nlohmann::ordered_json::parse(kfed::report_json_line(report)));
    line["test_accuracy"] = kfed::accuracy(report.global_model, test);
    model = std::make_unique<kfed::CoefficientField>(report.global_model);
  } else if (mode == "cen") {
    const auto cen = kfed::centralized_train(pooled, grid, cfg.hp, opts);
    line["communication_cost"] = pooled.size();
    line["representation_cost"] = cen.model.nonzero_count();
    line["iters"] = cen.result.dual_state.iters_run;
    line["converged"] = cen.result.dual_state.converged;
    line["test_accuracy"] = kfed::accuracy(cen.model, test);
    model = std::make_unique<kfed::CoefficientField>(cen.model);
  } else {
    throw kfed::InputError("--mode must be fed or cen");
  }
  const std::string text = line.dump() + "\n";
  if (cfg.out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(cfg.out_path, std::ios::app);
    out << text;
  }
  if (!model_path.empty()) {
    std::ofstream out(model_path);
    kfed::write_model(out, *model);
  }
  return 0;
}

int cmd_sweep(const Common& c) {
  RunConfig cfg = resolve(c);
  cfg.validate();
  if (!cfg.out_path.empty()) kfed::check_output_path(cfg.out_path);
  const auto table = kfed::run_sweep(cfg);
  if (cfg.out_path.empty()) {
    std::cout << kfed::sweep_csv(table);
  } else {
    kfed::emit_outputs(table, cfg, cfg.out_path);
  }
  return 0;
}

int cmd_check(const Common& c) {
  const RunConfig cfg = single_point(c);
  kfed::Hyperparams hp = cfg.hp;
  hp.max_iters = 200000;
  hp.grad_tol = 1e-10;
  bool ok = true;
  auto report = [&](const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
    ok = ok && pass;
  };

  const auto samples = kfed::random_instance(cfg.base_seed, 16);
  const auto grid = fit_grid(samples, cfg);
  // Step just under the monotone-ascent bound.
  hp.eta = 0.9 * kfed::DualProblem(samples, grid, hp).safe_step();
  const kfed::DualProblem problem(samples, grid, hp);
  const auto solved = problem.ascend();
  const bool exact = solved.dual_state.converged;
  if (!exact) {
    std::cout << "SKIP slackness, removal: the ascent cycles around a kink of the dual "
                 "(grad norm " << kfed::format_double(solved.dual_state.final_grad_norm)
              << "); try another --seed\n";
  } else {
    const double slack = kfed::slackness(solved);
    report("slackness", slack <= 1e-3, "max lambda*|loss| = " + kfed::format_double(slack));
  }

  std::vector<double> lambda(samples.size());
  for (std::size_t i = 0; i < lambda.size(); ++i) lambda[i] = 0.5 + 0.1 * static_cast<double>(i % 7);
  const auto grad = kfed::gradient_check(problem, lambda);
  report("gradient", grad.near_boundary || grad.max_abs_error <= 1e-4,
         "max |fd - analytic| = " + kfed::format_double(grad.max_abs_error) +
             (grad.near_boundary ? " (near a threshold boundary)" : ""));

  if (exact) {
    const auto removal = kfed::removal_check(samples, grid, hp, solved);
    report("removal", removal.all_converged && removal.max_cell_change <= 1e-6,
           std::to_string(removal.removed) + " non-critical samples dropped, max cell change " +
               kfed::format_double(removal.max_cell_change));
  }

  const auto clusters = kfed::two_clusters(cfg.base_seed, 12, 10.0 * cfg.grid.widths.back() + 1.0);
  std::vector<kfed::LabeledSample> all;
  for (const auto& p : clusters) all.insert(all.end(), p.begin(), p.end());
  const auto cgrid = fit_grid(all, cfg);
  std::vector<kfed::SolveResult> agents;
  for (const auto& p : clusters) agents.push_back(kfed::ascend(p, cgrid, cfg.hp));
  const auto gap = kfed::decomposition_gap(clusters, agents, cgrid, cfg.hp);
  report("decomposition", gap.gap <= gap.bound.decomposition_gap_bound,
         "gap " + kfed::format_double(gap.gap) + " <= bound " +
             kfed::format_double(gap.bound.decomposition_gap_bound));
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated sparse kernel classification"};
  app.require_subcommand(1);

  Common gen_c, solve_c, sweep_c, check_c;
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset as CSV");
  add_common(gen, gen_c);
  auto* solve = app.add_subcommand("solve", "one federated or centralized run");
  add_common(solve, solve_c);
  std::string mode = "fed";
  std::string model_path;
  bool trace = false;
  solve->add_option("--mode", mode, "fed | cen");
  solve->add_option("--model", model_path, "write the trained model here");
  solve->add_flag("--trace", trace, "per-iteration CSV trace on stderr");
  auto* sweep = app.add_subcommand("sweep", "sample-size, gamma or agent-count sweep");
  add_common(sweep, sweep_c);
  auto* check = app.add_subcommand("check", "theory validation on small instances");
  add_common(check, check_c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen(gen_c);
    if (*solve) return cmd_solve(solve_c, mode, model_path, trace);
    if (*sweep) return cmd_sweep(sweep_c);
    if (*check) return cmd_check(check_c);
  } catch (const kfed::SolverDivergence& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
