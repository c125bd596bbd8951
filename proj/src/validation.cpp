#include "kfed/validation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "kfed/error.hpp"

namespace kfed {

namespace {

std::vector<char> support_at(const DualProblem& p, std::span<const double> lambda) {
  const double n = static_cast<double>(p.size());
  Eigen::VectorXd nu(static_cast<Eigen::Index>(lambda.size()));
  for (std::size_t i = 0; i < lambda.size(); ++i) nu[static_cast<Eigen::Index>(i)] = lambda[i] / n;
  const Eigen::VectorXd bar = p.alpha_bar_normalized(nu);
  std::vector<char> mask(static_cast<std::size_t>(bar.size()));
  for (Eigen::Index j = 0; j < bar.size(); ++j) {
    mask[static_cast<std::size_t>(j)] = bar[j] * bar[j] > 2.0 * p.hyperparams().gamma;
  }
  return mask;
}

}  // namespace

GradientCheck gradient_check(const DualProblem& problem, std::span<const double> lambda,
                             double delta) {
  if (!(delta > 0.0)) throw InputError("finite-difference step must be positive");
  GradientCheck out;
  const auto grad = problem.gradient(lambda);
  const auto base_mask = support_at(problem, lambda);
  std::vector<double> plus(lambda.begin(), lambda.end());
  std::vector<double> minus(lambda.begin(), lambda.end());
  for (std::size_t n = 0; n < lambda.size(); ++n) {
    plus[n] = lambda[n] + delta;
    minus[n] = std::max(0.0, lambda[n] - delta);
    const double step = plus[n] - minus[n];
    if (support_at(problem, plus) != base_mask || support_at(problem, minus) != base_mask) {
      out.near_boundary = true;
    }
    const double fd = (problem.dual_value(plus) - problem.dual_value(minus)) / step;
    out.max_abs_error = std::max(out.max_abs_error, std::abs(fd - grad[n]));
    plus[n] = minus[n] = lambda[n];
  }
  return out;
}

double slackness(const SolveResult& result) {
  double worst = 0.0;
  const auto& lambda = result.dual_state.lambda;
  for (std::size_t n = 0; n < lambda.size(); ++n) {
    worst = std::max(worst, lambda[n] * std::abs(result.margin_loss[n]));
  }
  return worst;
}

RemovalCheck removal_check(std::span<const LabeledSample> samples, const GridPtr& grid,
                           const Hyperparams& hp, const SolveResult& full) {
  RemovalCheck out;
  out.all_converged = full.dual_state.converged;
  std::vector<char> critical(samples.size(), 0);
  for (std::size_t i : full.critical_indices) critical[i] = 1;
  for (std::size_t drop = 0; drop < samples.size(); ++drop) {
    if (critical[drop]) continue;
    std::vector<LabeledSample> rest;
    rest.reserve(samples.size() - 1);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (i != drop) rest.push_back(samples[i]);
    }
    if (rest.empty()) continue;
    const SolveResult r = ascend(rest, grid, hp);
    out.all_converged = out.all_converged && r.dual_state.converged;
    for (std::size_t j = 0; j < grid->cell_count(); ++j) {
      out.max_cell_change = std::max(out.max_cell_change, std::abs(r.alpha_star[j] - full.alpha_star[j]));
    }
    ++out.removed;
  }
  return out;
}

std::vector<std::vector<LabeledSample>> two_clusters(std::uint64_t seed, std::size_t per_cluster,
                                                     double separation) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::vector<std::vector<LabeledSample>> out(2);
  for (std::size_t c = 0; c < 2; ++c) {
    const double shift = c == 0 ? 0.0 : separation;
    for (std::size_t i = 0; i < per_cluster; ++i) {
      const double a = u(rng);
      const double b = u(rng);
      // Alternate labels by construction so both classes exist in every cluster.
      const int y = i % 2 == 0 ? 1 : -1;
      const double offset = y > 0 ? 0.75 : -0.75;
      out[c].push_back({{shift + a, 0.5 * b + offset}, y});
    }
  }
  return out;
}

std::vector<LabeledSample> random_instance(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<LabeledSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = u(rng);
    const double b = u(rng);
    int y = a + 0.5 * b > 0.0 ? 1 : -1;
    if (i < 2) y = i == 0 ? 1 : -1;
    out.push_back({{a, b}, y});
  }
  return out;
}

}  // namespace kfed
