#include <algorithm>
#include <cmath>

#include "kfed/dualsolver.hpp"
#include "kfed/error.hpp"

namespace kfed {

namespace {

bool in_support(double v, double gamma) { return v * v > 2.0 * gamma; }

double cell_term(double v, double gamma) { return in_support(v, gamma) ? gamma - 0.5 * v * v : 0.0; }

// h(sum a_i) - sum h(a_i) for one cell, where h is the thresholded cell term. The common case
// of a single contributing agent is written as a product so that a tiny spill-over r from the
// other agents is not lost to cancellation.
double cell_difference(std::span<const double> parts, double gamma) {
  std::size_t active = 0;
  std::size_t which = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (in_support(parts[i], gamma)) {
      ++active;
      which = i;
    }
  }
  double rest = 0.0;
  if (active == 1) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i != which) rest += parts[i];
    }
    const double a = parts[which];
    const double total = a + rest;
    if (in_support(total, gamma)) return -0.5 * rest * (2.0 * a + rest);
    return 0.5 * a * a - gamma;
  }
  double total = 0.0;
  double separate = 0.0;
  for (double v : parts) {
    total += v;
    separate += cell_term(v, gamma);
  }
  return cell_term(total, gamma) - separate;
}

}  // namespace

DecompositionGap decomposition_gap(std::span<const std::vector<LabeledSample>> partitions,
                                   std::span<const std::vector<double>> agent_lambdas,
                                   const GridPtr& grid, const Hyperparams& hp) {
  if (partitions.empty()) throw InputError("decomposition gap needs partition metadata");
  if (agent_lambdas.size() != partitions.size()) {
    throw InputError("one multiplier vector per partition is required");
  }
  const std::size_t k = partitions.size();
  std::size_t n_total = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (partitions[i].empty()) throw InputError("partitions must be nonempty");
    if (agent_lambdas[i].size() != partitions[i].size()) {
      throw InputError("multiplier vector length must match its partition");
    }
    n_total += partitions[i].size();
  }
  const double n = static_cast<double>(n_total);
  const std::size_t cells = grid->cell_count();

  std::vector<Eigen::VectorXd> bars(k);
  std::vector<Eigen::VectorXd> kmax(k);
  std::vector<double> mass(k);
  DecompositionGap out;
  out.global_lambda.reserve(n_total);
  for (std::size_t i = 0; i < k; ++i) {
    DualProblem agent(partitions[i], grid, hp);
    const double ni = static_cast<double>(partitions[i].size());
    Eigen::VectorXd nu(static_cast<Eigen::Index>(ni));
    for (std::size_t s = 0; s < partitions[i].size(); ++s) {
      const double l = agent_lambdas[i][s];
      if (!(l >= 0.0) || !std::isfinite(l)) throw InputError("multipliers must be nonnegative");
      nu[static_cast<Eigen::Index>(s)] = l / ni;
      out.global_lambda.push_back(n * l / ni);
    }
    bars[i] = agent.alpha_bar_normalized(nu);
    kmax[i] = agent.kernels().colwise().maxCoeff().transpose();
    mass[i] = nu.sum() * n;  // N / N_i * 1^T lambda_i
  }

  // The concatenated nu is exactly the agents' nu, so the linear terms cancel and only the
  // per-cell quadratic terms remain.
  std::vector<double> parts(k);
  double diff = 0.0;
  std::size_t union_cells = 0;
  double xi = 0.0;
  for (std::size_t j = 0; j < cells; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    double total = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < k; ++i) {
      parts[i] = bars[i][jj];
      total += parts[i];
      any = any || in_support(parts[i], hp.gamma);
    }
    any = any || in_support(total, hp.gamma);
    diff += cell_difference(parts, hp.gamma);
    if (!any) continue;
    ++union_cells;
    std::size_t owner = 0;
    for (std::size_t i = 1; i < k; ++i) {
      if (kmax[i][jj] > kmax[owner][jj]) owner = i;
    }
    for (std::size_t i = 0; i < k; ++i) {
      if (i != owner) xi = std::max(xi, kmax[i][jj]);
    }
  }
  out.gap = std::abs(diff * grid->cell_weight());

  double l_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i != j) l_sum += mass[i] * mass[j];
    }
  }
  out.bound.xi = xi;
  out.bound.support_measure = grid->cell_weight() * static_cast<double>(union_cells);
  out.bound.L = l_sum;
  out.bound.decomposition_gap_bound = 2.0 * xi * out.bound.support_measure * l_sum / (n * n);

  std::vector<LabeledSample> all;
  all.reserve(n_total);
  for (const auto& p : partitions) all.insert(all.end(), p.begin(), p.end());
  DualProblem global(std::move(all), grid, hp);
  const Eigen::VectorXd nu_global =
      Eigen::Map<const Eigen::VectorXd>(out.global_lambda.data(),
                                        static_cast<Eigen::Index>(n_total)) / n;
  const Eigen::VectorXd bar = global.alpha_bar_normalized(nu_global);
  std::vector<char> mask(cells);
  bool empty = true;
  for (std::size_t j = 0; j < cells; ++j) {
    mask[j] = in_support(bar[static_cast<Eigen::Index>(j)], hp.gamma);
    empty = empty && !mask[j];
  }
  if (!empty) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(global.masked_gram(mask),
                                                      Eigen::EigenvaluesOnly);
    out.bound.mu = std::max(0.0, es.eigenvalues().minCoeff());
  }
  return out;
}

DecompositionGap decomposition_gap(std::span<const std::vector<LabeledSample>> partitions,
                                   std::span<const SolveResult> agent_results,
                                   const GridPtr& grid, const Hyperparams& hp) {
  std::vector<std::vector<double>> lambdas;
  lambdas.reserve(agent_results.size());
  for (const auto& r : agent_results) lambdas.push_back(r.dual_state.lambda);
  return decomposition_gap(partitions, lambdas, grid, hp);
}

ConcavityCertificate strong_concavity_certificate(const SolveResult& result,
                                                  std::span<const LabeledSample> samples,
                                                  const Hyperparams& hp) {
  const auto mask = result.alpha_star.support_mask();
  if (std::none_of(mask.begin(), mask.end(), [](char c) { return c != 0; })) {
    return {.mu = 0.0, .empty_support = true};
  }
  DualProblem problem({samples.begin(), samples.end()}, result.alpha_star.grid_ptr(), hp);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(problem.masked_gram(mask),
                                                    Eigen::EigenvaluesOnly);
  return {.mu = std::max(0.0, es.eigenvalues().minCoeff()), .empty_support = false};
}

}  // namespace kfed
