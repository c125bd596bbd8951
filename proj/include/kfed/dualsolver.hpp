#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kfed/model.hpp"

namespace kfed {

/// Multipliers are in constraint units: the constraint of sample n is
/// (1/N) (1 - eps - y_n f(x_n)) <= 0 and lambda_n is its multiplier.
struct DualState {
  std::vector<double> lambda;
  long iters_run = 0;
  double final_grad_norm = 0.0;
  bool converged = false;
  /// Dual value at every visited iterate (only when requested).
  std::vector<double> trajectory;
};

struct SolveResult {
  DualState dual_state;
  CoefficientField alpha_star;
  std::vector<std::size_t> critical_indices;
  double dual_value = 0.0;
  double primal_value = 0.0;
  /// max_n lambda_n * |1 - eps - y_n f(x_n)| / N
  double slackness_residual = 0.0;
  /// 1 - eps - y_n f(x_n) at the returned multipliers.
  std::vector<double> margin_loss;
};

struct AscendOptions {
  std::optional<std::vector<double>> lambda0;
  /// Seeded random initialization, used only when lambda0 is absent.
  std::optional<std::uint64_t> random_seed;
  /// When false the loop always runs max_iters (the experiments' fixed-T mode).
  bool stop_at_tolerance = true;
  bool record_trajectory = false;
  /// CSV trace: iteration,dual_value,grad_norm,support_cells
  std::ostream* trace = nullptr;
};

/// One dual problem: a sample set, a grid and hyperparameters, plus the kernel cache.
/// Not thread-safe to share; build one per solver.
class DualProblem {
 public:
  DualProblem(std::vector<LabeledSample> samples, GridPtr grid, Hyperparams hp);

  std::size_t size() const noexcept { return samples_.size(); }
  const std::vector<LabeledSample>& samples() const noexcept { return samples_; }
  const GridPtr& grid() const noexcept { return grid_; }
  const Hyperparams& hyperparams() const noexcept { return hp_; }
  const Eigen::MatrixXd& kernels() const noexcept { return kernels_; }

  /// Cellwise bar-alpha for normalized multipliers nu = lambda / N.
  Eigen::VectorXd alpha_bar_normalized(const Eigen::VectorXd& nu) const;
  /// f at every training sample for a coefficient vector.
  Eigen::VectorXd f_at_samples(const Eigen::VectorXd& alpha) const;

  /// Gradient: entry n = (1/N)(1 - eps - y_n f*(x_n)).
  std::vector<double> gradient(std::span<const double> lambda) const;

  /// Closed-form dual via the masked Q matrix.
  double dual_value(std::span<const double> lambda) const;
  /// Same quantity evaluated cell by cell, O(N cells).
  double dual_value_cellwise(std::span<const double> lambda) const;

  /// Q restricted to the cells where mask is set, including the 1/N^2 and label signs.
  Eigen::MatrixXd masked_gram(std::span<const char> mask) const;

  SolveResult ascend(const AscendOptions& opts = {}) const;

  /// Largest eta (in the normalized step) for which the full-support quadratic model is
  /// majorized: 1 / lambda_max(sum_j cw k_j k_j^T).
  double safe_step() const;

 private:
  Eigen::VectorXd to_normalized(std::span<const double> lambda) const;
  Eigen::VectorXd thresholded(const Eigen::VectorXd& bar) const;
  double cellwise_value(const Eigen::VectorXd& bar, double nu_sum) const;

  std::vector<LabeledSample> samples_;
  GridPtr grid_;
  Hyperparams hp_;
  Eigen::MatrixXd kernels_;
  Eigen::VectorXd labels_;
};

std::vector<double> dual_gradient(std::span<const double> lambda,
                                  std::span<const LabeledSample> samples, const GridPtr& grid,
                                  const Hyperparams& hp);

double dual_value(std::span<const double> lambda, std::span<const LabeledSample> samples,
                  const GridPtr& grid, const Hyperparams& hp);

SolveResult ascend(std::span<const LabeledSample> samples, const GridPtr& grid,
                   const Hyperparams& hp, const AscendOptions& opts = {});

/// Lagrangian of the primal at an arbitrary field: elastic net plus weighted constraints.
double lagrangian(const CoefficientField& alpha, std::span<const double> lambda,
                  std::span<const LabeledSample> samples, const Hyperparams& hp);

/// Default critical-sample tolerance: 1e-6 * max(max_n lambda_n, 1).
double default_critical_tol(std::span<const double> lambda);

/// {n : lambda_n > tol}. A negative tol selects the default.
std::vector<std::size_t> critical_samples(const SolveResult& result, double tol = -1.0);

struct TheoryBound {
  double xi = 0.0;               // largest cross-partition kernel value on the support
  double mu = 0.0;               // smallest eigenvalue of the masked Q
  double support_measure = 0.0;  // m
  double L = 0.0;
  double decomposition_gap_bound = 0.0;  // 2 xi m L / N^2
};

struct DecompositionGap {
  double gap = 0.0;
  TheoryBound bound;
  /// lambda = N [lambda_1 / N_1, ..., lambda_K / N_K]
  std::vector<double> global_lambda;
};

/// |g(lambda) - sum_i g_i(lambda_i)| with the N / N_i weighting, and its bound.
DecompositionGap decomposition_gap(std::span<const std::vector<LabeledSample>> partitions,
                                   std::span<const std::vector<double>> agent_lambdas,
                                   const GridPtr& grid, const Hyperparams& hp);

DecompositionGap decomposition_gap(std::span<const std::vector<LabeledSample>> partitions,
                                   std::span<const SolveResult> agent_results,
                                   const GridPtr& grid, const Hyperparams& hp);

struct ConcavityCertificate {
  double mu = 0.0;
  bool empty_support = false;
};

/// Smallest eigenvalue of Q on the optimal support of `result`.
ConcavityCertificate strong_concavity_certificate(const SolveResult& result,
                                                  std::span<const LabeledSample> samples,
                                                  const Hyperparams& hp);

}  // namespace kfed
