#pragma once

#include <cstdint>
#include <vector>

#include "kfed/dualsolver.hpp"

namespace kfed {

struct GradientCheck {
  double max_abs_error = 0.0;
  /// Some +-delta perturbation flipped a support cell; the comparison is not meaningful.
  bool near_boundary = false;
};

/// Central differences of the closed-form dual against the analytic gradient.
GradientCheck gradient_check(const DualProblem& problem, std::span<const double> lambda,
                             double delta = 1e-5);

/// max_n lambda_n |1 - eps - y_n f(x_n)|, without the 1/N of the constraint.
double slackness(const SolveResult& result);

struct RemovalCheck {
  double max_cell_change = 0.0;
  std::size_t removed = 0;
  bool all_converged = true;
};

/// Drops each non-critical sample in turn, re-solves from the default start and compares
/// the thresholded fields against the full solution.
RemovalCheck removal_check(std::span<const LabeledSample> samples, const GridPtr& grid,
                           const Hyperparams& hp, const SolveResult& full);

/// Two labelled blobs whose centers are `separation` apart along the first axis.
std::vector<std::vector<LabeledSample>> two_clusters(std::uint64_t seed, std::size_t per_cluster,
                                                     double separation);

/// Small labelled point cloud in [-2, 2]^2 with both classes present.
std::vector<LabeledSample> random_instance(std::uint64_t seed, std::size_t n);

}  // namespace kfed
