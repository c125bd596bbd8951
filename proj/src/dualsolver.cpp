#include "kfed/dualsolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "kfed/error.hpp"
#include "kfed/numfmt.hpp"

namespace kfed {

DualProblem::DualProblem(std::vector<LabeledSample> samples, GridPtr grid, Hyperparams hp)
    : samples_(std::move(samples)), grid_(std::move(grid)), hp_(hp) {
  if (!grid_) throw InputError("dual problem needs a grid");
  if (samples_.empty()) throw InputError("dual problem needs at least one sample");
  hp_.validate();
  for (const auto& s : samples_) {
    validate_sample(s);
    if (s.x.size() != grid_->dim()) throw InputError("sample dimension does not match the grid");
  }
  const auto points = features_of(samples_);
  kernels_ = kernel_matrix(points, *grid_);
  labels_.resize(static_cast<Eigen::Index>(samples_.size()));
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    labels_[static_cast<Eigen::Index>(i)] = samples_[i].y;
  }
}

Eigen::VectorXd DualProblem::to_normalized(std::span<const double> lambda) const {
  if (lambda.size() != samples_.size()) throw InputError("lambda length must equal sample count");
  const double n = static_cast<double>(samples_.size());
  Eigen::VectorXd nu(static_cast<Eigen::Index>(lambda.size()));
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    if (!(lambda[i] >= 0.0) || !std::isfinite(lambda[i])) {
      throw InputError("multipliers must be finite and nonnegative");
    }
    nu[static_cast<Eigen::Index>(i)] = lambda[i] / n;
  }
  return nu;
}

Eigen::VectorXd DualProblem::alpha_bar_normalized(const Eigen::VectorXd& nu) const {
  return kernels_.transpose() * nu.cwiseProduct(labels_);
}

Eigen::VectorXd DualProblem::thresholded(const Eigen::VectorXd& bar) const {
  const double cut = 2.0 * hp_.gamma;
  return bar.unaryExpr([cut](double v) { return v * v > cut ? v : 0.0; });
}

Eigen::VectorXd DualProblem::f_at_samples(const Eigen::VectorXd& alpha) const {
  return kernels_ * alpha * grid_->cell_weight();
}

double DualProblem::cellwise_value(const Eigen::VectorXd& bar, double nu_sum) const {
  const double cut = 2.0 * hp_.gamma;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < bar.size(); ++j) {
    const double v = bar[j];
    if (v * v > cut) acc += hp_.gamma - 0.5 * v * v;
  }
  return acc * grid_->cell_weight() + (1.0 - hp_.epsilon) * nu_sum;
}

std::vector<double> DualProblem::gradient(std::span<const double> lambda) const {
  const Eigen::VectorXd nu = to_normalized(lambda);
  const Eigen::VectorXd f = f_at_samples(thresholded(alpha_bar_normalized(nu)));
  const double n = static_cast<double>(samples_.size());
  std::vector<double> d(samples_.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    d[i] = (1.0 - hp_.epsilon - labels_[k] * f[k]) / n;
  }
  return d;
}

Eigen::MatrixXd DualProblem::masked_gram(std::span<const char> mask) const {
  if (mask.size() != grid_->cell_count()) throw InputError("mask length must equal cell count");
  Eigen::VectorXd weights(static_cast<Eigen::Index>(mask.size()));
  for (std::size_t j = 0; j < mask.size(); ++j) {
    weights[static_cast<Eigen::Index>(j)] = mask[j] ? grid_->cell_weight() : 0.0;
  }
  const double n = static_cast<double>(samples_.size());
  Eigen::MatrixXd q = kernels_ * weights.asDiagonal() * kernels_.transpose();
  q = labels_.asDiagonal() * q * labels_.asDiagonal();
  return q / (n * n);
}

double DualProblem::dual_value(std::span<const double> lambda) const {
  const Eigen::VectorXd nu = to_normalized(lambda);
  const Eigen::VectorXd bar = alpha_bar_normalized(nu);
  const double cut = 2.0 * hp_.gamma;
  std::vector<char> mask(grid_->cell_count());
  std::size_t support = 0;
  for (std::size_t j = 0; j < mask.size(); ++j) {
    const double v = bar[static_cast<Eigen::Index>(j)];
    mask[j] = v * v > cut;
    support += mask[j];
  }
  Eigen::Map<const Eigen::VectorXd> lam(lambda.data(), static_cast<Eigen::Index>(lambda.size()));
  const double n = static_cast<double>(samples_.size());
  double quad = 0.0;
  if (support > 0) quad = lam.dot(masked_gram(mask) * lam);
  return -0.5 * quad + (1.0 - hp_.epsilon) * lam.sum() / n +
         hp_.gamma * grid_->cell_weight() * static_cast<double>(support);
}

double DualProblem::dual_value_cellwise(std::span<const double> lambda) const {
  const Eigen::VectorXd nu = to_normalized(lambda);
  return cellwise_value(alpha_bar_normalized(nu), nu.sum());
}

double DualProblem::safe_step() const {
  // Power iteration on cw * K K^T; its top eigenvalue bounds every masked Hessian.
  Eigen::VectorXd v = Eigen::VectorXd::Ones(kernels_.rows()).normalized();
  double top = 0.0;
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd w = kernels_ * (kernels_.transpose() * v) * grid_->cell_weight();
    const double next = w.norm();
    if (next == 0.0) return std::numeric_limits<double>::infinity();
    v = w / next;
    if (std::abs(next - top) <= 1e-12 * next) {
      top = next;
      break;
    }
    top = next;
  }
  return 1.0 / top;
}

SolveResult DualProblem::ascend(const AscendOptions& opts) const {
  const std::size_t n_samples = samples_.size();
  const double n = static_cast<double>(n_samples);
  const double margin = 1.0 - hp_.epsilon;

  Eigen::VectorXd nu(static_cast<Eigen::Index>(n_samples));
  if (opts.lambda0) {
    nu = to_normalized(*opts.lambda0);
  } else if (opts.random_seed) {
    std::mt19937_64 rng(*opts.random_seed);
    std::uniform_real_distribution<double> unif(0.0, 2.0 * margin);
    for (Eigen::Index i = 0; i < nu.size(); ++i) nu[i] = unif(rng) / n;
  } else {
    nu.setConstant(margin / n);
  }

  if (opts.trace) *opts.trace << "iteration,dual_value,grad_norm,support_cells\n";

  DualState state;
  Eigen::VectorXd bar, alpha, f, loss;
  double grad_norm = 0.0;
  for (long t = 0;; ++t) {
    bar = alpha_bar_normalized(nu);
    alpha = thresholded(bar);
    f = f_at_samples(alpha);
    loss = (margin - labels_.cwiseProduct(f).array()).matrix();
    if (!loss.allFinite() || !nu.allFinite()) {
      throw SolverDivergence("dual ascent produced non-finite values", t);
    }
    double sq = 0.0;
    for (Eigen::Index i = 0; i < loss.size(); ++i) {
      if (nu[i] > 0.0 || loss[i] > 0.0) sq += loss[i] * loss[i];
    }
    grad_norm = std::sqrt(sq) / n;

    if (opts.record_trajectory || opts.trace) {
      const double g = cellwise_value(bar, nu.sum());
      if (opts.record_trajectory) state.trajectory.push_back(g);
      if (opts.trace) {
        const auto support = (alpha.array() != 0.0).count();
        *opts.trace << t << ',' << format_double(g) << ',' << format_double(grad_norm) << ','
                    << support << '\n';
      }
    }

    if (grad_norm < hp_.grad_tol && opts.stop_at_tolerance) break;
    if (t >= hp_.max_iters) break;
    nu = (nu + hp_.eta * loss).cwiseMax(0.0);
    state.iters_run = t + 1;
  }

  state.final_grad_norm = grad_norm;
  state.converged = grad_norm < hp_.grad_tol;
  state.lambda.resize(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) state.lambda[i] = nu[static_cast<Eigen::Index>(i)] * n;

  std::vector<double> values(alpha.data(), alpha.data() + alpha.size());
  SolveResult result{.dual_state = std::move(state),
                     .alpha_star = CoefficientField(grid_, std::move(values)),
                     .critical_indices = {},
                     .dual_value = cellwise_value(bar, nu.sum()),
                     .primal_value = 0.0,
                     .slackness_residual = 0.0,
                     .margin_loss = std::vector<double>(loss.data(), loss.data() + loss.size())};
  result.primal_value = elastic_net(result.alpha_star, hp_.gamma);
  double slack = 0.0;
  for (Eigen::Index i = 0; i < loss.size(); ++i) slack = std::max(slack, nu[i] * std::abs(loss[i]));
  result.slackness_residual = slack;
  result.critical_indices = critical_samples(result);
  return result;
}

std::vector<double> dual_gradient(std::span<const double> lambda,
                                  std::span<const LabeledSample> samples, const GridPtr& grid,
                                  const Hyperparams& hp) {
  return DualProblem({samples.begin(), samples.end()}, grid, hp).gradient(lambda);
}

double dual_value(std::span<const double> lambda, std::span<const LabeledSample> samples,
                  const GridPtr& grid, const Hyperparams& hp) {
  return DualProblem({samples.begin(), samples.end()}, grid, hp).dual_value(lambda);
}

SolveResult ascend(std::span<const LabeledSample> samples, const GridPtr& grid,
                   const Hyperparams& hp, const AscendOptions& opts) {
  return DualProblem({samples.begin(), samples.end()}, grid, hp).ascend(opts);
}

double lagrangian(const CoefficientField& alpha, std::span<const double> lambda,
                  std::span<const LabeledSample> samples, const Hyperparams& hp) {
  if (lambda.size() != samples.size()) throw InputError("lambda length must equal sample count");
  const double n = static_cast<double>(samples.size());
  double constraints = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double loss = 1.0 - hp.epsilon - samples[i].y * evaluate_f(alpha, samples[i].x);
    constraints += lambda[i] * loss;
  }
  return elastic_net(alpha, hp.gamma) + constraints / n;
}

double default_critical_tol(std::span<const double> lambda) {
  double top = 1.0;
  for (double l : lambda) top = std::max(top, l);
  return 1e-6 * top;
}

std::vector<std::size_t> critical_samples(const SolveResult& result, double tol) {
  const auto& lambda = result.dual_state.lambda;
  if (tol < 0.0) tol = default_critical_tol(lambda);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    if (lambda[i] > tol) out.push_back(i);
  }
  return out;
}

}  // namespace kfed
