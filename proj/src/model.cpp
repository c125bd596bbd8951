#include "kfed/model.hpp"

#include <algorithm>
#include <cmath>

#include "kfed/error.hpp"

namespace kfed {

void validate_sample(const LabeledSample& s) {
  if (s.y != 1 && s.y != -1) throw InputError("class labels must be -1 or +1");
  for (double v : s.x) {
    if (!std::isfinite(v)) throw InputError("sample features must be finite");
  }
}

std::vector<std::vector<double>> features_of(std::span<const LabeledSample> samples) {
  std::vector<std::vector<double>> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.x);
  return out;
}

void Hyperparams::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InputError("gamma must be >= 0");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InputError("epsilon must lie in [0, 1]");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InputError("eta must be > 0");
  if (max_iters < 1) throw InputError("max_iters must be >= 1");
  if (!(grad_tol > 0.0)) throw InputError("grad_tol must be > 0");
}

CoefficientField::CoefficientField(GridPtr grid) : grid_(std::move(grid)) {
  if (!grid_) throw InputError("coefficient field needs a grid");
  values_.assign(grid_->cell_count(), 0.0);
}

CoefficientField::CoefficientField(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw InputError("coefficient field needs a grid");
  if (values_.size() != grid_->cell_count()) {
    throw InputError("coefficient field length must equal the grid cell count");
  }
}

std::size_t CoefficientField::nonzero_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [](double v) { return v != 0.0; }));
}

double CoefficientField::support_measure() const noexcept {
  return grid_->cell_weight() * static_cast<double>(nonzero_count());
}

double CoefficientField::l2_squared() const noexcept {
  double acc = 0.0;
  for (double v : values_) acc += v * v;
  return acc * grid_->cell_weight();
}

std::vector<char> CoefficientField::support_mask() const {
  std::vector<char> mask(values_.size());
  for (std::size_t j = 0; j < values_.size(); ++j) mask[j] = values_[j] != 0.0;
  return mask;
}

CoefficientField alpha_bar(std::span<const double> lambda, std::span<const LabeledSample> samples,
                           const GridPtr& grid) {
  if (samples.empty()) throw InputError("alpha_bar: need at least one sample");
  if (lambda.size() != samples.size()) throw InputError("alpha_bar: lambda length mismatch");
  for (double l : lambda) {
    if (!(l >= 0.0)) throw InputError("alpha_bar: multipliers must be nonnegative");
  }
  const double n = static_cast<double>(samples.size());
  std::vector<double> values(grid->cell_count(), 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (lambda[i] == 0.0) continue;
    const double coef = lambda[i] / n * samples[i].y;
    const auto row = kernel_row(samples[i].x, *grid);
    for (std::size_t j = 0; j < values.size(); ++j) values[j] += coef * row[j];
  }
  return CoefficientField(grid, std::move(values));
}

CoefficientField threshold(const CoefficientField& bar, double gamma) {
  const double cut = 2.0 * gamma;
  std::vector<double> out(bar.values().size(), 0.0);
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double v = bar[j];
    if (v * v > cut) out[j] = v;
  }
  return CoefficientField(bar.grid_ptr(), std::move(out));
}

double evaluate_f(const CoefficientField& alpha, std::span<const double> x) {
  const auto& grid = alpha.grid();
  if (x.size() != grid.dim()) throw InputError("evaluate_f: dimension mismatch");
  double acc = 0.0;
  for (std::size_t j = 0; j < grid.cell_count(); ++j) {
    const double a = alpha[j];
    if (a == 0.0) continue;
    acc += a * eval_kernel(x, grid.center(j), grid.width(j));
  }
  return acc * grid.cell_weight();
}

double elastic_net(const CoefficientField& alpha, double gamma) {
  double acc = 0.0;
  for (double v : alpha.values()) {
    if (v != 0.0) acc += 0.5 * v * v + gamma;
  }
  return acc * alpha.grid().cell_weight();
}

int predict(const CoefficientField& alpha, std::span<const double> x) {
  return evaluate_f(alpha, x) >= 0.0 ? 1 : -1;
}

double accuracy(const CoefficientField& alpha, std::span<const LabeledSample> samples) {
  if (samples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : samples) hits += predict(alpha, s.x) == s.y;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace kfed
