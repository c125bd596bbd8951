#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "kfed/kernelgrid.hpp"

namespace kfed {

/// One training pair: features in R^p and a class in {-1, +1}.
struct LabeledSample {
  std::vector<double> x;
  int y = 1;

  bool operator==(const LabeledSample&) const = default;
};

/// Throws InputError unless y is +-1 and all features are finite.
void validate_sample(const LabeledSample& s);

std::vector<std::vector<double>> features_of(std::span<const LabeledSample> samples);

struct Hyperparams {
  double gamma = 25.0;     // sparsity weight, >= 0
  double epsilon = 0.01;   // margin slack in [0, 1]; 1 is the degenerate zero-margin case
  double eta = 0.1;        // ascent step, applied to lambda / N
  long max_iters = 1000;   // T
  double grad_tol = 1e-5;  // projected-gradient tolerance

  void validate() const;
};

/// Values of the coefficient function alpha(s, w) on every grid cell.
class CoefficientField {
 public:
  explicit CoefficientField(GridPtr grid);
  CoefficientField(GridPtr grid, std::vector<double> values);

  const QuadratureGrid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double operator[](std::size_t j) const noexcept { return values_[j]; }

  std::size_t nonzero_count() const noexcept;
  /// cell_weight * nonzero_count: the discretized L0 measure.
  double support_measure() const noexcept;
  /// Squared L2 norm, sum of value^2 * cell_weight.
  double l2_squared() const noexcept;
  std::vector<char> support_mask() const;

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

/// bar(s_j, w_j) = (1/N) sum_n lambda_n y_n k(x_n, s_j; w_j).
CoefficientField alpha_bar(std::span<const double> lambda, std::span<const LabeledSample> samples,
                           const GridPtr& grid);

/// Keeps a cell's value where value^2 > 2 gamma (strict), zero elsewhere.
CoefficientField threshold(const CoefficientField& bar, double gamma);

/// f(x) = sum_j alpha_j k(x, s_j; w_j) cell_weight.
double evaluate_f(const CoefficientField& alpha, std::span<const double> x);

/// sum_j (alpha_j^2 / 2 + gamma [alpha_j != 0]) cell_weight.
double elastic_net(const CoefficientField& alpha, double gamma);

/// Sign of f with the tie f == 0 going to +1.
int predict(const CoefficientField& alpha, std::span<const double> x);

/// Fraction of samples whose predicted class matches.
double accuracy(const CoefficientField& alpha, std::span<const LabeledSample> samples);

// Text model format: one header line with the grid parameters, then one line per nonzero
// cell holding the center coordinates, the width and the value. Doubles use the shortest
// representation that round-trips exactly.
void write_model(std::ostream& out, const CoefficientField& alpha);
CoefficientField read_model(std::istream& in);

}  // namespace kfed
