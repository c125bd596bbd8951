#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kfed {

/// Discretized width set W of the Gaussian family k(x, s; w) = exp(-|x - s|^2 / (2 w^2)).
class KernelFamily {
 public:
  /// Widths must be positive; they are sorted and must be distinct.
  explicit KernelFamily(std::vector<double> widths);

  const std::vector<double>& widths() const noexcept { return widths_; }
  std::size_t size() const noexcept { return widths_.size(); }
  double max_width() const noexcept { return widths_.back(); }

 private:
  std::vector<double> widths_;
};

/// Gaussian kernel. Throws InputError on dimension mismatch or w <= 0.
double eval_kernel(std::span<const double> x, std::span<const double> s, double w);

/// Measure placed on the center box S. W always carries the counting measure.
///  - lebesgue: cell weight is the product of per-dimension spacings.
///  - uniform:  S carries the uniform probability measure, cell weight is 1 / cells_per_layer.
enum class Measure { lebesgue, uniform };

std::string to_string(Measure m);
Measure measure_from_string(const std::string& s);

struct GridSpec {
  int resolution = 30;
  std::vector<double> widths{0.5, 1.0, 2.0};
  Measure measure = Measure::uniform;
  /// Box inflation around the data, in multiples of the largest width, per side.
  double inflate = 2.0;
};

/// Uniform lattice over S x W. Cell j lives in width layer j / cells_per_layer; inside a
/// layer cells are ordered row-major with dimension 0 slowest. Immutable after construction.
class QuadratureGrid {
 public:
  QuadratureGrid(std::vector<double> box_lo, std::vector<double> box_hi, int resolution,
                 KernelFamily family, Measure measure = Measure::uniform);

  /// Bounding box of `points` inflated by spec.inflate * max width per side.
  static QuadratureGrid fit(std::span<const std::vector<double>> points, const GridSpec& spec);

  std::size_t dim() const noexcept { return box_lo_.size(); }
  int resolution() const noexcept { return resolution_; }
  std::size_t cells_per_layer() const noexcept { return cells_per_layer_; }
  std::size_t cell_count() const noexcept { return cells_per_layer_ * family_.size(); }
  double cell_weight() const noexcept { return cell_weight_; }
  Measure measure() const noexcept { return measure_; }
  const KernelFamily& family() const noexcept { return family_; }
  const std::vector<double>& box_lo() const noexcept { return box_lo_; }
  const std::vector<double>& box_hi() const noexcept { return box_hi_; }

  std::span<const double> center(std::size_t cell) const noexcept {
    const std::size_t c = cell % cells_per_layer_;
    return {centers_.data() + c * dim(), dim()};
  }
  double width(std::size_t cell) const noexcept {
    return family_.widths()[cell / cells_per_layer_];
  }

  /// Volume of S under the Lebesgue measure.
  double box_volume() const noexcept;

 private:
  std::vector<double> box_lo_;
  std::vector<double> box_hi_;
  int resolution_;
  KernelFamily family_;
  Measure measure_;
  std::size_t cells_per_layer_ = 0;
  double cell_weight_ = 0.0;
  std::vector<double> centers_;  // cells_per_layer x dim
};

using GridPtr = std::shared_ptr<const QuadratureGrid>;

/// Entry j is k(x, s_j; w_j).
std::vector<double> kernel_row(std::span<const double> x, const QuadratureGrid& grid);

/// (y_n y_m / n_total^2) * sum over masked cells of k(x_n, s_j; w_j) k(x_m, s_j; w_j) * cell_weight.
double cross_gram(std::span<const double> x_n, std::span<const double> x_m, int y_n, int y_m,
                  const QuadratureGrid& grid, std::span<const char> support_mask,
                  std::size_t n_total);

/// Row n is kernel_row(points[n]). Column-major N x cells; the solver's per-instance cache.
Eigen::MatrixXd kernel_matrix(std::span<const std::vector<double>> points,
                              const QuadratureGrid& grid);

}  // namespace kfed
