#include "kfed/kernelgrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kfed/error.hpp"

namespace kfed {

namespace {

inline double sq_dist(const double* a, const double* b, std::size_t p) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return d2;
}

inline double gauss(double d2, double w) { return std::exp(-d2 / (2.0 * w * w)); }

}  // namespace

KernelFamily::KernelFamily(std::vector<double> widths) : widths_(std::move(widths)) {
  if (widths_.empty()) throw InputError("kernel family needs at least one width");
  for (double w : widths_) {
    if (!(w > 0.0) || !std::isfinite(w)) throw InputError("kernel widths must be positive and finite");
  }
  std::sort(widths_.begin(), widths_.end());
  if (std::adjacent_find(widths_.begin(), widths_.end()) != widths_.end()) {
    throw InputError("kernel widths must be distinct");
  }
}

double eval_kernel(std::span<const double> x, std::span<const double> s, double w) {
  if (x.size() != s.size()) throw InputError("eval_kernel: dimension mismatch");
  if (!(w > 0.0)) throw InputError("eval_kernel: width must be positive");
  return gauss(sq_dist(x.data(), s.data(), x.size()), w);
}

std::string to_string(Measure m) { return m == Measure::lebesgue ? "lebesgue" : "uniform"; }

Measure measure_from_string(const std::string& s) {
  if (s == "lebesgue") return Measure::lebesgue;
  if (s == "uniform") return Measure::uniform;
  throw InputError("unknown measure '" + s + "' (expected lebesgue or uniform)");
}

QuadratureGrid::QuadratureGrid(std::vector<double> box_lo, std::vector<double> box_hi,
                               int resolution, KernelFamily family, Measure measure)
    : box_lo_(std::move(box_lo)),
      box_hi_(std::move(box_hi)),
      resolution_(resolution),
      family_(std::move(family)),
      measure_(measure) {
  if (box_lo_.empty() || box_lo_.size() != box_hi_.size()) {
    throw InputError("grid box corners must be non-empty and of equal dimension");
  }
  if (resolution_ < 1) throw InputError("grid resolution must be >= 1");
  for (std::size_t d = 0; d < box_lo_.size(); ++d) {
    if (!(box_lo_[d] < box_hi_[d]) || !std::isfinite(box_lo_[d]) || !std::isfinite(box_hi_[d])) {
      throw InputError("grid box must satisfy lo < hi componentwise");
    }
  }
  const std::size_t p = box_lo_.size();
  cells_per_layer_ = 1;
  for (std::size_t d = 0; d < p; ++d) {
    if (cells_per_layer_ > std::numeric_limits<std::size_t>::max() / resolution_) {
      throw InputError("grid too large");
    }
    cells_per_layer_ *= static_cast<std::size_t>(resolution_);
  }

  std::vector<double> spacing(p);
  for (std::size_t d = 0; d < p; ++d) spacing[d] = (box_hi_[d] - box_lo_[d]) / resolution_;

  if (measure_ == Measure::lebesgue) {
    cell_weight_ = 1.0;
    for (double h : spacing) cell_weight_ *= h;
  } else {
    cell_weight_ = 1.0 / static_cast<double>(cells_per_layer_);
  }

  centers_.resize(cells_per_layer_ * p);
  std::vector<int> idx(p, 0);
  for (std::size_t c = 0; c < cells_per_layer_; ++c) {
    for (std::size_t d = 0; d < p; ++d) {
      centers_[c * p + d] = box_lo_[d] + spacing[d] * (idx[d] + 0.5);
    }
    for (std::size_t d = p; d-- > 0;) {
      if (++idx[d] < resolution_) break;
      idx[d] = 0;
    }
  }
}

QuadratureGrid QuadratureGrid::fit(std::span<const std::vector<double>> points,
                                   const GridSpec& spec) {
  if (points.empty()) throw InputError("cannot fit a grid to an empty point set");
  KernelFamily family(spec.widths);
  const std::size_t p = points.front().size();
  if (p == 0) throw InputError("points must have at least one feature");
  std::vector<double> lo(p, std::numeric_limits<double>::infinity());
  std::vector<double> hi(p, -std::numeric_limits<double>::infinity());
  for (const auto& x : points) {
    if (x.size() != p) throw InputError("points have inconsistent dimensions");
    for (std::size_t d = 0; d < p; ++d) {
      lo[d] = std::min(lo[d], x[d]);
      hi[d] = std::max(hi[d], x[d]);
    }
  }
  const double pad = spec.inflate * family.max_width();
  if (!(pad > 0.0)) throw InputError("grid inflation must be positive");
  for (std::size_t d = 0; d < p; ++d) {
    lo[d] -= pad;
    hi[d] += pad;
  }
  return QuadratureGrid(std::move(lo), std::move(hi), spec.resolution, std::move(family),
                        spec.measure);
}

double QuadratureGrid::box_volume() const noexcept {
  double v = 1.0;
  for (std::size_t d = 0; d < dim(); ++d) v *= box_hi_[d] - box_lo_[d];
  return v;
}

std::vector<double> kernel_row(std::span<const double> x, const QuadratureGrid& grid) {
  if (x.size() != grid.dim()) throw InputError("kernel_row: dimension mismatch");
  const std::size_t cpl = grid.cells_per_layer();
  const auto& widths = grid.family().widths();
  std::vector<double> row(grid.cell_count());
  for (std::size_t c = 0; c < cpl; ++c) {
    const double d2 = sq_dist(x.data(), grid.center(c).data(), x.size());
    for (std::size_t l = 0; l < widths.size(); ++l) row[l * cpl + c] = gauss(d2, widths[l]);
  }
  return row;
}

double cross_gram(std::span<const double> x_n, std::span<const double> x_m, int y_n, int y_m,
                  const QuadratureGrid& grid, std::span<const char> support_mask,
                  std::size_t n_total) {
  if (support_mask.size() != grid.cell_count()) {
    throw InputError("cross_gram: mask length must equal the cell count");
  }
  if (n_total < 1) throw InputError("cross_gram: n_total must be >= 1");
  if (x_n.size() != grid.dim() || x_m.size() != grid.dim()) {
    throw InputError("cross_gram: dimension mismatch");
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < grid.cell_count(); ++j) {
    if (!support_mask[j]) continue;
    const auto s = grid.center(j);
    const double w = grid.width(j);
    acc += gauss(sq_dist(x_n.data(), s.data(), s.size()), w) *
           gauss(sq_dist(x_m.data(), s.data(), s.size()), w);
  }
  const double n = static_cast<double>(n_total);
  return static_cast<double>(y_n * y_m) / (n * n) * acc * grid.cell_weight();
}

Eigen::MatrixXd kernel_matrix(std::span<const std::vector<double>> points,
                              const QuadratureGrid& grid) {
  const std::size_t n = points.size();
  const std::size_t cpl = grid.cells_per_layer();
  const auto& widths = grid.family().widths();
  Eigen::MatrixXd k(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(grid.cell_count()));
  for (std::size_t i = 0; i < n; ++i) {
    if (points[i].size() != grid.dim()) throw InputError("kernel_matrix: dimension mismatch");
  }
  for (std::size_t c = 0; c < cpl; ++c) {
    const double* s = grid.center(c).data();
    for (std::size_t i = 0; i < n; ++i) {
      const double d2 = sq_dist(points[i].data(), s, grid.dim());
      for (std::size_t l = 0; l < widths.size(); ++l) {
        k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l * cpl + c)) =
            gauss(d2, widths[l]);
      }
    }
  }
  return k;
}

}  // namespace kfed
