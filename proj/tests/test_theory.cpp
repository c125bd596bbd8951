#include <cmath>

#include "doctest.h"
#include "kfed/dualsolver.hpp"
#include "kfed/error.hpp"
#include "kfed/validation.hpp"

using namespace kfed;

namespace {

GridPtr grid_for(const std::vector<std::vector<LabeledSample>>& parts, int res = 30) {
  std::vector<std::vector<double>> pts;
  for (const auto& p : parts)
    for (const auto& s : p) pts.push_back(s.x);
  GridSpec spec;
  spec.resolution = res;
  return std::make_shared<const QuadratureGrid>(QuadratureGrid::fit(pts, spec));
}

Hyperparams fixed_t() {
  return {.gamma = 25.0, .epsilon = 0.01, .eta = 0.1, .max_iters = 1000, .grad_tol = 1e-5};
}

double naive_gap(const std::vector<std::vector<LabeledSample>>& parts,
                 const std::vector<std::vector<double>>& lambdas, const GridPtr& g,
                 const Hyperparams& hp, const std::vector<double>& global_lambda) {
  std::vector<LabeledSample> all;
  for (const auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < parts.size(); ++i) sum += dual_value(lambdas[i], parts[i], g, hp);
  return std::abs(dual_value(global_lambda, all, g, hp) - sum);
}

}  // namespace

TEST_CASE("a single agent has no decomposition gap") {
  const auto parts = two_clusters(1, 10, 0.0);
  std::vector<std::vector<LabeledSample>> one{parts[0]};
  const auto g = grid_for(one);
  const auto r = ascend(one[0], g, fixed_t());
  const auto gap = decomposition_gap(one, std::vector<SolveResult>{r}, g, fixed_t());
  CHECK(gap.gap == 0.0);
  CHECK(gap.bound.xi == 0.0);
  CHECK(gap.bound.decomposition_gap_bound == 0.0);
  CHECK(gap.global_lambda == r.dual_state.lambda);
}

TEST_CASE("identical agents give a finite gap and bound") {
  const auto parts = two_clusters(2, 8, 0.0);
  std::vector<std::vector<LabeledSample>> twin{parts[0], parts[0]};
  const auto g = grid_for(twin);
  const auto r = ascend(twin[0], g, fixed_t());
  const auto gap =
      decomposition_gap(twin, std::vector<std::vector<double>>{r.dual_state.lambda, r.dual_state.lambda}, g,
                        fixed_t());
  CHECK(std::isfinite(gap.gap));
  CHECK(std::isfinite(gap.bound.decomposition_gap_bound));
  CHECK(gap.bound.xi > 0.9);
  CHECK(gap.bound.xi <= 1.0);
  CHECK(gap.gap > 0.0);
  CHECK(gap.global_lambda.size() == 16);
}

TEST_CASE("global multipliers use the N / N_i weighting") {
  const auto parts = two_clusters(3, 6, 30.0);
  std::vector<std::vector<LabeledSample>> uneven{parts[0], {parts[1][0], parts[1][1], parts[1][2]}};
  const auto g = grid_for(uneven, 12);
  const std::vector<std::vector<double>> lambdas{{1, 2, 3, 4, 5, 6}, {3, 6, 9}};
  const auto gap = decomposition_gap(uneven, lambdas, g, fixed_t());
  REQUIRE(gap.global_lambda.size() == 9);
  CHECK(gap.global_lambda[0] == doctest::Approx(9.0 / 6.0 * 1));
  CHECK(gap.global_lambda[6] == doctest::Approx(9.0 / 3.0 * 3));
  // L = sum over ordered pairs of (N/N_i)(N/N_j)(1'lambda_i)(1'lambda_j)
  CHECK(gap.bound.L == doctest::Approx(2 * (9.0 / 6 * 21) * (9.0 / 3 * 18)));
}

TEST_CASE("cellwise gap agrees with the closed-form difference") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto parts = two_clusters(seed, 10, 2.0 + seed);
    const auto g = grid_for(parts, 20);
    const Hyperparams hp = fixed_t();
    std::vector<std::vector<double>> lambdas;
    for (const auto& p : parts) lambdas.push_back(ascend(p, g, hp).dual_state.lambda);
    const auto gap = decomposition_gap(parts, lambdas, g, hp);
    const double naive = naive_gap(parts, lambdas, g, hp, gap.global_lambda);
    CHECK(std::abs(naive - gap.gap) <= 1e-10);
  }
}

TEST_CASE("far clusters stay within the decomposition bound") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto parts = two_clusters(seed + 10, 12, 21.0);
    const auto g = grid_for(parts);
    const Hyperparams hp = fixed_t();
    std::vector<SolveResult> rs;
    for (const auto& p : parts) rs.push_back(ascend(p, g, hp));
    const auto gap = decomposition_gap(parts, rs, g, hp);
    CHECK(gap.gap <= gap.bound.decomposition_gap_bound);
    CHECK(gap.bound.xi >= 0.0);
    CHECK(gap.bound.xi <= 1.0);
    CHECK(gap.bound.mu >= 0.0);
    CHECK(std::isfinite(gap.bound.decomposition_gap_bound));
    CHECK(gap.bound.support_measure > 0.0);
  }
}

TEST_CASE("decomposition gap validates its metadata") {
  const auto parts = two_clusters(4, 4, 5.0);
  const auto g = grid_for(parts, 8);
  const Hyperparams hp = fixed_t();
  CHECK_THROWS_AS(decomposition_gap(std::vector<std::vector<LabeledSample>>{},
                                    std::vector<std::vector<double>>{}, g, hp),
                  InputError);
  CHECK_THROWS_AS(decomposition_gap(parts, std::vector<std::vector<double>>{{1, 1, 1, 1}}, g, hp),
                  InputError);
  CHECK_THROWS_AS(
      decomposition_gap(parts, std::vector<std::vector<double>>{{1, 1, 1, 1}, {1, 1}}, g, hp),
      InputError);
}
