#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "kfed/error.hpp"
#include "kfed/model.hpp"

using namespace kfed;

namespace {

GridPtr small_grid(Measure m = Measure::uniform) {
  return std::make_shared<const QuadratureGrid>(std::vector<double>{-3, -3},
                                                std::vector<double>{3, 3}, 9,
                                                KernelFamily({0.5, 1, 2}), m);
}

CoefficientField random_field(const GridPtr& g, std::uint64_t seed, double density = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-5, 5);
  std::vector<double> v(g->cell_count());
  for (auto& x : v) x = u(rng) < 10.0 * density - 5.0 ? u(rng) : 0.0;
  return CoefficientField(g, std::move(v));
}

}  // namespace

TEST_CASE("sample and hyperparameter validation") {
  CHECK_NOTHROW(validate_sample({{0.0, 1.0}, -1}));
  CHECK_THROWS_AS(validate_sample({{0.0, 1.0}, 0}), InputError);
  CHECK_THROWS_AS(validate_sample({{0.0, NAN}, 1}), InputError);
  Hyperparams hp;
  CHECK_NOTHROW(hp.validate());
  hp.epsilon = 1.0;
  CHECK_NOTHROW(hp.validate());
  hp.epsilon = 1.5;
  CHECK_THROWS_AS(hp.validate(), InputError);
  hp = {};
  hp.gamma = -1;
  CHECK_THROWS_AS(hp.validate(), InputError);
  hp = {};
  hp.eta = 0;
  CHECK_THROWS_AS(hp.validate(), InputError);
  hp = {};
  hp.max_iters = 0;
  CHECK_THROWS_AS(hp.validate(), InputError);
}

TEST_CASE("coefficient field length must match the grid") {
  auto g = small_grid();
  CHECK_THROWS_AS(CoefficientField(g, std::vector<double>(3)), InputError);
  CoefficientField z(g);
  CHECK(z.nonzero_count() == 0);
  CHECK(z.support_measure() == 0.0);
}

TEST_CASE("alpha bar of zero multipliers is zero") {
  auto g = small_grid();
  std::vector<LabeledSample> s{{{0.5, 0.5}, 1}, {{-1, 2}, -1}};
  const auto bar = alpha_bar(std::vector<double>{0, 0}, s, g);
  CHECK(bar.nonzero_count() == 0);
}

TEST_CASE("alpha bar of one sample with unit multiplier is its kernel row") {
  auto g = small_grid();
  std::vector<LabeledSample> s{{{0.4, -1.2}, 1}};
  const auto bar = alpha_bar(std::vector<double>{1}, s, g);
  const auto row = kernel_row(s[0].x, *g);
  for (std::size_t j = 0; j < row.size(); ++j) CHECK(bar[j] == row[j]);
}

TEST_CASE("alpha bar cancels at cells equidistant from opposite labels") {
  auto g = std::make_shared<const QuadratureGrid>(std::vector<double>{-3, -3},
                                                  std::vector<double>{3, 3}, 3,
                                                  KernelFamily({0.5, 1, 2}));
  std::vector<LabeledSample> s{{{-1, 0}, 1}, {{1, 0}, -1}};
  const auto bar = alpha_bar(std::vector<double>{1, 1}, s, g);
  int checked = 0;
  for (std::size_t j = 0; j < g->cell_count(); ++j) {
    if (g->center(j)[0] != 0.0) continue;
    const double direct = 0.5 * (eval_kernel(s[0].x, g->center(j), g->width(j)) -
                                 eval_kernel(s[1].x, g->center(j), g->width(j)));
    CHECK(direct == 0.0);
    CHECK(bar[j] == 0.0);
    ++checked;
  }
  CHECK(checked == 9);
}

TEST_CASE("alpha bar rejects negative multipliers") {
  auto g = small_grid();
  std::vector<LabeledSample> s{{{0, 0}, 1}};
  CHECK_THROWS_AS(alpha_bar(std::vector<double>{-0.1}, s, g), InputError);
  CHECK_THROWS_AS(alpha_bar(std::vector<double>{}, std::vector<LabeledSample>{}, g), InputError);
}

TEST_CASE("threshold examples") {
  auto g = std::make_shared<const QuadratureGrid>(std::vector<double>{0}, std::vector<double>{3},
                                                  3, KernelFamily({1}));
  CoefficientField bar(g, {-3, 1, 3});
  CHECK(threshold(bar, 4).values() == std::vector<double>{-3, 0, 3});
  CHECK(threshold(bar, 0).values() == bar.values());
  CoefficientField small(g, {0.1, 0.1, 0.1});
  CHECK(threshold(small, 25).nonzero_count() == 0);
  CoefficientField edge(g, {2, -2, 2.0000001});
  CHECK(threshold(edge, 2).values() == std::vector<double>{0, 0, 2.0000001});
}

TEST_CASE("threshold is idempotent and obeys the law on every kept cell") {
  auto g = small_grid();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto bar = random_field(g, seed, 0.8);
    for (double gamma : {0.0, 1.0, 5.0, 12.5}) {
      const auto t = threshold(bar, gamma);
      CHECK(threshold(t, gamma).values() == t.values());
      for (std::size_t j = 0; j < g->cell_count(); ++j) {
        if (t[j] != 0.0) {
          CHECK(t[j] * t[j] > 2 * gamma);
          CHECK(bar[j] == t[j]);
        }
      }
    }
  }
}

TEST_CASE("evaluate f on simple fields") {
  auto g = small_grid();
  CoefficientField z(g);
  CHECK(evaluate_f(z, std::vector<double>{0.3, 0.1}) == 0.0);
  std::vector<double> v(g->cell_count(), 0.0);
  v[40] = 2.5;
  CoefficientField one(g, v);
  const std::vector<double> x{0.7, -0.4};
  CHECK(evaluate_f(one, x) ==
        doctest::Approx(2.5 * eval_kernel(x, g->center(40), g->width(40)) * g->cell_weight()));
  CHECK_THROWS_AS(evaluate_f(z, std::vector<double>{0}), InputError);
}

TEST_CASE("evaluate f of a one-sample field matches a fine quadrature in one dimension") {
  const double w = 0.8;
  auto g = std::make_shared<const QuadratureGrid>(std::vector<double>{-8}, std::vector<double>{8},
                                                  800, KernelFamily({w}), Measure::lebesgue);
  std::vector<LabeledSample> s{{{0.0}, 1}};
  const auto bar = alpha_bar(std::vector<double>{1}, s, g);
  const double f = evaluate_f(bar, std::vector<double>{0.0});
  // Independent oracle: trapezoid on exp(-s^2 / w^2), plus the closed form sqrt(pi) w.
  const int m = 200000;
  const double h = 16.0 / m;
  double trap = 0.5 * (std::exp(-64 / (w * w)) * 2);
  for (int i = 1; i < m; ++i) {
    const double s0 = -8 + h * i;
    trap += std::exp(-s0 * s0 / (w * w));
  }
  trap *= h;
  CHECK(f == doctest::Approx(trap).epsilon(1e-9));
  CHECK(f == doctest::Approx(std::sqrt(std::numbers::pi) * w).epsilon(1e-9));
}

TEST_CASE("evaluate f is linear in the field") {
  auto g = small_grid();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3, 3);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a1 = random_field(g, seed);
    const auto a2 = random_field(g, seed + 100);
    const double a = u(rng);
    std::vector<double> comb(g->cell_count());
    for (std::size_t j = 0; j < comb.size(); ++j) comb[j] = a * a1[j] + a2[j];
    const std::vector<double> x{u(rng), u(rng)};
    const double lhs = evaluate_f(CoefficientField(g, comb), x);
    const double rhs = a * evaluate_f(a1, x) + evaluate_f(a2, x);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("elastic net examples and bound") {
  auto g = small_grid();
  CoefficientField z(g);
  CHECK(elastic_net(z, 25) == 0.0);
  std::vector<double> v(g->cell_count(), 0.0);
  v[7] = 3.0;
  CHECK(elastic_net(CoefficientField(g, v), 2.0) ==
        doctest::Approx((0.5 * 9 + 2) * g->cell_weight()));
  const auto f = random_field(g, 5);
  std::vector<double> doubled(f.values());
  for (double& x : doubled) x *= 2;
  CHECK(elastic_net(CoefficientField(g, doubled), 0) == doctest::Approx(4 * elastic_net(f, 0)));
  for (double gamma : {0.0, 0.5, 10.0}) {
    const double en = elastic_net(f, gamma);
    CHECK(en >= 0.5 * f.l2_squared() - 1e-12);
    if (gamma == 0.0) CHECK(en == doctest::Approx(0.5 * f.l2_squared()));
    else CHECK(en > 0.5 * f.l2_squared());
  }
}

TEST_CASE("predict uses the sign with ties going to +1") {
  auto g = std::make_shared<const QuadratureGrid>(std::vector<double>{0}, std::vector<double>{1},
                                                  1, KernelFamily({1}));
  CoefficientField z(g);
  CHECK(predict(z, std::vector<double>{0.5}) == 1);
  // f(0.5) = value * k(0.5, 0.5) * 1 = value
  CHECK(predict(CoefficientField(g, {0.7}), std::vector<double>{0.5}) == 1);
  CHECK(predict(CoefficientField(g, {-0.2}), std::vector<double>{0.5}) == -1);
  std::vector<LabeledSample> s{{{0.5}, 1}, {{0.2}, -1}};
  CHECK(accuracy(CoefficientField(g, {0.7}), s) == 0.5);
}

TEST_CASE("model text round-trips bit for bit") {
  for (Measure m : {Measure::uniform, Measure::lebesgue}) {
    auto g = std::make_shared<const QuadratureGrid>(std::vector<double>{-3.1, -2.7},
                                                    std::vector<double>{3.3, 2.9}, 9,
                                                    KernelFamily({0.5, 1, 2}), m);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> v(g->cell_count(), 0.0);
    for (std::size_t j = 0; j < v.size(); j += 3) v[j] = u(rng) / 3.0;
    CoefficientField a(g, v);
    std::stringstream buf;
    write_model(buf, a);
    const auto b = read_model(buf);
    CHECK(b.values() == a.values());
    CHECK(b.grid().box_lo() == g->box_lo());
    CHECK(b.grid().cell_weight() == g->cell_weight());
    CHECK(b.grid().measure() == m);
  }
}

TEST_CASE("model reader reports malformed files") {
  std::istringstream empty("");
  CHECK_THROWS_AS(read_model(empty), InputError);
  std::istringstream wrong("other v1\n");
  CHECK_THROWS_AS(read_model(wrong), InputError);
  std::istringstream bad_line(
      "kfed-model v1 dim=1 resolution=2 measure=uniform box_lo=0 box_hi=2 widths=1 nonzero=1\n"
      "0.7 1 3\n");
  CHECK_THROWS_WITH_AS(read_model(bad_line), doctest::Contains("line 2"), InputError);
  std::istringstream count(
      "kfed-model v1 dim=1 resolution=2 measure=uniform box_lo=0 box_hi=2 widths=1 nonzero=2\n"
      "0.5 1 3\n");
  CHECK_THROWS_AS(read_model(count), InputError);
}
