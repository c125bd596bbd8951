#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "kfed/error.hpp"
#include "kfed/federation.hpp"
#include "kfed/validation.hpp"

using namespace kfed;

namespace {

GridPtr grid_for(const std::vector<LabeledSample>& s, int res = 20) {
  GridSpec spec;
  spec.resolution = res;
  const auto pts = features_of(s);
  return std::make_shared<const QuadratureGrid>(QuadratureGrid::fit(pts, spec));
}

std::vector<LabeledSample> flatten(const std::vector<std::vector<LabeledSample>>& parts) {
  std::vector<LabeledSample> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

Hyperparams tight(double gamma = 25.0) {
  return {.gamma = gamma, .epsilon = 0.01, .eta = 1.0, .max_iters = 200000, .grad_tol = 1e-11};
}

std::vector<LabeledSample> separable(std::size_t n) {
  std::vector<LabeledSample> s;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    const int y = i % 2 == 0 ? 1 : -1;
    s.push_back({{-2.0 + 4.0 * t, y * (1.0 + 1.5 * t)}, y});
  }
  return s;
}

}  // namespace

TEST_CASE("zero-margin agents send nothing") {
  const auto s = random_instance(1, 8);
  const auto g = grid_for(s);
  Hyperparams hp = tight();
  hp.epsilon = 1.0;
  const auto t = agent_train(0, s, g, hp);
  CHECK(t.message.samples.empty());
  CHECK(t.message.lambdas.empty());
}

TEST_CASE("a single active sample is sent") {
  std::vector<LabeledSample> s{{{0.5, 0.5}, -1}};
  const auto g = grid_for(s);
  const auto t = agent_train(3, s, g, tight());
  CHECK(t.message.agent_id == 3);
  REQUIRE(t.message.samples.size() == 1);
  CHECK(t.message.samples[0] == s[0]);
  CHECK(t.message.lambdas[0] > 0.0);
}

TEST_CASE("interior samples of a separable set are not sent") {
  const auto s = separable(10);
  const auto g = grid_for(s);
  const auto t = agent_train(0, s, g, tight(0.0));
  REQUIRE(t.result.dual_state.converged);
  CHECK(t.message.samples.size() < 10);
  for (std::size_t n = 0; n < s.size(); ++n) {
    const bool sent = std::find(t.message.samples.begin(), t.message.samples.end(), s[n]) !=
                      t.message.samples.end();
    if (!sent) CHECK(t.result.margin_loss[n] < 1e-6);
  }
  for (double l : t.message.lambdas) CHECK(l > 0.0);
  CHECK(t.message.samples.size() == t.message.lambdas.size());
}

TEST_CASE("server on one full message reproduces the agent") {
  const auto s = random_instance(2, 12);
  const auto g = grid_for(s);
  const Hyperparams hp = tight();
  const auto agent = ascend(s, g, hp);
  REQUIRE(agent.dual_state.converged);
  AgentMessage full{0, s, agent.dual_state.lambda};
  const auto server = server_train(std::vector<AgentMessage>{full}, g, hp);
  for (std::size_t j = 0; j < g->cell_count(); ++j) {
    CHECK(std::abs(server.model[j] - agent.alpha_star[j]) <= 1e-8);
  }
}

TEST_CASE("server refuses an all-empty round") {
  const auto s = random_instance(3, 4);
  const auto g = grid_for(s);
  std::vector<AgentMessage> msgs{{0, {}, {}}, {1, {}, {}}};
  CHECK_THROWS_WITH_AS(server_train(msgs, g, tight()), "no critical samples received", InputError);
  CHECK_THROWS_AS(server_train(std::vector<AgentMessage>{}, g, tight()), InputError);
}

TEST_CASE("server starts from the concatenated multipliers") {
  const auto parts = two_clusters(4, 6, 3.0);
  const auto all = flatten(parts);
  const auto g = grid_for(all);
  Hyperparams hp = tight();
  hp.max_iters = 30;
  std::vector<AgentMessage> msgs;
  for (std::size_t i = 0; i < parts.size(); ++i) msgs.push_back(agent_train(i, parts[i], g, tight()).message);
  std::vector<LabeledSample> pooled;
  std::vector<double> lambda0;
  for (const auto& m : msgs) {
    pooled.insert(pooled.end(), m.samples.begin(), m.samples.end());
    lambda0.insert(lambda0.end(), m.lambdas.begin(), m.lambdas.end());
  }
  AscendOptions opts;
  opts.stop_at_tolerance = false;
  const auto server = server_train(msgs, g, hp, opts);
  opts.lambda0 = lambda0;
  const auto manual = ascend(pooled, g, hp, opts);
  CHECK(server.result.dual_state.lambda == manual.dual_state.lambda);
}

TEST_CASE("duplicate samples across messages are kept") {
  const auto s = random_instance(5, 8);
  const auto g = grid_for(s);
  const Hyperparams hp = tight();
  const auto t = agent_train(0, s, g, hp);
  REQUIRE_FALSE(t.message.samples.empty());
  AgentMessage copy = t.message;
  copy.agent_id = 1;
  const auto server = server_train(std::vector<AgentMessage>{t.message, copy}, g, hp);
  CHECK(server.result.dual_state.lambda.size() == 2 * t.message.samples.size());
  CHECK(std::isfinite(server.result.dual_value));
  // A duplicated sample set has the same primal solutions, so the optimum value is unchanged.
  if (t.result.dual_state.converged && server.result.dual_state.converged) {
    CHECK(server.result.primal_value == doctest::Approx(t.result.primal_value).epsilon(1e-6));
  }
}

TEST_CASE("centralized training is the single-agent solve") {
  const auto s = random_instance(6, 10);
  const auto g = grid_for(s);
  const Hyperparams hp = tight();
  const auto cen = centralized_train(s, g, hp);
  const auto agent = agent_train(0, s, g, hp);
  CHECK(cen.model.values() == agent.result.alpha_star.values());
}

TEST_CASE("far clusters: the global model matches each agent near its data") {
  const auto parts = two_clusters(7, 10, 25.0);
  const auto all = flatten(parts);
  const auto g = grid_for(all, 40);
  FederationOptions opts;
  const auto report = run_federation(parts, g, tight(), opts);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    for (const auto& s : parts[i]) {
      const double fa = evaluate_f(report.agents[i].result.alpha_star, s.x);
      const double fg = evaluate_f(report.global_model, s.x);
      CHECK(std::abs(fa - fg) <= 1e-6);
    }
  }
}

TEST_CASE("federation report bookkeeping") {
  const auto parts = two_clusters(8, 9, 4.0);
  const auto all = flatten(parts);
  const auto g = grid_for(all);
  const auto report = run_federation(parts, g, tight());
  std::size_t sum = 0;
  for (const auto& a : report.agents) sum += a.message.samples.size();
  CHECK(report.communication_cost == sum);
  CHECK(report.communication_cost <= all.size());
  CHECK(report.representation_cost == report.global_model.nonzero_count());
  CHECK(report.representation_cost <= g->cell_count());
  REQUIRE(report.per_agent.size() == 2);
  CHECK(report.per_agent[0].n_samples == 9);
  CHECK(report.per_agent[1].n_critical == report.agents[1].message.samples.size());

  const auto j = nlohmann::json::parse(report_json_line(report));
  CHECK(j["communication_cost"] == report.communication_cost);
  CHECK(j["agents"].size() == 2);
  CHECK(report_json_line(report).find('\n') == std::string::npos);
  CHECK(report_csv_header() == "agents,total_samples,communication_cost,representation_cost,server_iters");
  CHECK(report_csv_row(report).starts_with("2,18,"));
}

TEST_CASE("one agent communicates at most its sample count") {
  const auto s = random_instance(9, 15);
  const auto g = grid_for(s);
  const auto report = run_federation(std::vector<std::vector<LabeledSample>>{s}, g, tight());
  CHECK(report.communication_cost <= 15);
  CHECK(report.communication_cost == report.agents[0].message.samples.size());
}

TEST_CASE("gamma zero on separable data sends fewer samples than it holds") {
  const auto s = separable(24);
  std::vector<std::vector<LabeledSample>> parts{
      std::vector<LabeledSample>(s.begin(), s.begin() + 12),
      std::vector<LabeledSample>(s.begin() + 12, s.end())};
  const auto g = grid_for(s);
  const auto report = run_federation(parts, g, tight(0.0));
  CHECK(report.communication_cost < 24);
}

TEST_CASE("agent order does not change the pooled set or the global model") {
  const auto parts = two_clusters(10, 6, 3.0);
  const auto all = flatten(parts);
  const auto g = grid_for(all, 15);
  const Hyperparams hp = tight();
  const auto a = run_federation(parts, g, hp);
  std::vector<std::vector<LabeledSample>> swapped{parts[1], parts[0]};
  const auto b = run_federation(swapped, g, hp);

  auto pooled = [](const FederationReport& r) {
    std::vector<std::pair<std::vector<double>, int>> out;
    for (const auto& t : r.agents)
      for (const auto& s : t.message.samples) out.emplace_back(s.x, s.y);
    std::sort(out.begin(), out.end());
    return out;
  };
  CHECK(pooled(a) == pooled(b));
  double worst = 0.0;
  for (std::size_t j = 0; j < g->cell_count(); ++j) {
    worst = std::max(worst, std::abs(a.global_model[j] - b.global_model[j]));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("concurrent and sequential agents agree exactly") {
  const auto parts = two_clusters(11, 7, 6.0);
  const auto g = grid_for(flatten(parts));
  FederationOptions seq;
  seq.concurrent = false;
  const auto a = run_federation(parts, g, tight(), seq);
  const auto b = run_federation(parts, g, tight());
  CHECK(a.global_model.values() == b.global_model.values());
  CHECK(a.communication_cost == b.communication_cost);
}

TEST_CASE("federation rejects empty partitions") {
  const auto s = random_instance(12, 4);
  const auto g = grid_for(s);
  CHECK_THROWS_AS(run_federation(std::vector<std::vector<LabeledSample>>{s, {}}, g, tight()),
                  InputError);
  CHECK_THROWS_AS(run_federation(std::vector<std::vector<LabeledSample>>{}, g, tight()),
                  InputError);
}
