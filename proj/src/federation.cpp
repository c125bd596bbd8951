#include "kfed/federation.hpp"

#include <exception>
#include <optional>
#include <thread>

#include "json.hpp"

#include "kfed/error.hpp"
#include "kfed/numfmt.hpp"

namespace kfed {

AgentTraining agent_train(std::size_t agent_id, std::span<const LabeledSample> samples,
                          const GridPtr& grid, const Hyperparams& hp, const AscendOptions& opts) {
  if (samples.empty()) throw InputError("agent " + std::to_string(agent_id) + " has no samples");
  SolveResult result = ascend(samples, grid, hp, opts);
  AgentMessage msg;
  msg.agent_id = agent_id;
  for (std::size_t idx : result.critical_indices) {
    msg.samples.push_back(samples[idx]);
    msg.lambdas.push_back(result.dual_state.lambda[idx]);
  }
  return {std::move(msg), std::move(result)};
}

TrainedModel server_train(std::span<const AgentMessage> messages, const GridPtr& grid,
                          const Hyperparams& hp, const AscendOptions& opts) {
  std::vector<LabeledSample> pooled;
  std::vector<double> lambda0;
  for (const auto& m : messages) {
    if (m.samples.size() != m.lambdas.size()) {
      throw InputError("agent message has mismatched samples and multipliers");
    }
    pooled.insert(pooled.end(), m.samples.begin(), m.samples.end());
    lambda0.insert(lambda0.end(), m.lambdas.begin(), m.lambdas.end());
  }
  if (pooled.empty()) throw InputError("no critical samples received");
  AscendOptions server_opts = opts;
  server_opts.lambda0 = std::move(lambda0);
  SolveResult result = ascend(pooled, grid, hp, server_opts);
  CoefficientField model = result.alpha_star;
  return {std::move(model), std::move(result)};
}

TrainedModel centralized_train(std::span<const LabeledSample> samples, const GridPtr& grid,
                               const Hyperparams& hp, const AscendOptions& opts) {
  SolveResult result = ascend(samples, grid, hp, opts);
  CoefficientField model = result.alpha_star;
  return {std::move(model), std::move(result)};
}

FederationReport run_federation(std::span<const std::vector<LabeledSample>> partitions,
                                const GridPtr& grid, const Hyperparams& hp,
                                const FederationOptions& opts) {
  if (partitions.empty()) throw InputError("federation needs at least one agent");
  for (std::size_t i = 0; i < partitions.size(); ++i) {
    if (partitions[i].empty()) {
      throw InputError("agent " + std::to_string(i) + " has an empty partition");
    }
  }
  hp.validate();

  const std::size_t k = partitions.size();
  std::vector<std::optional<AgentTraining>> trained(k);
  std::vector<std::exception_ptr> errors(k);
  auto work = [&](std::size_t i) {
    try {
      trained[i] = agent_train(i, partitions[i], grid, hp, opts.agent);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (opts.concurrent && k > 1) {
    std::vector<std::jthread> pool;
    pool.reserve(k);
    for (std::size_t i = 0; i < k; ++i) pool.emplace_back(work, i);
  } else {
    for (std::size_t i = 0; i < k; ++i) work(i);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<AgentMessage> messages;
  std::vector<AgentSummary> summaries;
  std::vector<AgentTraining> agents;
  std::size_t comm = 0;
  for (std::size_t i = 0; i < k; ++i) {
    auto& t = *trained[i];
    comm += t.message.samples.size();
    summaries.push_back({partitions[i].size(), t.message.samples.size(),
                         accuracy(t.result.alpha_star, partitions[i])});
    messages.push_back(t.message);
    agents.push_back(std::move(t));
  }

  TrainedModel server = server_train(messages, grid, hp, opts.server);
  FederationReport report{.global_model = server.model,
                          .per_agent = std::move(summaries),
                          .communication_cost = comm,
                          .representation_cost = server.model.nonzero_count(),
                          .server_iters = server.result.dual_state.iters_run,
                          .server_converged = server.result.dual_state.converged,
                          .agents = std::move(agents),
                          .server = std::move(server.result)};
  return report;
}

std::string report_json_line(const FederationReport& report) {
  nlohmann::ordered_json j;
  j["communication_cost"] = report.communication_cost;
  j["representation_cost"] = report.representation_cost;
  j["server_iters"] = report.server_iters;
  j["server_converged"] = report.server_converged;
  j["support_measure"] = report.global_model.support_measure();
  auto agents = nlohmann::ordered_json::array();
  for (const auto& a : report.per_agent) {
    agents.push_back({{"n_samples", a.n_samples},
                      {"n_critical", a.n_critical},
                      {"accuracy", a.accuracy}});
  }
  j["agents"] = std::move(agents);
  return j.dump();
}

std::string report_csv_header() {
  return "agents,total_samples,communication_cost,representation_cost,server_iters";
}

std::string report_csv_row(const FederationReport& report) {
  std::size_t total = 0;
  for (const auto& a : report.per_agent) total += a.n_samples;
  return std::to_string(report.per_agent.size()) + ',' + std::to_string(total) + ',' +
         std::to_string(report.communication_cost) + ',' +
         std::to_string(report.representation_cost) + ',' + std::to_string(report.server_iters);
}

}  // namespace kfed
