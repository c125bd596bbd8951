#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "kfed/dualsolver.hpp"

namespace kfed {

/// The only payload an agent sends: its critical samples and their multipliers.
struct AgentMessage {
  std::size_t agent_id = 0;
  std::vector<LabeledSample> samples;
  std::vector<double> lambdas;
};

struct AgentTraining {
  AgentMessage message;
  SolveResult result;
};

AgentTraining agent_train(std::size_t agent_id, std::span<const LabeledSample> samples,
                          const GridPtr& grid, const Hyperparams& hp,
                          const AscendOptions& opts = {});

struct TrainedModel {
  CoefficientField model;
  SolveResult result;
};

/// Pools the messages in order and starts the ascent from the concatenated multipliers.
/// Throws InputError("no critical samples received") when every message is empty.
TrainedModel server_train(std::span<const AgentMessage> messages, const GridPtr& grid,
                          const Hyperparams& hp, const AscendOptions& opts = {});

TrainedModel centralized_train(std::span<const LabeledSample> samples, const GridPtr& grid,
                               const Hyperparams& hp, const AscendOptions& opts = {});

struct AgentSummary {
  std::size_t n_samples = 0;
  std::size_t n_critical = 0;
  double accuracy = 0.0;  // on the agent's own training partition
};

struct FederationReport {
  CoefficientField global_model;
  std::vector<AgentSummary> per_agent;
  std::size_t communication_cost = 0;
  std::size_t representation_cost = 0;
  long server_iters = 0;
  bool server_converged = false;
  /// Kept for inspection; the server never reads these.
  std::vector<AgentTraining> agents;
  SolveResult server;
};

struct FederationOptions {
  /// Solve agents on separate threads.
  bool concurrent = true;
  AscendOptions agent;
  AscendOptions server;
};

/// Agents first (barrier), then the server.
FederationReport run_federation(std::span<const std::vector<LabeledSample>> partitions,
                                const GridPtr& grid, const Hyperparams& hp,
                                const FederationOptions& opts = {});

/// One JSON object on a single line, without the model values.
std::string report_json_line(const FederationReport& report);
std::string report_csv_header();
std::string report_csv_row(const FederationReport& report);

}  // namespace kfed
