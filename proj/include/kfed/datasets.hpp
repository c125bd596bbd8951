#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "kfed/model.hpp"

namespace kfed {

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  bool contains(std::span<const double> x) const;
};

struct SyntheticSpec {
  std::size_t n = 900;
  std::uint64_t seed = 1;
  double noise_sigma = 0.2;  // standard deviation
  double r1 = 9.0;
  double r2 = 30.0;
  std::vector<double> c1{3.0, 0.0};
  std::vector<double> c2{-10.0, 6.0};
  double a11 = 1.0;
  double a22 = 0.25;
  Box domain{{-16.0, -6.0}, {10.0, 12.0}};
  std::size_t k_subspaces = 9;
  double overlap = 0.25;
  std::size_t test_size = 1000;

  void validate() const;
};

struct AgentPartition {
  Box box;
  std::vector<LabeledSample> samples;
};

struct PartitionedDataset {
  std::vector<AgentPartition> agents;
  std::vector<LabeledSample> test_set;

  std::vector<LabeledSample> pooled() const;
  /// Partitions with at least one sample, in agent order.
  std::vector<std::vector<LabeledSample>> nonempty_partitions() const;
};

/// Class rule on a pre-noise point: +1 inside either ellipse, -1 elsewhere.
int synthetic_label(std::span<const double> x, const SyntheticSpec& spec);

PartitionedDataset generate_synthetic(const SyntheticSpec& spec);

/// sqrt(k) x sqrt(k) grid of boxes over the domain; each box grows by overlap / 2 of a
/// cell side on every side, clipped to the domain.
std::vector<Box> partition_boxes(const Box& domain, std::size_t k, double overlap);

struct IngestStats {
  std::size_t rows = 0;
  std::size_t windows = 0;
  std::size_t rows_in_windows = 0;
  std::size_t dropped_rows = 0;     // rows in windows with fewer than 2 rows
  std::size_t unlabeled_rows = 0;   // activity missing from the label map
};

struct IngestResult {
  std::vector<LabeledSample> samples;
  /// User of each emitted sample, aligned with samples.
  std::vector<std::string> users;
  IngestStats stats;
};

struct IngestOptions {
  double window_seconds = 5.0;
  /// Timestamp ticks per second (nanoseconds by default).
  double ticks_per_second = 1e9;
};

/// Rows "user,activity,timestamp,ax,ay,az" with an optional trailing ';'.
IngestResult ingest_accelerometer(std::istream& in, const std::map<std::string, int>& label_map,
                                  const IngestOptions& opts = {});
IngestResult ingest_accelerometer(const std::string& path,
                                  const std::map<std::string, int>& label_map,
                                  const IngestOptions& opts = {});

/// "A=+1,B=-1"
std::map<std::string, int> parse_label_map(const std::string& text);

std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> split(
    std::span<const LabeledSample> samples, double test_fraction, std::uint64_t seed);

/// Columns x1..xp, y, agent_id. Test samples carry agent_id -1.
void write_dataset_csv(std::ostream& out, const PartitionedDataset& data);

}  // namespace kfed
