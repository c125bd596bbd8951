#include "kfed/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include "kfed/error.hpp"
#include "kfed/numfmt.hpp"

namespace kfed {

bool Box::contains(std::span<const double> x) const {
  if (x.size() != lo.size()) return false;
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (x[d] < lo[d] || x[d] > hi[d]) return false;
  }
  return true;
}

void SyntheticSpec::validate() const {
  if (n < 1) throw InputError("synthetic sample count must be >= 1");
  if (!(noise_sigma >= 0.0)) throw InputError("noise sigma must be >= 0");
  if (domain.lo.size() != 2 || domain.hi.size() != 2 || c1.size() != 2 || c2.size() != 2) {
    throw InputError("the synthetic task is two-dimensional");
  }
  for (std::size_t d = 0; d < 2; ++d) {
    if (!(domain.lo[d] < domain.hi[d])) throw InputError("domain needs lo < hi");
  }
  if (!(overlap >= 0.0 && overlap < 1.0)) throw InputError("overlap must lie in [0, 1)");
}

std::vector<LabeledSample> PartitionedDataset::pooled() const {
  std::vector<LabeledSample> out;
  for (const auto& a : agents) out.insert(out.end(), a.samples.begin(), a.samples.end());
  return out;
}

std::vector<std::vector<LabeledSample>> PartitionedDataset::nonempty_partitions() const {
  std::vector<std::vector<LabeledSample>> out;
  for (const auto& a : agents) {
    if (!a.samples.empty()) out.push_back(a.samples);
  }
  return out;
}

int synthetic_label(std::span<const double> x, const SyntheticSpec& spec) {
  auto form = [&](const std::vector<double>& c) {
    const double d0 = x[0] - c[0];
    const double d1 = x[1] - c[1];
    return spec.a11 * d0 * d0 + spec.a22 * d1 * d1;
  };
  return form(spec.c1) <= spec.r1 || form(spec.c2) <= spec.r2 ? 1 : -1;
}

std::vector<Box> partition_boxes(const Box& domain, std::size_t k, double overlap) {
  if (!(overlap >= 0.0 && overlap < 1.0)) throw InputError("overlap must lie in [0, 1)");
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(k))));
  if (k == 0 || side * side != k) throw InputError("agent count must be a perfect square");
  const std::size_t dim = domain.lo.size();
  if (dim != 2) throw InputError("subspace layout is defined for two dimensions");

  std::vector<Box> boxes;
  boxes.reserve(k);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      Box b{std::vector<double>(dim), std::vector<double>(dim)};
      const std::size_t idx[2] = {r, c};
      for (std::size_t d = 0; d < dim; ++d) {
        const double step = (domain.hi[d] - domain.lo[d]) / static_cast<double>(side);
        const double pad = 0.5 * overlap * step;
        const double lo = domain.lo[d] + step * static_cast<double>(idx[d]);
        const double hi = idx[d] + 1 == side ? domain.hi[d] : lo + step;
        b.lo[d] = std::max(domain.lo[d], lo - pad);
        b.hi[d] = std::min(domain.hi[d], hi + pad);
      }
      boxes.push_back(std::move(b));
    }
  }
  return boxes;
}

namespace {

LabeledSample draw(std::mt19937_64& rng, const SyntheticSpec& spec, std::vector<double>& clean) {
  std::uniform_real_distribution<double> u0(spec.domain.lo[0], spec.domain.hi[0]);
  std::uniform_real_distribution<double> u1(spec.domain.lo[1], spec.domain.hi[1]);
  clean = {u0(rng), u1(rng)};
  LabeledSample s{clean, synthetic_label(clean, spec)};
  if (spec.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (double& v : s.x) v += noise(rng);
  }
  return s;
}

}  // namespace

PartitionedDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  PartitionedDataset out;
  for (auto& b : partition_boxes(spec.domain, spec.k_subspaces, spec.overlap)) {
    out.agents.push_back({std::move(b), {}});
  }
  std::mt19937_64 rng(spec.seed);
  std::vector<double> clean;
  for (std::size_t i = 0; i < spec.n; ++i) {
    LabeledSample s = draw(rng, spec, clean);
    for (auto& a : out.agents) {
      if (a.box.contains(clean)) {
        a.samples.push_back(std::move(s));
        break;
      }
    }
  }
  out.test_set.reserve(spec.test_size);
  for (std::size_t i = 0; i < spec.test_size; ++i) out.test_set.push_back(draw(rng, spec, clean));
  return out;
}

namespace {

struct Row {
  double t;
  double a[3];
};

std::string line_error(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

}  // namespace

IngestResult ingest_accelerometer(std::istream& in, const std::map<std::string, int>& label_map,
                                  const IngestOptions& opts) {
  if (!(opts.window_seconds > 0.0) || !(opts.ticks_per_second > 0.0)) {
    throw InputError("window length and tick rate must be positive");
  }
  const double window = opts.window_seconds * opts.ticks_per_second;
  IngestResult out;

  // Groups keyed by (user, activity), kept in first-appearance order.
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::vector<Row>> groups;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view body = trim(line);
    while (!body.empty() && body.back() == ';') body.remove_suffix(1);
    if (trim(body).empty()) continue;
    const auto fields = split(body, ',');
    if (fields.size() != 6) throw InputError(line_error(lineno, "expected 6 fields"));
    Row row{};
    try {
      row.t = parse_double(trim(fields[2]));
      for (int c = 0; c < 3; ++c) row.a[c] = parse_double(trim(fields[3 + c]));
    } catch (const InputError& e) {
      throw InputError(line_error(lineno, e.what()));
    }
    ++out.stats.rows;
    std::string user(trim(fields[0]));
    std::string activity(trim(fields[1]));
    if (!label_map.contains(activity)) {
      ++out.stats.unlabeled_rows;
      continue;
    }
    auto key = std::make_pair(std::move(user), std::move(activity));
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) keys.push_back(key);
    it->second.push_back(row);
  }

  for (const auto& key : keys) {
    auto& rows = groups[key];
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
    const int label = label_map.at(key.second);
    const double t0 = rows.front().t;
    std::size_t begin = 0;
    while (begin < rows.size()) {
      const double slot = std::floor((rows[begin].t - t0) / window);
      std::size_t end = begin;
      while (end < rows.size() && std::floor((rows[end].t - t0) / window) == slot) ++end;
      const std::size_t count = end - begin;
      if (count < 2) {
        out.stats.dropped_rows += count;
      } else {
        std::vector<double> mean(3, 0.0);
        for (std::size_t r = begin; r < end; ++r) {
          for (int c = 0; c < 3; ++c) mean[c] += rows[r].a[c];
        }
        for (double& m : mean) m /= static_cast<double>(count);
        out.samples.push_back({std::move(mean), label});
        out.users.push_back(key.first);
        ++out.stats.windows;
        out.stats.rows_in_windows += count;
      }
      begin = end;
    }
  }
  return out;
}

IngestResult ingest_accelerometer(const std::string& path,
                                  const std::map<std::string, int>& label_map,
                                  const IngestOptions& opts) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return ingest_accelerometer(in, label_map, opts);
}

std::map<std::string, int> parse_label_map(const std::string& text) {
  std::map<std::string, int> out;
  for (const auto& item : split(text, ',')) {
    const auto t = trim(item);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw InputError("label map entries look like NAME=+1");
    const std::string name(trim(t.substr(0, eq)));
    const auto v = trim(t.substr(eq + 1));
    int label = 0;
    if (v == "+1" || v == "1") label = 1;
    else if (v == "-1") label = -1;
    else throw InputError("label for '" + name + "' must be +1 or -1");
    out[name] = label;
  }
  if (out.empty()) throw InputError("label map is empty");
  return out;
}

std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> split(
    std::span<const LabeledSample> samples, double test_fraction, std::uint64_t seed) {
  if (samples.size() < 2) throw InputError("split needs at least two samples");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InputError("test fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test =
      static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(samples.size())));
  std::vector<LabeledSample> train, test;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_test ? test : train).push_back(samples[order[i]]);
  }
  return {std::move(train), std::move(test)};
}

void write_dataset_csv(std::ostream& out, const PartitionedDataset& data) {
  std::size_t dim = 0;
  for (const auto& a : data.agents) {
    if (!a.samples.empty()) dim = a.samples.front().x.size();
  }
  if (dim == 0 && !data.test_set.empty()) dim = data.test_set.front().x.size();
  for (std::size_t d = 0; d < dim; ++d) out << 'x' << d + 1 << ',';
  out << "y,agent_id\n";
  auto row = [&](const LabeledSample& s, long agent) {
    for (double v : s.x) out << format_double(v) << ',';
    out << s.y << ',' << agent << '\n';
  };
  for (std::size_t i = 0; i < data.agents.size(); ++i) {
    for (const auto& s : data.agents[i].samples) row(s, static_cast<long>(i));
  }
  for (const auto& s : data.test_set) row(s, -1);
  if (!out) throw IoError("failed writing dataset");
}

}  // namespace kfed
