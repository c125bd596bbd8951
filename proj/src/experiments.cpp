#include "kfed/experiments.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "kfed/error.hpp"
#include "kfed/numfmt.hpp"

namespace kfed {

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::sample_size: return "sample-size";
    case Experiment::gamma: return "gamma";
    case Experiment::agents: return "agents";
  }
  return "?";
}

Experiment experiment_from_string(const std::string& s) {
  if (s == "sample-size") return Experiment::sample_size;
  if (s == "gamma") return Experiment::gamma;
  if (s == "agents") return Experiment::agents;
  throw InputError("unknown experiment '" + s + "' (sample-size, gamma, agents)");
}

namespace {

const std::vector<double>& default_values(Experiment e) {
  static const std::vector<double> n{90, 180, 450, 900};
  static const std::vector<double> gamma{0, 25, 50, 100, 200};
  static const std::vector<double> agents{1, 4, 9};
  switch (e) {
    case Experiment::sample_size: return n;
    case Experiment::gamma: return gamma;
    case Experiment::agents: return agents;
  }
  return n;
}

const std::vector<double>& list_for(const RunConfig& c, Experiment e) {
  switch (e) {
    case Experiment::sample_size: return c.n_list;
    case Experiment::gamma: return c.gamma_list;
    case Experiment::agents: return c.agents_list;
  }
  return c.n_list;
}

double fixed_value(const RunConfig& c, Experiment e) {
  const auto& list = list_for(c, e);
  if (!list.empty()) return list.front();
  switch (e) {
    case Experiment::sample_size: return static_cast<double>(c.synthetic.n);
    case Experiment::gamma: return c.hp.gamma;
    case Experiment::agents: return static_cast<double>(c.synthetic.k_subspaces);
  }
  return 0.0;
}

std::size_t as_count(double v, const char* what) {
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e9) {
    throw InputError(std::string(what) + " must be a positive integer");
  }
  return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw InputError("expected a boolean, got '" + v + "'");
}

}  // namespace

std::vector<double> RunConfig::sweep_values() const {
  const auto& list = list_for(*this, experiment);
  return list.empty() ? default_values(experiment) : list;
}

RunConfig RunConfig::at(double sweep_value) const {
  RunConfig c = *this;
  c.hp.gamma = experiment == Experiment::gamma ? sweep_value : fixed_value(*this, Experiment::gamma);
  c.synthetic.n = as_count(
      experiment == Experiment::sample_size ? sweep_value
                                            : fixed_value(*this, Experiment::sample_size),
      "sample count");
  c.synthetic.k_subspaces = as_count(
      experiment == Experiment::agents ? sweep_value : fixed_value(*this, Experiment::agents),
      "agent count");
  return c;
}

void RunConfig::validate() const {
  if (repetitions < 1) throw InputError("repetitions must be >= 1");
  if (jobs < 1) throw InputError("jobs must be >= 1");
  const auto values = sweep_values();
  if (values.empty()) throw InputError("sweep values must be nonempty");
  for (Experiment e : {Experiment::sample_size, Experiment::gamma, Experiment::agents}) {
    if (e != experiment && list_for(*this, e).size() > 1) {
      throw InputError("only the swept parameter (" + to_string(experiment) +
                       ") may take several values");
    }
  }
  if (!data_path.empty()) {
    if (experiment == Experiment::sample_size) {
      throw InputError("the sample-size sweep needs the synthetic generator");
    }
    if (!std::filesystem::exists(data_path)) throw InputError("data file not found: " + data_path);
    if (label_map.empty()) throw InputError("a file dataset needs --label-map");
    parse_label_map(label_map);
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
      throw InputError("test fraction must lie in (0, 1)");
    }
  }
  for (double v : values) {
    const RunConfig c = at(v);
    c.hp.validate();
    if (data_path.empty()) {
      c.synthetic.validate();
      partition_boxes(c.synthetic.domain, c.synthetic.k_subspaces, c.synthetic.overlap);
    }
  }
  if (grid.resolution < 1) throw InputError("grid resolution must be >= 1");
  KernelFamily check(grid.widths);
}

std::map<std::string, std::string> RunConfig::to_map() const {
  auto list_or_fixed = [&](Experiment e) {
    return e == experiment ? format_double_list(sweep_values()) : format_double(fixed_value(*this, e));
  };
  std::map<std::string, std::string> m;
  m["experiment"] = to_string(experiment);
  m["seed"] = std::to_string(base_seed);
  m["reps"] = std::to_string(repetitions);
  m["out"] = out_path;
  m["gamma"] = list_or_fixed(Experiment::gamma);
  m["n"] = list_or_fixed(Experiment::sample_size);
  m["agents"] = list_or_fixed(Experiment::agents);
  m["epsilon"] = format_double(hp.epsilon);
  m["eta"] = format_double(hp.eta);
  m["iters"] = std::to_string(hp.max_iters);
  m["grad-tol"] = format_double(hp.grad_tol);
  m["grid-res"] = std::to_string(grid.resolution);
  m["widths"] = format_double_list(grid.widths);
  m["measure"] = to_string(grid.measure);
  m["inflate"] = format_double(grid.inflate);
  m["data"] = data_path;
  m["label-map"] = label_map;
  m["test-fraction"] = format_double(test_fraction);
  m["noise"] = format_double(synthetic.noise_sigma);
  m["overlap"] = format_double(synthetic.overlap);
  m["test-size"] = std::to_string(synthetic.test_size);
  m["early-stop"] = early_stop ? "true" : "false";
  return m;
}

void RunConfig::apply(const std::string& key, const std::string& value) {
  const std::string v(trim(value));
  if (key == "experiment") experiment = experiment_from_string(v);
  else if (key == "seed") base_seed = static_cast<std::uint64_t>(parse_long(v));
  else if (key == "reps") repetitions = static_cast<int>(parse_long(v));
  else if (key == "out") out_path = v;
  else if (key == "gamma") gamma_list = parse_double_list(v);
  else if (key == "n") n_list = parse_double_list(v);
  else if (key == "agents") agents_list = parse_double_list(v);
  else if (key == "epsilon") hp.epsilon = parse_double(v);
  else if (key == "eta") hp.eta = parse_double(v);
  else if (key == "iters") hp.max_iters = parse_long(v);
  else if (key == "grad-tol") hp.grad_tol = parse_double(v);
  else if (key == "grid-res") grid.resolution = static_cast<int>(parse_long(v));
  else if (key == "widths") grid.widths = parse_double_list(v);
  else if (key == "measure") grid.measure = measure_from_string(v);
  else if (key == "inflate") grid.inflate = parse_double(v);
  else if (key == "data") data_path = v;
  else if (key == "label-map") label_map = v;
  else if (key == "test-fraction") test_fraction = parse_double(v);
  else if (key == "noise") synthetic.noise_sigma = parse_double(v);
  else if (key == "overlap") synthetic.overlap = parse_double(v);
  else if (key == "test-size") synthetic.test_size = static_cast<std::size_t>(parse_long(v));
  else if (key == "early-stop") early_stop = parse_bool(v);
  else if (key == "jobs") jobs = static_cast<int>(parse_long(v));
  else throw InputError("unknown config key '" + key + "'");
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  RunConfig cfg;
  if (trim(text).starts_with("{")) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("config " + path + ": " + e.what());
    }
    if (!j.contains("config") || !j["config"].is_object()) {
      throw InputError("config " + path + " lacks a 'config' object");
    }
    for (const auto& [k, v] : j["config"].items()) {
      if (!v.is_string()) throw InputError("config value for '" + k + "' must be a string");
      cfg.apply(k, v.get<std::string>());
    }
    return cfg;
  }
  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw InputError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    std::string key(trim(t.substr(0, eq)));
    if (key.starts_with("--")) key.erase(0, 2);
    try {
      cfg.apply(key, std::string(t.substr(eq + 1)));
    } catch (const InputError& e) {
      throw InputError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

bool SweepRow::operator==(const SweepRow& o) const {
  auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
  return same(value, o.value) && same(fed_acc_mean, o.fed_acc_mean) &&
         same(fed_acc_std, o.fed_acc_std) && same(cen_acc_mean, o.cen_acc_mean) &&
         same(cen_acc_std, o.cen_acc_std) && same(fed_comm_mean, o.fed_comm_mean) &&
         same(cen_comm_mean, o.cen_comm_mean) && same(fed_rep_mean, o.fed_rep_mean) &&
         same(cen_rep_mean, o.cen_rep_mean) && repetitions == o.repetitions &&
         failures == o.failures && seeds == o.seeds;
}

namespace {

struct Split {
  std::vector<std::vector<LabeledSample>> partitions;
  std::vector<LabeledSample> test;
};

Split synthetic_split(const RunConfig& c, std::uint64_t seed) {
  SyntheticSpec spec = c.synthetic;
  spec.seed = seed;
  PartitionedDataset data = generate_synthetic(spec);
  return {data.nonempty_partitions(), std::move(data.test_set)};
}

Split file_split(const RunConfig& c, const IngestResult& data, std::uint64_t seed) {
  std::vector<std::string> users;
  std::map<std::string, std::vector<LabeledSample>> by_user;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    auto [it, fresh] = by_user.try_emplace(data.users[i]);
    if (fresh) users.push_back(data.users[i]);
    it->second.push_back(data.samples[i]);
  }
  const std::size_t k = c.synthetic.k_subspaces;
  if (k > users.size()) {
    throw InputError("requested " + std::to_string(k) + " agents but the file has " +
                     std::to_string(users.size()) + " users");
  }
  Split out;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& own = by_user[users[i]];
    if (own.size() < 2) continue;
    auto [train, test] = split(own, c.test_fraction, seed + i);
    if (!train.empty()) out.partitions.push_back(std::move(train));
    out.test.insert(out.test.end(), test.begin(), test.end());
  }
  if (out.partitions.empty()) throw InputError("no user has enough windows to train on");
  return out;
}

RunOutcome run_point(const RunConfig& c, std::uint64_t seed, const IngestResult* file) {
  const Split s = file ? file_split(c, *file, seed) : synthetic_split(c, seed);
  std::vector<LabeledSample> pooled;
  for (const auto& p : s.partitions) pooled.insert(pooled.end(), p.begin(), p.end());
  if (pooled.empty()) throw InputError("no training samples");
  const auto points = features_of(pooled);
  auto grid = std::make_shared<const QuadratureGrid>(QuadratureGrid::fit(points, c.grid));

  AscendOptions solve;
  solve.stop_at_tolerance = c.early_stop;
  FederationOptions fed_opts;
  fed_opts.concurrent = false;
  fed_opts.agent = solve;
  fed_opts.server = solve;
  const FederationReport fed = run_federation(s.partitions, grid, c.hp, fed_opts);
  const TrainedModel cen = centralized_train(pooled, grid, c.hp, solve);

  RunOutcome o;
  o.fed_accuracy = accuracy(fed.global_model, s.test);
  o.cen_accuracy = accuracy(cen.model, s.test);
  o.fed_communication = static_cast<double>(fed.communication_cost);
  o.cen_communication = static_cast<double>(pooled.size());
  o.fed_representation = static_cast<double>(fed.representation_cost);
  o.cen_representation = static_cast<double>(cen.model.nonzero_count());
  return o;
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  if (v.empty()) {
    mean = sd = std::nan("");
    return;
  }
  double acc = 0.0;
  for (double x : v) acc += x;
  mean = acc / static_cast<double>(v.size());
  sd = 0.0;
  if (v.size() < 2) return;
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  sd = std::sqrt(sq / static_cast<double>(v.size() - 1));
}

std::vector<SweepRow> sweep(const RunConfig& cfg) {
  cfg.validate();
  std::optional<IngestResult> file;
  if (!cfg.data_path.empty()) {
    file = ingest_accelerometer(cfg.data_path, parse_label_map(cfg.label_map));
  }
  const auto values = cfg.sweep_values();
  const std::size_t reps = static_cast<std::size_t>(cfg.repetitions);

  // Each (value, repetition) job writes only its own slot.
  std::vector<std::optional<RunOutcome>> slots(values.size() * reps);
  std::vector<RunConfig> points;
  for (double v : values) points.push_back(cfg.at(v));
  if (file) {
    for (const auto& p : points) {
      std::set<std::string> users(file->users.begin(), file->users.end());
      if (p.synthetic.k_subspaces > users.size()) {
        throw InputError("requested " + std::to_string(p.synthetic.k_subspaces) +
                         " agents but the file has " + std::to_string(users.size()) + " users");
      }
    }
  }
  auto job = [&](std::size_t idx) {
    const std::size_t vi = idx / reps;
    const std::uint64_t seed = cfg.base_seed + idx % reps;
    try {
      slots[idx] = run_point(points[vi], seed, file ? &*file : nullptr);
    } catch (const std::exception&) {
      slots[idx].reset();
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), slots.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < slots.size(); ++i) job(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < slots.size(); i = next++) job(i);
      });
    }
  }

  std::vector<SweepRow> table;
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    SweepRow row;
    row.value = values[vi];
    std::vector<double> fa, ca, fc, cc, fr, cr;
    for (std::size_t r = 0; r < reps; ++r) {
      row.seeds.push_back(cfg.base_seed + r);
      const auto& s = slots[vi * reps + r];
      if (!s) {
        ++row.failures;
        continue;
      }
      row.runs.push_back(*s);
      fa.push_back(s->fed_accuracy);
      ca.push_back(s->cen_accuracy);
      fc.push_back(s->fed_communication);
      cc.push_back(s->cen_communication);
      fr.push_back(s->fed_representation);
      cr.push_back(s->cen_representation);
    }
    row.repetitions = static_cast<int>(fa.size());
    double unused = 0.0;
    mean_std(fa, row.fed_acc_mean, row.fed_acc_std);
    mean_std(ca, row.cen_acc_mean, row.cen_acc_std);
    mean_std(fc, row.fed_comm_mean, unused);
    mean_std(cc, row.cen_comm_mean, unused);
    mean_std(fr, row.fed_rep_mean, unused);
    mean_std(cr, row.cen_rep_mean, unused);
    table.push_back(std::move(row));
  }
  return table;
}

}  // namespace

RunOutcome run_once(const RunConfig& cfg, double sweep_value, std::uint64_t seed) {
  const RunConfig c = cfg.at(sweep_value);
  if (c.data_path.empty()) return run_point(c, seed, nullptr);
  const IngestResult file = ingest_accelerometer(c.data_path, parse_label_map(c.label_map));
  return run_point(c, seed, &file);
}

std::vector<SweepRow> sweep_sample_size(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.experiment = Experiment::sample_size;
  return sweep(c);
}

std::vector<SweepRow> sweep_gamma(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.experiment = Experiment::gamma;
  return sweep(c);
}

std::vector<SweepRow> sweep_agents(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.experiment = Experiment::agents;
  return sweep(c);
}

std::vector<SweepRow> run_sweep(const RunConfig& cfg) { return sweep(cfg); }

namespace {

constexpr const char* kColumns[] = {"value",        "fed_acc_mean",  "fed_acc_std",
                                    "cen_acc_mean", "cen_acc_std",   "fed_comm_mean",
                                    "cen_comm_mean", "fed_rep_mean", "cen_rep_mean",
                                    "repetitions",  "failures",      "seeds"};

}  // namespace

std::string sweep_csv(const std::vector<SweepRow>& table) {
  std::string out;
  for (std::size_t i = 0; i < std::size(kColumns); ++i) {
    if (i) out += ',';
    out += kColumns[i];
  }
  out += '\n';
  for (const auto& r : table) {
    for (double v : {r.value, r.fed_acc_mean, r.fed_acc_std, r.cen_acc_mean, r.cen_acc_std,
                     r.fed_comm_mean, r.cen_comm_mean, r.fed_rep_mean, r.cen_rep_mean}) {
      out += format_double(v);
      out += ',';
    }
    out += std::to_string(r.repetitions) + ',' + std::to_string(r.failures) + ',';
    for (std::size_t i = 0; i < r.seeds.size(); ++i) {
      if (i) out += ';';
      out += std::to_string(r.seeds[i]);
    }
    out += '\n';
  }
  return out;
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty sweep table");
  if (split(line, ',').size() != std::size(kColumns)) throw InputError("unexpected sweep header");
  std::vector<SweepRow> out;
  std::size_t lineno = 1;
  auto num = [](const std::string& s) { return s == "nan" ? std::nan("") : parse_double(s); };
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != std::size(kColumns)) {
      throw InputError("sweep line " + std::to_string(lineno) + ": wrong column count");
    }
    SweepRow r;
    double* dst[] = {&r.value,        &r.fed_acc_mean,  &r.fed_acc_std,
                     &r.cen_acc_mean, &r.cen_acc_std,   &r.fed_comm_mean,
                     &r.cen_comm_mean, &r.fed_rep_mean, &r.cen_rep_mean};
    for (std::size_t i = 0; i < std::size(dst); ++i) *dst[i] = num(f[i]);
    r.repetitions = static_cast<int>(parse_long(f[9]));
    r.failures = static_cast<int>(parse_long(f[10]));
    if (!f[11].empty()) {
      for (const auto& s : split(f[11], ';')) {
        r.seeds.push_back(static_cast<std::uint64_t>(parse_long(s)));
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

void check_output_path(const std::string& path) {
  if (path.empty()) throw IoError("no output path given");
  const std::string probe = path + ".probe";
  {
    std::ofstream f(probe);
    if (!f) throw IoError("cannot write to " + path);
  }
  std::remove(probe.c_str());
}

namespace {

void write_atomically(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write to " + tmp);
    f << content;
    f.flush();
    if (!f) throw IoError("failed writing " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

}  // namespace

void emit_outputs(const std::vector<SweepRow>& table, const RunConfig& cfg,
                  const std::string& path) {
  if (table.empty()) throw InputError("nothing to write: the table is empty");
  nlohmann::ordered_json side;
  nlohmann::ordered_json conf = nlohmann::ordered_json::object();
  for (const auto& [k, v] : cfg.to_map()) conf[k] = v;
  side["config"] = std::move(conf);
  side["rows"] = table.size();
  write_atomically(path, sweep_csv(table));
  write_atomically(path + ".json", side.dump(2) + "\n");
}

}  // namespace kfed
