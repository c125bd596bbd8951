#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "kfed/error.hpp"
#include "kfed/model.hpp"
#include "kfed/numfmt.hpp"

namespace kfed {

namespace {

constexpr const char* kMagic = "kfed-model";
constexpr const char* kVersion = "v1";

std::map<std::string, std::string> parse_header(const std::string& line) {
  std::istringstream in(line);
  std::string magic, version;
  in >> magic >> version;
  if (magic != kMagic || version != kVersion) throw InputError("not a kfed-model v1 file");
  std::map<std::string, std::string> kv;
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw InputError("malformed model header token '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw InputError("model header lacks '" + key + "'");
  return it->second;
}

}  // namespace

void write_model(std::ostream& out, const CoefficientField& alpha) {
  const auto& g = alpha.grid();
  out << kMagic << ' ' << kVersion << " dim=" << g.dim() << " resolution=" << g.resolution()
      << " measure=" << to_string(g.measure()) << " box_lo=" << format_double_list(g.box_lo())
      << " box_hi=" << format_double_list(g.box_hi())
      << " widths=" << format_double_list(g.family().widths())
      << " nonzero=" << alpha.nonzero_count() << '\n';
  for (std::size_t j = 0; j < g.cell_count(); ++j) {
    if (alpha[j] == 0.0) continue;
    for (double c : g.center(j)) out << format_double(c) << ' ';
    out << format_double(g.width(j)) << ' ' << format_double(alpha[j]) << '\n';
  }
  if (!out) throw IoError("failed writing model");
}

CoefficientField read_model(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw InputError("empty model file");
  const auto kv = parse_header(header);
  const long dim = parse_long(require(kv, "dim"));
  const long res = parse_long(require(kv, "resolution"));
  auto lo = parse_double_list(require(kv, "box_lo"));
  auto hi = parse_double_list(require(kv, "box_hi"));
  if (dim < 1 || static_cast<long>(lo.size()) != dim || static_cast<long>(hi.size()) != dim) {
    throw InputError("model header dimension does not match its box");
  }
  auto grid = std::make_shared<const QuadratureGrid>(
      std::move(lo), std::move(hi), static_cast<int>(res),
      KernelFamily(parse_double_list(require(kv, "widths"))),
      measure_from_string(require(kv, "measure")));
  const long nonzero = parse_long(require(kv, "nonzero"));

  // Cell centers are rebuilt from the same header values, so exact matching is sound.
  std::map<std::vector<double>, std::size_t> index;
  for (std::size_t j = 0; j < grid->cell_count(); ++j) {
    std::vector<double> key(grid->center(j).begin(), grid->center(j).end());
    key.push_back(grid->width(j));
    index.emplace(std::move(key), j);
  }

  std::vector<double> values(grid->cell_count(), 0.0);
  std::string line;
  long seen = 0;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    std::vector<double> key;
    std::string tok;
    while (ls >> tok) key.push_back(parse_double(tok));
    if (static_cast<long>(key.size()) != dim + 2) {
      throw InputError("model line " + std::to_string(lineno) + ": expected " +
                       std::to_string(dim + 2) + " fields");
    }
    const double value = key.back();
    key.pop_back();
    const auto it = index.find(key);
    if (it == index.end()) {
      throw InputError("model line " + std::to_string(lineno) + ": no grid cell at that center");
    }
    values[it->second] = value;
    ++seen;
  }
  if (seen != nonzero) throw InputError("model cell count does not match its header");
  return CoefficientField(std::move(grid), std::move(values));
}

}  // namespace kfed
