#include "reco/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include "reco/format.hpp"

namespace reco {

void ScenarioSpec::validate() const {
  const auto& pop = population;
  if (pop.D < 1) throw DomainError("population dimension D must be >= 1");
  if (pop.N < 1) throw DomainError("population size N must be >= 1");
  if (pop.features.size() != pop.D) {
    throw DimensionError("population needs one feature distribution per coordinate");
  }
  for (const auto& f : pop.features) {
    if (const auto* u = std::get_if<UniformFeature>(&f)) {
      if (!(u->lo < u->hi)) throw DomainError("uniform feature needs lo < hi");
    } else if (const auto* b = std::get_if<BernoulliFeature>(&f)) {
      if (!(b->p >= 0.0 && b->p <= 1.0)) throw DomainError("bernoulli feature needs p in [0,1]");
    } else {
      const auto& g = std::get<GaussianFeature>(f);
      if (!(g.sd > 0.0) || !(g.lo < g.hi)) {
        throw DomainError("gaussian feature needs sd > 0 and lo < hi");
      }
    }
  }
  if (mask.full_dim() != pop.D) throw DimensionError("attention mask dimension must equal D");
  if (predictor.weights.size() != pop.D) throw DimensionError("predictor weights must have dimension D");
  if (judge.dim() != mask.observed_dim()) {
    throw DimensionError("judge beta dimension must equal the number of attended features");
  }
}

Dataset generate(const ScenarioSpec& scenario) {
  scenario.validate();
  const auto& pop = scenario.population;
  const IdealPredictor f = IdealPredictor::linear_logistic(scenario.predictor.weights,
                                                           scenario.predictor.intercept);
  std::mt19937_64 rng(pop.seed);
  std::uniform_real_distribution<double> explore(kExplorationLo, kExplorationHi);

  Dataset ds;
  ds.records.reserve(pop.N);
  std::vector<double> x(pop.D);
  for (std::size_t i = 0; i < pop.N; ++i) {
    for (std::size_t k = 0; k < pop.D; ++k) {
      const auto& dist = pop.features[k];
      if (const auto* u = std::get_if<UniformFeature>(&dist)) {
        x[k] = std::uniform_real_distribution<double>(u->lo, u->hi)(rng);
      } else if (const auto* b = std::get_if<BernoulliFeature>(&dist)) {
        x[k] = std::bernoulli_distribution(b->p)(rng) ? 1.0 : 0.0;
      } else {
        const auto& g = std::get<GaussianFeature>(dist);
        x[k] = std::clamp(std::normal_distribution<double>(g.mean, g.sd)(rng), g.lo, g.hi);
      }
    }
    InteractionRecord rec;
    rec.x = x;
    rec.xp = scenario.mask.apply(x);
    const double m = f(x);
    rec.n = scenario.truthful ? m : explore(rng);
    rec.y = g_eval(rec.n, rec.xp, scenario.judge);
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// CSV

CsvError::CsvError(Kind kind, std::size_t line, const std::string& what)
    : Error(line ? "line " + std::to_string(line) + ": " + what : what), kind_(kind), line_(line) {}

void write_csv(const Dataset& dataset, std::ostream& os) {
  dataset.validate();
  const std::size_t d = dataset.full_dim();
  const std::size_t dp = dataset.observed_dim();
  if (!dataset.empty() && dataset.records.front().x && d == 0) {
    throw DimensionError("records carry full features of differing dimension");
  }
  os << "id";
  for (std::size_t k = 1; k <= d; ++k) os << ",x_" << k;
  for (std::size_t k = 1; k <= dp; ++k) os << ",xp_" << k;
  os << ",n,y\n";
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& r = dataset.records[i];
    os << i;
    if (d) {
      for (double v : *r.x) os << ',' << format_shortest(v);
    }
    for (double v : r.xp.values) os << ',' << format_shortest(v);
    os << ',' << format_shortest(r.n) << ',' << format_shortest(r.y) << '\n';
  }
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CsvError(CsvError::Kind::Io, 0, "cannot open " + path.string() + " for writing");
  write_csv(dataset, os);
  if (!os) throw CsvError(CsvError::Kind::Io, 0, "failed writing " + path.string());
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_number(std::string_view tok, std::size_t line, std::string_view column) {
  if (tok.empty()) {
    throw CsvError(CsvError::Kind::Missing, line, "missing value in column " + std::string(column));
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw CsvError(CsvError::Kind::Number, line,
                   "cannot parse '" + std::string(tok) + "' in column " + std::string(column));
  }
  return v;
}

// Counts a run of columns named prefix1, prefix2, ... starting at `pos`.
std::size_t numbered_run(const std::vector<std::string_view>& cols, std::size_t pos,
                         std::string_view prefix) {
  std::size_t k = 0;
  while (pos + k < cols.size() && cols[pos + k] == std::string(prefix) + std::to_string(k + 1)) ++k;
  return k;
}

}  // namespace

Dataset read_csv(std::istream& is) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line)) throw CsvError(CsvError::Kind::Schema, 1, "empty file, no header");
  const auto header = split(line);

  if (header.empty() || header[0] != "id") {
    throw CsvError(CsvError::Kind::Schema, 1, "header must start with 'id'");
  }
  std::size_t pos = 1;
  const std::size_t d = numbered_run(header, pos, "x_");
  pos += d;
  const std::size_t dp = numbered_run(header, pos, "xp_");
  pos += dp;
  if (dp == 0) throw CsvError(CsvError::Kind::Schema, 1, "header needs xp_1..xp_Dp columns");
  if (pos >= header.size() || header[pos] != "n") {
    throw CsvError(CsvError::Kind::Schema, 1, "header is missing the 'n' column after xp_*");
  }
  if (pos + 1 >= header.size() || header[pos + 1] != "y") {
    throw CsvError(CsvError::Kind::Schema, 1, "header is missing the 'y' column after 'n'");
  }
  if (pos + 2 != header.size()) {
    throw CsvError(CsvError::Kind::Schema, 1, "unexpected columns after 'y'");
  }
  const std::size_t ncols = header.size();

  Dataset ds;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cols = split(line);
    if (cols.size() != ncols) {
      throw CsvError(CsvError::Kind::ColumnCount, lineno,
                     "expected " + std::to_string(ncols) + " columns, found " +
                         std::to_string(cols.size()));
    }
    (void)parse_number(cols[0], lineno, "id");
    InteractionRecord rec;
    std::size_t c = 1;
    if (d) {
      rec.x.emplace();
      for (std::size_t k = 0; k < d; ++k, ++c) rec.x->push_back(parse_number(cols[c], lineno, header[c]));
    }
    for (std::size_t k = 0; k < dp; ++k, ++c) rec.xp.values.push_back(parse_number(cols[c], lineno, header[c]));
    rec.n = parse_number(cols[c], lineno, "n");
    rec.y = parse_number(cols[c + 1], lineno, "y");
    if (!(rec.n >= 0.0 && rec.n <= 1.0)) {
      throw CsvError(CsvError::Kind::Range, lineno, "n = " + std::string(cols[c]) + " outside [0,1]");
    }
    if (!(rec.y >= 0.0 && rec.y <= 1.0)) {
      throw CsvError(CsvError::Kind::Range, lineno,
                     "y = " + std::string(cols[c + 1]) + " outside [0,1]");
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CsvError(CsvError::Kind::Io, 0, "cannot open " + path.string());
  return read_csv(is);
}

}  // namespace reco
