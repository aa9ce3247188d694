#include "reco/io.hpp"

#include <cmath>
#include <fstream>

#include "reco/format.hpp"

namespace reco {

namespace {

json rounded(double v) { return round_sig10(v); }

json rounded(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(round_sig10(x));
  return a;
}

template <class T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("field '") + key + "': " + e.what());
  }
}

template <class T>
T field_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? field<T>(j, key) : fallback;
}

FeatureDistribution feature_from_json(const json& j) {
  const auto kind = field<std::string>(j, "kind");
  if (kind == "uniform") return UniformFeature{field<double>(j, "lo"), field<double>(j, "hi")};
  if (kind == "bernoulli") return BernoulliFeature{field<double>(j, "p")};
  if (kind == "gaussian") {
    return GaussianFeature{field<double>(j, "mean"), field<double>(j, "sd"),
                           field_or<double>(j, "lo", -1e300), field_or<double>(j, "hi", 1e300)};
  }
  throw FormatError("unknown feature kind '" + kind + "'");
}

json feature_to_json(const FeatureDistribution& f) {
  if (const auto* u = std::get_if<UniformFeature>(&f)) {
    return {{"kind", "uniform"}, {"lo", u->lo}, {"hi", u->hi}};
  }
  if (const auto* b = std::get_if<BernoulliFeature>(&f)) return {{"kind", "bernoulli"}, {"p", b->p}};
  const auto& g = std::get<GaussianFeature>(f);
  return {{"kind", "gaussian"}, {"mean", g.mean}, {"sd", g.sd}, {"lo", g.lo}, {"hi", g.hi}};
}

}  // namespace

json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

LloModel model_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("model document must be a JSON object");
  return LloModel(field<double>(j, "gamma"), field<std::vector<double>>(j, "beta"),
                  Link::parse(field_or<std::string>(j, "link", "exp")));
}

json model_to_json(const LloModel& model) {
  return {{"gamma", model.gamma()}, {"beta", model.beta()}, {"link", model.link().name()}};
}

namespace {

ScenarioSpec scenario_from_json_unchecked(const json& j) {
  const json& pj = j.at("population");
  PopulationSpec pop;
  pop.D = field<std::size_t>(pj, "D");
  pop.N = field<std::size_t>(pj, "N");
  pop.seed = field_or<std::uint64_t>(pj, "seed", 0);
  if (!pj.contains("features") || !pj.at("features").is_array()) {
    throw FormatError("population.features must be an array");
  }
  for (const auto& f : pj.at("features")) pop.features.push_back(feature_from_json(f));

  IdealPredictor::LinearLogistic pred;
  const json& fj = j.at("predictor");
  pred.weights = field<std::vector<double>>(fj, "weights");
  pred.intercept = field_or<double>(fj, "intercept", 0.0);

  ScenarioSpec s{std::move(pop), std::move(pred), AttentionMask(field<std::vector<int>>(j, "mask")),
                 model_from_json(j.at("judge")), field_or<bool>(j, "truthful", true)};
  s.validate();
  return s;
}

}  // namespace

ScenarioSpec scenario_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("scenario document must be a JSON object");
  try {
    return scenario_from_json_unchecked(j);
  } catch (const json::exception& e) {
    throw FormatError(std::string("scenario: ") + e.what());
  }
}

json scenario_to_json(const ScenarioSpec& s) {
  json features = json::array();
  for (const auto& f : s.population.features) features.push_back(feature_to_json(f));
  return {{"population",
           {{"D", s.population.D}, {"N", s.population.N}, {"seed", s.population.seed},
            {"features", features}}},
          {"predictor", {{"weights", s.predictor.weights}, {"intercept", s.predictor.intercept}}},
          {"mask", s.mask.mask()},
          {"judge", model_to_json(s.judge)},
          {"truthful", s.truthful}};
}

json report_to_json(const IdentificationReport& r) {
  json j;
  j["verdict"] = to_string(r.verdict);
  j["X_rank"] = r.x_rank;
  j["rank_ok"] = r.rank_ok;
  j["independence_ok"] = r.independence_ok;
  j["perpendicular_ok"] = r.perpendicular_ok;
  j["d_vector"] = rounded(r.d_vector);
  j["d_residual"] = rounded(r.d_residual);
  j["perpendicularity_norm"] = rounded(r.perpendicularity_norm);
  j["corollary_pair"] = r.corollary_pair
                            ? json::array({r.corollary_pair->first, r.corollary_pair->second})
                            : json(nullptr);
  j["fitted_beta"] = r.fitted_beta ? rounded(*r.fitted_beta) : json(nullptr);
  j["fitted_gamma"] = r.fitted_gamma ? rounded(*r.fitted_gamma) : json(nullptr);
  j["fit_residual"] = r.fit_residual ? rounded(*r.fit_residual) : json(nullptr);
  j["evaluated_beta"] = rounded(r.evaluated_beta);
  j["evaluated_theta"] = rounded(r.evaluated_theta);
  j["records_used"] = r.records_used;
  j["warnings"] = r.warnings;
  return j;
}

json certification_to_json(const CertificationReport& cert) {
  json pts = json::array();
  for (const auto& p : cert.points) {
    pts.push_back({{"beta", rounded(p.beta)},
                   {"theta", rounded(p.theta)},
                   {"rank_ok", p.rank_ok},
                   {"independence_ok", p.independence_ok},
                   {"perpendicular_ok", p.perpendicular_ok},
                   {"d_residual", rounded(p.d_residual)},
                   {"passed", p.passed()}});
  }
  return {{"verdict", cert.verdict},
          {"all_pass", cert.all_pass},
          {"passed", cert.passed},
          {"total", cert.points.size()},
          {"points", pts}};
}

json equilibrium_to_json(const PartitionEquilibrium& eq, const EquilibriumVerification& v) {
  return {{"b", rounded(eq.b)},
          {"c", rounded(eq.c)},
          {"d", rounded(eq.d)},
          {"N", eq.size()},
          {"breakpoints", rounded(eq.breakpoints)},
          {"actions", rounded(eq.actions)},
          {"residuals", rounded(eq.arbitrage_residuals)},
          {"verified", v.verified()},
          {"failures", v.failures}};
}

json verdict_to_json(const ControlVerdict& v) {
  return {{"controllable", v.controllable},
          {"witness_n", v.witness_n ? rounded(*v.witness_n) : json(nullptr)},
          {"achievable_range",
           json::array({rounded(v.achievable_range.low), rounded(v.achievable_range.high)})},
          {"target", rounded(v.target)}};
}

namespace {

void dump_into(const json& j, std::string& out, int depth) {
  const std::string pad(2 * (depth + 1), ' ');
  const std::string close(2 * depth, ' ');
  switch (j.type()) {
    case json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_sig10(v) : "null";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        out += pad;
        dump_into(j[i], out, depth + 1);
        out += i + 1 < j.size() ? ",\n" : "\n";
      }
      out += close + "]";
      return;
    }
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      std::size_t i = 0;
      for (auto it = j.begin(); it != j.end(); ++it, ++i) {
        out += pad + json(it.key()).dump() + ": ";
        dump_into(it.value(), out, depth + 1);
        out += i + 1 < j.size() ? ",\n" : "\n";
      }
      out += close + "}";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_sig10(const json& j) {
  std::string out;
  dump_into(j, out, 0);
  return out;
}

}  // namespace reco
