#include "reco/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "reco/control.hpp"
#include "reco/format.hpp"
#include "reco/identification.hpp"
#include "reco/io.hpp"
#include "reco/strategic_game.hpp"
#include "reco/synthetic.hpp"

namespace reco {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError(std::string("cannot parse ") + what + " '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError(std::string(what) + " is empty");
  return out;
}

std::pair<double, double> parse_pair(const std::string& text, const char* what) {
  const auto v = parse_list(text, what);
  if (v.size() != 2) throw UsageError(std::string(what) + " needs two comma-separated values");
  return {v[0], v[1]};
}

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string output;
  std::string format = "json";
};

std::optional<std::uint64_t> effective_seed(const Globals& g) {
  if (g.seed) return g.seed;
  if (const char* env = std::getenv("RECO_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError("RECO_SEED is not an unsigned integer");
    }
  }
  return std::nullopt;
}

// Sends artifacts to --output when given, to stdout otherwise.
class Sink {
 public:
  Sink(const Globals& g, std::ostream& out) : out_(out) {
    if (!g.output.empty()) {
      file_ = std::make_unique<std::ofstream>(g.output, std::ios::binary);
      if (!*file_) throw UsageError("cannot open output file " + g.output);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : out_; }

 private:
  std::ostream& out_;
  std::unique_ptr<std::ofstream> file_;
};

void emit_json(Sink& sink, const json& j) { sink.stream() << dump_sig10(j) << '\n'; }

ParameterBox box_from(const std::string& beta_box, const std::string& gamma_box, std::size_t dp) {
  const auto [blo, bhi] = parse_pair(beta_box, "--beta-box");
  const auto [glo, ghi] = parse_pair(gamma_box, "--gamma-box");
  return ParameterBox::uniform(dp, blo, bhi, {glo}, {ghi});
}

std::vector<double> state_grid(int points) {
  if (points < 1) throw UsageError("--grid-points must be >= 1");
  std::vector<double> grid;
  for (int i = 0; i < points; ++i) {
    grid.push_back(points == 1 ? 0.5 : static_cast<double>(i) / (points - 1));
  }
  return grid;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"reco: recommendation-mediated control, identification and cheap-talk equilibria"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed (falls back to RECO_SEED)");
  app.add_option("-o,--output", g.output, "Write the artifact to this file instead of stdout");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv"}));

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic interaction log (CSV)");
  std::string gen_scenario;
  gen->add_option("--scenario", gen_scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);

  // recommend
  auto* rec = app.add_subcommand("recommend", "Recommendation that steers the judge to a target");
  std::string rec_model, rec_features, rec_truncate;
  double rec_target = 0.0;
  rec->add_option("--model", rec_model, "Model JSON")->required()->check(CLI::ExistingFile);
  rec->add_option("--target", rec_target, "Target decision in [0,1]")->required();
  rec->add_option("--features", rec_features, "Observed features x', comma separated")->required();
  rec->add_option("--truncate", rec_truncate, "Squeeze the judge's LLO rule into lo,hi");

  // verdict
  auto* ver = app.add_subcommand("verdict", "Full-control verdict for one individual");
  std::string ver_scenario, ver_x, ver_truncate;
  ver->add_option("--scenario", ver_scenario, "Scenario JSON (predictor, mask, judge)")
      ->required()
      ->check(CLI::ExistingFile);
  ver->add_option("--x", ver_x, "Full features x, comma separated")->required();
  ver->add_option("--truncate", ver_truncate, "Squeeze the judge's LLO rule into lo,hi");

  // identify / diagnose
  auto* idn = app.add_subcommand("identify", "Fit the judge's parameters and report identifiability");
  auto* dia = app.add_subcommand("diagnose", "Rank/independence conditions and grid certification");
  std::string data_path, link_name = "exp", beta_box = "-1,1", gamma_box = "0.1,1";
  int grid_per_dim = 5;
  for (auto* sc : {idn, dia}) {
    sc->add_option("--data", data_path, "Dataset CSV")->required()->check(CLI::ExistingFile);
    sc->add_option("--link", link_name, "Link: exp | identity[:shift]");
    sc->add_option("--beta-box", beta_box, "Bounds lo,hi for every beta coordinate");
    sc->add_option("--gamma-box", gamma_box, "Bounds lo,hi for gamma");
  }
  dia->add_option("--grid", grid_per_dim, "Grid points per parameter dimension");

  // sequential
  auto* seq = app.add_subcommand("sequential", "Alternating best-response game trace");
  double seq_b = 0.0, seq_eps = 0.01;
  int seq_horizon = 6, seq_points = 101;
  seq->add_option("--b", seq_b, "Bias b >= 0")->required();
  seq->add_option("--horizon", seq_horizon, "Number of rounds T_max");
  seq->add_option("--grid-points", seq_points, "States sampled uniformly on [0,1]");
  seq->add_option("--epsilon", seq_eps, "Step-function closeness threshold");

  // equilibrium
  auto* eqc = app.add_subcommand("equilibrium", "Partition equilibrium of the cheap-talk game");
  double eq_b = 0.0;
  std::optional<int> eq_n;
  std::string eq_interval = "0.05,0.95";
  int eq_samples = 200;
  eqc->add_option("--b", eq_b, "Bias b >= 0")->required();
  eqc->add_option("--N", eq_n, "Partition size (default: N(b))");
  eqc->add_option("--interval", eq_interval, "State interval c,d");
  eqc->add_option("--samples", eq_samples, "States per interval for the incentive check");

  // sweep
  auto* swp = app.add_subcommand("sweep", "N(b) over a logarithmic grid of biases (CSV)");
  double sw_min = 0.01, sw_max = 2.0;
  int sw_count = 20;
  std::string sw_interval = "0.05,0.95";
  bool sw_long = false;
  swp->add_option("--b-min", sw_min, "Smallest bias");
  swp->add_option("--b-max", sw_max, "Largest bias");
  swp->add_option("--count", sw_count, "Number of grid points");
  swp->add_option("--interval", sw_interval, "State interval c,d");
  swp->add_flag("--long", sw_long, "Emit every equilibrium's breakpoints (b,N,a_0..a_N)");

  // curves
  auto* cur = app.add_subcommand("curves", "Sample decision curves on a grid for plotting (CSV)");
  std::string cur_kind = "llo", cur_gamma = "0.5", cur_delta = "1";
  double cur_b = std::log(3.0);
  int cur_compose = 3, cur_points = 101;
  cur->add_option("--kind", cur_kind, "llo | ideal")->check(CLI::IsMember({"llo", "ideal"}));
  cur->add_option("--gamma", cur_gamma, "LLO gamma values, comma separated");
  cur->add_option("--delta", cur_delta, "LLO delta values, comma separated");
  cur->add_option("--b", cur_b, "Bias for --kind ideal");
  cur->add_option("--compose", cur_compose, "Plot g_b^1 .. g_b^k");
  cur->add_option("--points", cur_points, "Grid points on [0,1]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!g.output.empty()) {
      const auto parent = std::filesystem::absolute(g.output).parent_path();
      if (!std::filesystem::is_directory(parent)) {
        throw UsageError("output directory does not exist: " + parent.string());
      }
    }
    const bool csv = g.format == "csv";

    if (*gen) {
      ScenarioSpec s = scenario_from_json(read_json_file(gen_scenario));
      if (auto seed = effective_seed(g)) s.population.seed = *seed;
      const Dataset ds = generate(s);
      Sink sink(g, out);
      write_csv(ds, sink.stream());
      return 0;
    }

    if (*rec) {
      const LloModel model = model_from_json(read_json_file(rec_model));
      const ObservedFeatures xp{parse_list(rec_features, "--features")};
      std::unique_ptr<DecisionRule> rule;
      if (rec_truncate.empty()) {
        rule = std::make_unique<LloRule>(model);
      } else {
        const auto [lo, hi] = parse_pair(rec_truncate, "--truncate");
        rule = std::make_unique<TruncatedLloRule>(model, lo, hi);
      }
      const DecisionRange range = achievable_range(*rule, xp);
      const double n = recommend(rec_target, xp, *rule);
      Sink sink(g, out);
      emit_json(sink, {{"recommendation", round_sig10(n)},
                       {"controllable", true},
                       {"achievable_range", json::array({round_sig10(range.low), round_sig10(range.high)})},
                       {"target", round_sig10(rec_target)},
                       {"decision", round_sig10(rule->decide(n, xp))}});
      return 0;
    }

    if (*ver) {
      const ScenarioSpec s = scenario_from_json(read_json_file(ver_scenario));
      const auto x = parse_list(ver_x, "--x");
      const IdealPredictor f = IdealPredictor::linear_logistic(s.predictor.weights, s.predictor.intercept);
      std::unique_ptr<DecisionRule> rule;
      if (ver_truncate.empty()) {
        rule = std::make_unique<LloRule>(s.judge);
      } else {
        const auto [lo, hi] = parse_pair(ver_truncate, "--truncate");
        rule = std::make_unique<TruncatedLloRule>(s.judge, lo, hi);
      }
      const ControlVerdict v = full_control_at(f, *rule, s.mask, x);
      Sink sink(g, out);
      emit_json(sink, verdict_to_json(v));
      return 0;
    }

    if (*idn || *dia) {
      Dataset ds = read_csv(data_path);
      const std::size_t dp = ds.observed_dim();
      if (dp == 0) throw DomainError("dataset has no records");
      const auto problem =
          IdentificationProblem::llo(std::move(ds), Link::parse(link_name), box_from(beta_box, gamma_box, dp));
      const IdentificationReport report = identify(problem);
      for (const auto& w : report.warnings) err << "warning: " << w << '\n';
      Sink sink(g, out);
      if (*idn) {
        emit_json(sink, report_to_json(report));
        if (report.verdict != Verdict::Identified) {
          err << "reco: parameters not identified (" << to_string(report.verdict) << ")\n";
          return 1;
        }
        return 0;
      }
      const CertificationReport cert = certify_global(problem, grid_per_dim);
      emit_json(sink, {{"conditions", report_to_json(report)}, {"certification", certification_to_json(cert)}});
      return 0;
    }

    if (*seq) {
      const SequentialTrace trace = sequential_simulate(seq_b, seq_horizon, state_grid(seq_points), seq_eps);
      Sink sink(g, out);
      if (!csv) {
        json rounds = json::array();
        for (const auto& r : trace.rounds) {
          json pts = json::array();
          for (const auto& p : r.samples) {
            pts.push_back(json::array({round_sig10(p.m), round_sig10(p.n), round_sig10(p.y)}));
          }
          rounds.push_back({{"T", r.T}, {"mover", to_string(r.mover)}, {"judge_k", r.judge_k},
                            {"algorithm_k", r.algorithm_k}, {"near_step", r.near_step}, {"samples", pts}});
        }
        emit_json(sink, {{"b", round_sig10(trace.b)}, {"rounds", rounds}});
        return 0;
      }
      auto& os = sink.stream();
      os << "T,mover,judge_k,algorithm_k,m,n,y,near_step\n";
      for (const auto& r : trace.rounds) {
        for (const auto& p : r.samples) {
          os << r.T << ',' << to_string(r.mover) << ',' << r.judge_k << ',' << r.algorithm_k << ','
             << format_sig10(p.m) << ',' << format_sig10(p.n) << ',' << format_sig10(p.y) << ','
             << (r.near_step ? 1 : 0) << '\n';
        }
      }
      return 0;
    }

    if (*eqc) {
      const auto [c, d] = parse_pair(eq_interval, "--interval");
      const BiasGame game(eq_b, c, d);
      const int n = eq_n ? *eq_n : max_partition_size(game);
      const PartitionEquilibrium eq = solve_partition(n, game);
      const std::uint64_t seed = effective_seed(g).value_or(0x5eed);
      const EquilibriumVerification v = verify_equilibrium(eq, game, eq_samples, seed);
      Sink sink(g, out);
      emit_json(sink, equilibrium_to_json(eq, v));
      return v.verified() ? 0 : 1;
    }

    if (*swp) {
      if (!(sw_min > 0.0 && sw_max >= sw_min) || sw_count < 1) {
        throw UsageError("sweep needs 0 < --b-min <= --b-max and --count >= 1");
      }
      const auto [c, d] = parse_pair(sw_interval, "--interval");
      std::vector<double> bs;
      for (int i = 0; i < sw_count; ++i) {
        const double t = sw_count == 1 ? 0.0 : static_cast<double>(i) / (sw_count - 1);
        bs.push_back(sw_min * std::pow(sw_max / sw_min, t));
      }
      const std::vector<int> nmax = sweep_max_partition_size(bs, c, d);
      Sink sink(g, out);
      auto& os = sink.stream();
      if (!sw_long) {
        os << "b,N_max\n";
        for (std::size_t i = 0; i < bs.size(); ++i) os << format_sig10(bs[i]) << ',' << nmax[i] << '\n';
        return 0;
      }
      int widest = 0;
      for (int n : nmax) widest = std::max(widest, n);
      os << "b,N";
      for (int k = 0; k <= widest; ++k) os << ",a_" << k;
      os << '\n';
      for (std::size_t i = 0; i < bs.size(); ++i) {
        const BiasGame game(bs[i], c, d);
        for (int n = 1; n <= nmax[i]; ++n) {
          const PartitionEquilibrium eq = solve_partition(n, game);
          os << format_sig10(bs[i]) << ',' << n;
          for (double a : eq.breakpoints) os << ',' << format_sig10(a);
          for (int k = n + 1; k <= widest; ++k) os << ',';
          os << '\n';
        }
      }
      return 0;
    }

    if (*cur) {
      if (cur_points < 2) throw UsageError("--points must be >= 2");
      Sink sink(g, out);
      auto& os = sink.stream();
      os << "series,x,y\n";
      if (cur_kind == "llo") {
        for (double gamma : parse_list(cur_gamma, "--gamma")) {
          for (double delta : parse_list(cur_delta, "--delta")) {
            const std::string name = "llo_gamma=" + format_sig10(gamma) + "_delta=" + format_sig10(delta);
            for (int i = 0; i < cur_points; ++i) {
              const double p = static_cast<double>(i) / (cur_points - 1);
              os << name << ',' << format_sig10(p) << ',' << format_sig10(llo_weight(p, gamma, delta)) << '\n';
            }
          }
        }
      } else {
        const BiasedIdealDecision bias(cur_b);
        for (int k = 1; k <= cur_compose; ++k) {
          const BiasedIdealDecision gk = compose_ideal(bias, k);
          const std::string name = "g_b^" + std::to_string(k) + "_delta=" + format_sig10(gk.delta());
          for (int i = 0; i < cur_points; ++i) {
            const double m = static_cast<double>(i) / (cur_points - 1);
            os << name << ',' << format_sig10(m) << ',' << format_sig10(gk(m)) << '\n';
          }
        }
      }
      return 0;
    }
  } catch (const UsageError& e) {
    err << "reco: usage: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "reco: error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace reco
