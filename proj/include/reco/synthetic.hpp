#pragma once

// Synthetic populations, truthful-period interaction logs, and the dataset CSV
// format (header `id,x_1..x_D,xp_1..xp_Dp,n,y`; x columns optional).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <variant>
#include <vector>

#include "reco/control.hpp"
#include "reco/dataset.hpp"
#include "reco/decision_models.hpp"
#include "reco/errors.hpp"

namespace reco {

struct UniformFeature {
  double lo = 0.0;
  double hi = 1.0;
};
struct BernoulliFeature {
  double p = 0.5;
};
/// Normal draw clipped to [lo, hi].
struct GaussianFeature {
  double mean = 0.0;
  double sd = 1.0;
  double lo = -1e300;
  double hi = 1e300;
};
using FeatureDistribution = std::variant<UniformFeature, BernoulliFeature, GaussianFeature>;

struct PopulationSpec {
  std::size_t D = 1;
  std::vector<FeatureDistribution> features;
  std::size_t N = 1;
  std::uint64_t seed = 0;
};

struct ScenarioSpec {
  PopulationSpec population;
  IdealPredictor::LinearLogistic predictor;
  AttentionMask mask;
  LloModel judge;
  bool truthful = true;

  void validate() const;
};

/// Range of the exploration-mode recommendations.
inline constexpr double kExplorationLo = 0.01;
inline constexpr double kExplorationHi = 0.99;

/// Draws x, sets x′ = A(x), m = f(x), n = m (truthful) or uniform on
/// (0.01, 0.99), and y = g(n, x′). Deterministic given the seed.
Dataset generate(const ScenarioSpec& scenario);

class CsvError : public Error {
 public:
  enum class Kind { Schema, ColumnCount, Number, Range, Missing, Io };
  CsvError(Kind kind, std::size_t line, const std::string& what);
  Kind kind() const { return kind_; }
  /// 1-based line number in the file (the header is line 1); 0 if not applicable.
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

/// Writes every value in shortest round-trip form. Throws DimensionError for
/// ragged datasets.
void write_csv(const Dataset& dataset, std::ostream& os);
void write_csv(const Dataset& dataset, const std::filesystem::path& path);

Dataset read_csv(std::istream& is);
Dataset read_csv(const std::filesystem::path& path);

}  // namespace reco
