#pragma once

// JSON exchange formats: model files {"gamma", "beta", "link"}, scenario files,
// and the reports written by the CLI.

#include <filesystem>

#include "json.hpp"

#include "reco/decision_models.hpp"
#include "reco/errors.hpp"
#include "reco/identification.hpp"
#include "reco/strategic_game.hpp"
#include "reco/synthetic.hpp"

namespace reco {

class FormatError : public Error {
 public:
  using Error::Error;
};

using nlohmann::json;

json read_json_file(const std::filesystem::path& path);

LloModel model_from_json(const json& j);
json model_to_json(const LloModel& model);

ScenarioSpec scenario_from_json(const json& j);
json scenario_to_json(const ScenarioSpec& s);

/// Numbers in report documents are rounded to 10 significant digits.
json report_to_json(const IdentificationReport& report);
json certification_to_json(const CertificationReport& cert);
json equilibrium_to_json(const PartitionEquilibrium& eq, const EquilibriumVerification& v);
json verdict_to_json(const ControlVerdict& v);

/// Pretty-prints with floats at 10 significant digits; non-finite floats become null.
std::string dump_sig10(const json& j);

}  // namespace reco
