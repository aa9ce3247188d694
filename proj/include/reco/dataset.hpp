#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "reco/decision_models.hpp"

namespace reco {

/// One logged algorithm–judge interaction {x, x′, n, y}.
struct InteractionRecord {
  std::optional<std::vector<double>> x;  ///< full features, when logged
  ObservedFeatures xp;
  double n = 0.0;
  double y = 0.0;

  bool operator==(const InteractionRecord&) const = default;
};

struct Dataset {
  std::vector<InteractionRecord> records;

  bool empty() const { return records.empty(); }
  std::size_t size() const { return records.size(); }
  /// D′ of the first record (0 for an empty dataset).
  std::size_t observed_dim() const { return records.empty() ? 0 : records.front().xp.size(); }
  /// D when every record carries full features, 0 otherwise.
  std::size_t full_dim() const;

  /// Throws DimensionError / DomainError when records disagree in shape or
  /// carry n, y outside [0, 1].
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

}  // namespace reco
