#include "reco/dataset.hpp"

#include <string>

#include "reco/errors.hpp"

namespace reco {

std::size_t Dataset::full_dim() const {
  if (records.empty() || !records.front().x) return 0;
  const std::size_t d = records.front().x->size();
  for (const auto& r : records) {
    if (!r.x || r.x->size() != d) return 0;
  }
  return d;
}

void Dataset::validate() const {
  const std::size_t dp = observed_dim();
  const bool has_x = !records.empty() && records.front().x.has_value();
  const std::size_t d = has_x ? records.front().x->size() : 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.xp.size() != dp) {
      throw DimensionError("record " + std::to_string(i) + " has observed dimension " +
                           std::to_string(r.xp.size()) + ", expected " + std::to_string(dp));
    }
    if (r.x.has_value() != has_x || (has_x && r.x->size() != d)) {
      throw DimensionError("record " + std::to_string(i) + " has inconsistent full features");
    }
    if (!(r.n >= 0.0 && r.n <= 1.0) || !(r.y >= 0.0 && r.y <= 1.0)) {
      throw DomainError("record " + std::to_string(i) + " has n or y outside [0,1]");
    }
  }
}

}  // namespace reco
