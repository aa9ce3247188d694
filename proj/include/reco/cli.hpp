#pragma once

#include <iosfwd>

namespace reco {

/// Entry point of the `reco` tool. Returns 0 on success, 1 on domain errors,
/// 2 on usage errors. Diagnostics go to `err`, artifacts to `out` unless
/// --output names a file.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace reco
