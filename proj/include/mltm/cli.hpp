#pragma once

#include <iosfwd>

namespace mltm {

// Entry point of the `mltm` tool. Returns 0 on success, 2 for invalid
// configuration and 1 for runtime failures; failures print one JSON line
// {"error": kind, "message": ...} to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mltm
