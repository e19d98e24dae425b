#pragma once

#include <ostream>

namespace oamfso::cli {

/// Quick invariant checks over every module; prints one line per check.
bool run_selftest(std::ostream& out);

}  // namespace oamfso::cli
