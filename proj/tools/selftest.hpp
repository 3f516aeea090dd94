#pragma once

#include <iosfwd>

namespace msldp::cli {

/// Quick analytic-oracle checks; prints one PASS/FAIL line per check and returns the failure count.
int run_selftest(std::ostream& out);

}  // namespace msldp::cli
