#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mixtoll/scenario.hpp"

namespace mixtoll::cli {

/// Runs the command line; args excludes the program name. Returns 0 on
/// success, 1 on a domain error or a failed validation row, 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Rows of `reproduce --target bounds`: k from k_min to k_max in k_step
/// increments with the upper-bound and lower-bound curves at each k.
Report bounds_table(double k_min, double k_max, double k_step);

}  // namespace mixtoll::cli
