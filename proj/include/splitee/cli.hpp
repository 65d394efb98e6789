#pragma once

// Command-line front end. `run` parses arguments (without the program name in
// the vector overload) and returns the process exit status: 0 on success, 1 on
// a fatal error, 2 on a usage error.

#include "splitee/system.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace splitee::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::vector<std::string> known_models();

/// Zoo system by name, bound to the covariate columns of `data` for the
/// activity model (empty `covariates` picks every non-reserved column).
TwoStageSystem make_named_system(const std::string& model, const Dataset& data,
                                 std::vector<std::string> covariates = {});

}  // namespace splitee::cli
