#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace phn {

// Entry point shared by the binary and the tests. args excludes the program
// name. Returns 0 on success, 1 on validation errors, 2 on runtime failures.
int run_cli(std::vector<std::string> args, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

} // namespace phn
