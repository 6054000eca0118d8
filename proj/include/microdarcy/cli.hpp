#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <microdarcy/config.hpp>

namespace microdarcy {

enum ExitCode : int { exit_ok = 0, exit_error = 1, exit_config = 2, exit_wellposedness = 3, exit_solver = 4 };

const std::vector<std::string> &commands();

// runs one command, writes its artifacts under config.directory and maps
// errors to exit codes; messages go to log
int run(const std::string &command, const Config &config, std::ostream &log);

} // namespace microdarcy
