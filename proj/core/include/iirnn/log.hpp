#pragma once

#include <string>

namespace iirnn {

// Diagnostics go to stderr so data streams stay clean; --quiet silences them.
void set_quiet(bool quiet);
bool quiet();
void warn(const std::string& msg);
void info(const std::string& msg);

}  // namespace iirnn
