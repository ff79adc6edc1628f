#include "iirnn/log.hpp"

#include <cstdio>

namespace iirnn {

namespace {
bool g_quiet = false;
}

void set_quiet(bool quiet) { g_quiet = quiet; }

bool quiet() { return g_quiet; }

void warn(const std::string& msg) {
    if (!g_quiet) std::fprintf(stderr, "warning: %s\n", msg.c_str());
}

void info(const std::string& msg) {
    if (!g_quiet) std::fprintf(stderr, "%s\n", msg.c_str());
}

}  // namespace iirnn
