#pragma once

#include <iosfwd>

namespace edge::cli {

enum Exit : int {
    Ok = 0,
    Usage = 1,  // diagnostics, validation failures, bad flags or bindings
    Io = 2,
    Runtime = 3,  // evaluation errors and tripped limits
    Mismatch = 4,
};

// Entry point of the `edge` tool: check, run, verify.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace edge::cli
