#pragma once

namespace octnet {

// Runs the full command-line interface. Exit codes: 0 success, 1 usage error,
// 2 runtime failure, 3 reproduction-check failure.
int cli_main(int argc, const char* const* argv);

}  // namespace octnet
