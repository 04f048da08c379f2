#pragma once

namespace hccf {

// Entry point shared by the binary and the tests. Commands: prepare, train,
// eval, analyze. Exit codes: 0 success, 2 config error, 3 data error,
// 4 numeric abort.
int run_cli(int argc, const char* const* argv);

}  // namespace hccf
