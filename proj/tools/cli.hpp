#pragma once

namespace gridfuse {

/// Entry point of the gridfuse command line. Returns 0 on success, 1 on a
/// usage error and 2 on a data error.
int run_cli(int argc, const char* const* argv);

}  // namespace gridfuse
