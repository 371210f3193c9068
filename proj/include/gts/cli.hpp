#pragma once

namespace gts::cli {

// Entry point for the `gts` binary. Returns the process exit code:
// 0 success, 1 usage or configuration error, 2 runtime failure.
int run(int argc, const char* const* argv);

}  // namespace gts::cli
