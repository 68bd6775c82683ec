#pragma once

namespace ild {

// Parses argv, loads an optional config JSON (explicit flags win over config
// keys), dispatches to the requested command, and writes outputs atomically.
// Returns the process exit code: 0 success / no leak, 2 leak detected,
// 1 any error (unknown flag, bad config key, failed run).
int parse_and_dispatch(int argc, const char* const* argv);

}  // namespace ild
