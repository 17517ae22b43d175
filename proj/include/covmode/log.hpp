#pragma once

namespace covmode {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Verbosity comes from the COVMODE_LOG environment variable
// (error|warn|info|debug); default is warn. Messages go to stderr.
LogLevel log_level();
void logf(LogLevel level, const char* fmt, ...) __attribute__((format(printf, 2, 3)));

}  // namespace covmode
