#pragma once

#include <atomic>
#include <string>

namespace rf {

/// Stderr warning with a process-wide counter so tests can observe that a
/// code path warned without scraping streams.
void log_warn(const std::string& message);

std::uint64_t warn_count();

/// Drop warning text (the counter still advances) while in scope. For tests
/// that drive thousands of deliberately malformed exchanges.
class WarnSilencer {
public:
    WarnSilencer();
    ~WarnSilencer();
};

} // namespace rf
