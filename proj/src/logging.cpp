#include "reasonflux/logging.hpp"

#include <iostream>

namespace rf {

namespace {
std::atomic<std::uint64_t> g_warn_count{0};
std::atomic<int> g_silencers{0};
} // namespace

void log_warn(const std::string& message) {
    g_warn_count.fetch_add(1, std::memory_order_relaxed);
    if (g_silencers.load(std::memory_order_relaxed) == 0) {
        std::cerr << "[reasonflux] warning: " << message << "\n";
    }
}

std::uint64_t warn_count() {
    return g_warn_count.load(std::memory_order_relaxed);
}

WarnSilencer::WarnSilencer() {
    g_silencers.fetch_add(1, std::memory_order_relaxed);
}

WarnSilencer::~WarnSilencer() {
    g_silencers.fetch_sub(1, std::memory_order_relaxed);
}

} // namespace rf
