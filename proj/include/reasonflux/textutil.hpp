#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace rf {

/// Lowercase ASCII copy; non-ASCII bytes pass through unchanged.
std::string to_lower(std::string_view s);

/// Deterministic identifier for a template name: lowercase, every run of
/// non-alphanumeric bytes collapsed to a single hyphen, no leading/trailing
/// hyphen.
std::string slugify(std::string_view name);

/// Index tokenization: lowercase, split on non-alphanumeric, drop tokens
/// shorter than 2 bytes.
std::vector<std::string> tokenize(std::string_view text);

/// Token set over a list of phrases (tags, names).
std::set<std::string> token_set(const std::vector<std::string>& phrases);

/// |a ∩ b| / |a ∪ b|; 0 when both sets are empty.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

std::string trim(std::string_view s);

/// FNV-1a 64-bit. Used for request fingerprints and library content hashes.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string to_hex(std::uint64_t v);

/// Fixed-precision decimal formatting (printf %.*f), locale-independent.
std::string format_fixed(double v, int precision);

} // namespace rf
