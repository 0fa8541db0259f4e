#include "reasonflux/textutil.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace rf {

namespace {

bool is_alnum_byte(unsigned char c) {
    return std::isalnum(c) != 0;
}

} // namespace

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string slugify(std::string_view name) {
    std::string out;
    out.reserve(name.size());
    bool pending_hyphen = false;
    for (unsigned char c : name) {
        if (is_alnum_byte(c)) {
            if (pending_hyphen && !out.empty()) out.push_back('-');
            pending_hyphen = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        } else {
            pending_hyphen = true;
        }
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (cur.size() >= 2) tokens.push_back(cur);
        cur.clear();
    };
    for (unsigned char c : text) {
        if (is_alnum_byte(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

std::set<std::string> token_set(const std::vector<std::string>& phrases) {
    std::set<std::string> out;
    for (const auto& p : phrases) {
        for (auto& t : tokenize(p)) out.insert(std::move(t));
    }
    return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : a) {
        if (b.count(t)) ++inter;
    }
    const std::size_t uni = a.size() + b.size() - inter;
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

std::string format_fixed(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return std::string(buf);
}

} // namespace rf
