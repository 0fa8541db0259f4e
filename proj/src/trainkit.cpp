#include "reasonflux/trainkit.hpp"

#include "reasonflux/errors.hpp"
#include "reasonflux/textutil.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

using nlohmann::json;

namespace rf {

namespace {

double softplus(double t) {
    // log(1 + e^t) without overflow on large |t|.
    if (t > 0) return t + std::log1p(std::exp(-t));
    return std::log1p(std::exp(t));
}

double sigmoid_neg(double z) {
    // σ(−z), stable on both tails.
    if (z >= 0) {
        const double e = std::exp(-z);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(z));
}

bool strip_wrapper(std::string& s, const std::string& open, const std::string& close) {
    if (s.size() >= open.size() + close.size() && s.rfind(open, 0) == 0 &&
        s.compare(s.size() - close.size(), close.size(), close) == 0) {
        s = trim(s.substr(open.size(), s.size() - open.size() - close.size()));
        return true;
    }
    return false;
}

std::string normalize_answer(const std::string& raw) {
    std::string s = trim(raw);
    bool changed = true;
    while (changed && !s.empty()) {
        changed = false;
        changed |= strip_wrapper(s, "$$", "$$");
        changed |= strip_wrapper(s, "$", "$");
        changed |= strip_wrapper(s, "\\(", "\\)");
        changed |= strip_wrapper(s, "\\[", "\\]");
        changed |= strip_wrapper(s, "\\boxed{", "}");
        changed |= strip_wrapper(s, "`", "`");
        changed |= strip_wrapper(s, "\"", "\"");
    }
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        if (!std::isspace(c)) out.push_back(static_cast<char>(c));
    }
    return out;
}

struct Rational {
    __int128 num = 0;
    __int128 den = 1;
};

// Fractions a/b and finite decimals, up to 18 digits per component.
std::optional<Rational> parse_rational(const std::string& s) {
    if (s.empty() || s.size() > 40) return std::nullopt;
    std::size_t i = 0;
    bool neg = false;
    if (s[i] == '+' || s[i] == '-') {
        neg = s[i] == '-';
        ++i;
    }
    auto read_digits = [&](std::string& out) {
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) out.push_back(s[i++]);
    };
    std::string ipart;
    read_digits(ipart);
    Rational r;
    if (i < s.size() && s[i] == '.') {
        ++i;
        std::string fpart;
        read_digits(fpart);
        if (i != s.size() || (ipart.empty() && fpart.empty())) return std::nullopt;
        if (ipart.size() + fpart.size() > 18) return std::nullopt;
        __int128 num = 0;
        for (char c : ipart + fpart) num = num * 10 + (c - '0');
        __int128 den = 1;
        for (std::size_t k = 0; k < fpart.size(); ++k) den *= 10;
        r.num = num;
        r.den = den;
    } else if (i < s.size() && s[i] == '/') {
        ++i;
        bool dneg = false;
        if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
            dneg = s[i] == '-';
            ++i;
        }
        std::string dpart;
        read_digits(dpart);
        if (i != s.size() || ipart.empty() || dpart.empty()) return std::nullopt;
        if (ipart.size() > 18 || dpart.size() > 18) return std::nullopt;
        __int128 num = 0;
        for (char c : ipart) num = num * 10 + (c - '0');
        __int128 den = 0;
        for (char c : dpart) den = den * 10 + (c - '0');
        if (den == 0) return std::nullopt;
        if (dneg) num = -num;
        r.num = num;
        r.den = den;
    } else {
        if (i != s.size() || ipart.empty()) return std::nullopt;
        if (ipart.size() > 18) return std::nullopt;
        __int128 num = 0;
        for (char c : ipart) num = num * 10 + (c - '0');
        r.num = num;
        r.den = 1;
    }
    if (neg) r.num = -r.num;
    if (r.den < 0) {
        r.den = -r.den;
        r.num = -r.num;
    }
    return r;
}

bool rational_equal(const Rational& a, const Rational& b) {
    return a.num * b.den == b.num * a.den;
}

std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return std::nullopt;
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

void require_finite(const PairLogProbs& lp) {
    if (!std::isfinite(lp.logp_policy_chosen) || !std::isfinite(lp.logp_ref_chosen) ||
        !std::isfinite(lp.logp_policy_rejected) || !std::isfinite(lp.logp_ref_rejected)) {
        throw Error(ErrorCode::Validation, "pair log-probs must be finite");
    }
}

double pair_margin(const PairLogProbs& lp, const DpoConfig& cfg) {
    require_finite(lp);
    if (!(cfg.beta > 0)) throw Error(ErrorCode::Validation, "beta must be > 0");
    const double h_plus = cfg.beta * (lp.logp_policy_chosen - lp.logp_ref_chosen);
    const double h_minus = cfg.beta * (lp.logp_policy_rejected - lp.logp_ref_rejected);
    return h_plus - h_minus;
}

Problem problem_from_json(const json& j, const std::string& where) {
    Problem p;
    if (!j.contains("id") || !j.contains("statement")) {
        throw Error(ErrorCode::Parse, where + ": member needs 'id' and 'statement'");
    }
    p.id = j.at("id").get<std::string>();
    p.statement = j.at("statement").get<std::string>();
    if (j.contains("answer_key") && !j.at("answer_key").is_null()) {
        p.answer_key = j.at("answer_key").get<std::string>();
    }
    if (j.contains("difficulty_tier") && !j.at("difficulty_tier").is_null()) {
        p.difficulty_tier = j.at("difficulty_tier").get<int>();
    }
    return p;
}

} // namespace

std::string to_string(CheckMethod m) {
    switch (m) {
        case CheckMethod::Exact: return "exact";
        case CheckMethod::Numeric: return "numeric";
        case CheckMethod::Rational: return "rational";
    }
    return "exact";
}

std::vector<SftRecord> build_sft_dataset(const TemplateLibrary& lib) {
    std::vector<SftRecord> out;
    out.reserve(lib.templates.size());
    for (const auto& t : lib.templates) {
        SftRecord r;
        r.prompt = "Template name: " + t.name + "\nTags: ";
        for (std::size_t i = 0; i < t.tags.size(); ++i) {
            if (i) r.prompt += ", ";
            r.prompt += t.tags[i];
        }
        r.prompt += "\n";
        r.completion = "Description: " + t.description + "\nScope: " + t.scope + "\n";
        out.push_back(std::move(r));
    }
    return out;
}

double sft_loss(const std::vector<SftRecord>& records,
                const std::vector<double>& completion_logprob_sums) {
    if (records.size() != completion_logprob_sums.size()) {
        throw Error(ErrorCode::Validation, "sft_loss: records and log-prob sums misaligned");
    }
    if (records.empty()) throw Error(ErrorCode::Validation, "sft_loss: empty dataset");
    const double total = std::accumulate(completion_logprob_sums.begin(),
                                         completion_logprob_sums.end(), 0.0);
    return -total / static_cast<double>(records.size());
}

CheckResult check_answer(const std::string& candidate, const std::string& key) {
    CheckResult res;
    res.normalized_candidate = normalize_answer(candidate);
    res.normalized_key = normalize_answer(key);

    if (res.normalized_candidate == res.normalized_key && !res.normalized_candidate.empty()) {
        res.equivalent = true;
        res.method = CheckMethod::Exact;
        return res;
    }
    const auto rc = parse_rational(res.normalized_candidate);
    const auto rk = parse_rational(res.normalized_key);
    if (rc && rk && rational_equal(*rc, *rk)) {
        res.equivalent = true;
        res.method = CheckMethod::Rational;
        return res;
    }
    const auto dc = parse_double(res.normalized_candidate);
    const auto dk = parse_double(res.normalized_key);
    if (dc && dk) {
        res.method = CheckMethod::Numeric;
        const double scale = std::max(std::abs(*dc), std::abs(*dk));
        res.equivalent = scale == 0.0 ? true : std::abs(*dc - *dk) <= kAnswerRelTolerance * scale;
        return res;
    }
    res.equivalent = false;
    res.method = CheckMethod::Exact;
    return res;
}

RewardReport trajectory_reward(const ThoughtTrajectory& traj, const SimilarProblemSet& sim,
                               const TemplateIndex& lib_index, const BackendSpec& inf_backend) {
    validate_similar_set(sim);
    if (traj.steps.empty()) throw Error(ErrorCode::Validation, "trajectory_reward: empty trajectory");

    std::vector<SearchQuery> queries;
    for (const auto& s : traj.steps) queries.push_back(s.query());
    const TrajectoryRetrieval retrieval = retrieve_for_trajectory(lib_index, queries);

    RewardReport report;
    report.trajectory = traj;
    std::size_t correct = 0;
    for (const auto& member : sim.members) {
        bool member_correct = false;
        try {
            std::vector<InstantiatedStep> context;
            for (std::size_t i = 0; i < traj.steps.size(); ++i) {
                context.push_back(instantiate_step(member, traj.steps[i], retrieval.templates[i],
                                                   context, inf_backend));
            }
            const auto answer = extract_answer_line(context.back().reasoning);
            if (answer && member.answer_key) {
                member_correct = check_answer(*answer, *member.answer_key).equivalent;
            }
        } catch (const std::exception&) {
            report.failed.push_back(member.id);
        }
        if (member_correct) ++correct;
        report.per_problem.emplace_back(member.id, member_correct);
    }
    report.reward = static_cast<double>(correct) / static_cast<double>(sim.members.size());
    return report;
}

std::vector<PreferencePair> build_preference_pairs(
    const std::string& problem_id,
    const std::vector<std::pair<ThoughtTrajectory, double>>& sampled, std::size_t max_pairs) {
    if (sampled.size() < 2) {
        throw Error(ErrorCode::Validation, "build_preference_pairs: need at least 2 samples");
    }
    std::vector<PreferencePair> pairs;
    for (std::size_t i = 0; i < sampled.size(); ++i) {
        for (std::size_t j = 0; j < sampled.size(); ++j) {
            if (i == j) continue;
            if (sampled[i].second > sampled[j].second) {
                PreferencePair p;
                p.problem_id = problem_id;
                p.chosen = sampled[i].first;
                p.rejected = sampled[j].first;
                p.reward_chosen = sampled[i].second;
                p.reward_rejected = sampled[j].second;
                pairs.push_back(std::move(p));
            }
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const PreferencePair& a, const PreferencePair& b) {
        const double ga = a.reward_chosen - a.reward_rejected;
        const double gb = b.reward_chosen - b.reward_rejected;
        if (ga != gb) return ga > gb;
        if (a.chosen.version != b.chosen.version) return a.chosen.version < b.chosen.version;
        return a.rejected.version < b.rejected.version;
    });
    if (pairs.size() > max_pairs) pairs.resize(max_pairs);
    return pairs;
}

double dpo_loss(const PairLogProbs& lp, const DpoConfig& cfg) {
    return softplus(-pair_margin(lp, cfg));
}

std::pair<double, double> dpo_grad(const PairLogProbs& lp, const DpoConfig& cfg) {
    const double s = sigmoid_neg(pair_margin(lp, cfg));
    return {-cfg.beta * s, cfg.beta * s};
}

std::string trajectory_canonical(const ThoughtTrajectory& traj) {
    json steps = json::array();
    for (const auto& s : traj.steps) {
        steps.push_back(json{{"goal", s.goal},
                             {"template_name", s.template_name},
                             {"template_tags", s.template_tags}});
    }
    return json{{"steps", steps}, {"version", traj.version}}.dump();
}

ThoughtTrajectory trajectory_from_canonical(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("invalid canonical trajectory: ") + e.what());
    }
    ThoughtTrajectory traj;
    traj.version = j.at("version").get<int>();
    int idx = 1;
    for (const auto& sj : j.at("steps")) {
        TrajectoryStep s;
        s.index = idx++;
        s.goal = sj.at("goal").get<std::string>();
        s.template_name = sj.at("template_name").get<std::string>();
        for (const auto& t : sj.at("template_tags")) s.template_tags.push_back(t.get<std::string>());
        traj.steps.push_back(std::move(s));
    }
    return traj;
}

namespace {

std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write dataset: " + path);
    return out;
}

} // namespace

std::size_t emit_dataset(const std::vector<SftRecord>& records, const std::string& path) {
    auto out = open_for_write(path);
    for (const auto& r : records) {
        out << json{{"prompt", r.prompt}, {"completion", r.completion}}.dump() << "\n";
    }
    return records.size();
}

std::size_t emit_dataset(const std::vector<PreferencePair>& pairs,
                         const std::map<std::string, std::string>& prompts,
                         const std::string& path) {
    auto out = open_for_write(path);
    for (const auto& p : pairs) {
        const auto it = prompts.find(p.problem_id);
        out << json{{"problem_id", p.problem_id},
                    {"prompt", it != prompts.end() ? it->second : std::string()},
                    {"chosen", trajectory_canonical(p.chosen)},
                    {"rejected", trajectory_canonical(p.rejected)},
                    {"reward_chosen", p.reward_chosen},
                    {"reward_rejected", p.reward_rejected}}
                   .dump()
            << "\n";
    }
    return pairs.size();
}

std::size_t emit_dataset(const std::vector<InterplayTranscript>& transcripts,
                         const std::string& path) {
    auto out = open_for_write(path);
    for (const auto& t : transcripts) {
        out << json::parse(transcript_to_json(t)).dump() << "\n";
    }
    return transcripts.size();
}

std::vector<SftRecord> read_sft_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read dataset: " + path);
    std::vector<SftRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const json j = json::parse(line);
        out.push_back(SftRecord{j.at("prompt").get<std::string>(),
                                j.at("completion").get<std::string>()});
    }
    return out;
}

std::vector<PreferencePair> read_pair_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read dataset: " + path);
    std::vector<PreferencePair> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const json j = json::parse(line);
        PreferencePair p;
        p.problem_id = j.at("problem_id").get<std::string>();
        p.chosen = trajectory_from_canonical(j.at("chosen").get<std::string>());
        p.rejected = trajectory_from_canonical(j.at("rejected").get<std::string>());
        p.reward_chosen = j.at("reward_chosen").get<double>();
        p.reward_rejected = j.at("reward_rejected").get<double>();
        out.push_back(std::move(p));
    }
    return out;
}

void validate_similar_set(const SimilarProblemSet& sim) {
    if (sim.members.empty()) {
        throw Error(ErrorCode::Validation, "similar-problem set has no members");
    }
    bool anchor_found = false;
    for (const auto& m : sim.members) {
        if (m.id == sim.anchor.id) anchor_found = true;
        if (!m.answer_key) {
            throw Error(ErrorCode::Validation,
                        "similar-problem member '" + m.id + "' has no answer key");
        }
    }
    if (!anchor_found) {
        throw Error(ErrorCode::Validation,
                    "anchor '" + sim.anchor.id + "' is not among the members");
    }
}

std::vector<SimilarProblemSet> load_similar_sets(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read similar-problem sets: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, path + ": invalid JSON: " + e.what());
    }
    const json sets = j.is_array() ? j : json::array({j});
    std::vector<SimilarProblemSet> out;
    for (const auto& sj : sets) {
        SimilarProblemSet sim;
        if (!sj.contains("members") || !sj.at("members").is_array()) {
            throw Error(ErrorCode::Parse, path + ": set needs a 'members' array");
        }
        for (const auto& mj : sj.at("members")) {
            sim.members.push_back(problem_from_json(mj, path));
        }
        if (!sj.contains("anchor")) {
            throw Error(ErrorCode::Parse, path + ": set needs an 'anchor'");
        }
        if (sj.at("anchor").is_string()) {
            const std::string id = sj.at("anchor").get<std::string>();
            const auto it = std::find_if(sim.members.begin(), sim.members.end(),
                                         [&](const Problem& p) { return p.id == id; });
            if (it == sim.members.end()) {
                throw Error(ErrorCode::Parse, path + ": anchor id '" + id + "' not in members");
            }
            sim.anchor = *it;
        } else {
            sim.anchor = problem_from_json(sj.at("anchor"), path);
        }
        validate_similar_set(sim);
        out.push_back(std::move(sim));
    }
    if (out.empty()) throw Error(ErrorCode::Validation, path + ": no similar-problem sets");
    return out;
}

} // namespace rf
