#pragma once

#include "reasonflux/llm_gateway.hpp"
#include "reasonflux/navigator.hpp"
#include "reasonflux/template_store.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rf {

/// One structure-finetuning record: identifying metadata in, functional
/// content out.
struct SftRecord {
    std::string prompt;     // rendered (name, tags)
    std::string completion; // rendered (description, scope)

    bool operator==(const SftRecord&) const = default;
};

struct SimilarProblemSet {
    Problem anchor;
    std::vector<Problem> members; // includes the anchor
};

struct RewardReport {
    ThoughtTrajectory trajectory;
    std::vector<std::pair<std::string, bool>> per_problem; // (problem_id, correct)
    double reward = 0.0;                                   // correct / |members|, exactly
    std::vector<std::string> failed; // member ids whose evaluation errored (counted incorrect)
};

struct PreferencePair {
    std::string problem_id;
    ThoughtTrajectory chosen;
    ThoughtTrajectory rejected;
    double reward_chosen = 0.0;
    double reward_rejected = 0.0;
};

struct PairLogProbs {
    double logp_policy_chosen = 0.0;
    double logp_ref_chosen = 0.0;
    double logp_policy_rejected = 0.0;
    double logp_ref_rejected = 0.0;
};

struct DpoConfig {
    double beta = 0.1;
};

enum class CheckMethod { Exact, Numeric, Rational };

std::string to_string(CheckMethod m);

struct CheckResult {
    bool equivalent = false;
    std::string normalized_candidate;
    std::string normalized_key;
    CheckMethod method = CheckMethod::Exact;
};

// ---------------------------------------------------------------------------
// Dataset construction
// ---------------------------------------------------------------------------

/// One record per template: prompt from (name, tags), completion from
/// (description, scope). Rendering is deterministic and keeps the name and
/// scope text verbatim.
std::vector<SftRecord> build_sft_dataset(const TemplateLibrary& lib);

/// Empirical structure-finetuning loss: the negated mean of the completion
/// log-probability sums. Pure arithmetic; weight updates happen elsewhere.
double sft_loss(const std::vector<SftRecord>& records,
                const std::vector<double>& completion_logprob_sums);

/// Answer equivalence: normalize (strip math wrappers and whitespace), then
/// exact match, then exact rational comparison (fractions and finite
/// decimals), then floating comparison at relative tolerance 1e-6.
CheckResult check_answer(const std::string& candidate, const std::string& key);

inline constexpr double kAnswerRelTolerance = 1e-6;

/// Average guided accuracy of the trajectory over a similar-problem set:
/// each member is solved by instantiating every trajectory step in order
/// (same prompts as the interplay loop, no assessment), and the final
/// ANSWER line is checked against the member's key. A member whose
/// evaluation errors counts incorrect and is flagged, keeping the
/// denominator at |members|.
RewardReport trajectory_reward(const ThoughtTrajectory& traj, const SimilarProblemSet& sim,
                               const TemplateIndex& lib_index, const BackendSpec& inf_backend);

inline constexpr std::size_t kDefaultMaxPairsPerProblem = 8;

/// Every strictly-ordered reward pair (ties produce none), sorted by
/// (reward gap desc, chosen version asc, rejected version asc) and capped.
std::vector<PreferencePair> build_preference_pairs(
    const std::string& problem_id,
    const std::vector<std::pair<ThoughtTrajectory, double>>& sampled,
    std::size_t max_pairs = kDefaultMaxPairsPerProblem);

// ---------------------------------------------------------------------------
// Preference loss
// ---------------------------------------------------------------------------

/// −log σ(z) with z = β·(policy−reference log-ratio margin), computed via
/// the overflow-free softplus(−z) form.
double dpo_loss(const PairLogProbs& lp, const DpoConfig& cfg);

/// Analytic gradient of dpo_loss in the two policy log-probs:
/// (∂/∂logp_policy_chosen, ∂/∂logp_policy_rejected) = (−β·σ(−z), +β·σ(−z)).
std::pair<double, double> dpo_grad(const PairLogProbs& lp, const DpoConfig& cfg);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Canonical compact JSON for a trajectory; also the completion text a
/// backend scores when computing trajectory log-probabilities.
std::string trajectory_canonical(const ThoughtTrajectory& traj);
ThoughtTrajectory trajectory_from_canonical(const std::string& text);

/// Newline-delimited JSON with stable key order; returns records written.
std::size_t emit_dataset(const std::vector<SftRecord>& records, const std::string& path);
std::size_t emit_dataset(const std::vector<PreferencePair>& pairs,
                         const std::map<std::string, std::string>& prompts,
                         const std::string& path);
std::size_t emit_dataset(const std::vector<InterplayTranscript>& transcripts,
                         const std::string& path);

std::vector<SftRecord> read_sft_dataset(const std::string& path);
std::vector<PreferencePair> read_pair_dataset(const std::string& path);

/// Similar-problem sets from a JSON file: one {anchor, members} object or an
/// array of them. The anchor must appear among the members and every member
/// needs an answer key.
std::vector<SimilarProblemSet> load_similar_sets(const std::string& path);

void validate_similar_set(const SimilarProblemSet& sim);

} // namespace rf
