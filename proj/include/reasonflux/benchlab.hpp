#pragma once

#include "reasonflux/navigator.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rf {

/// Seeded toy reasoning task: find the unique correct move sequence in a
/// uniform tree with `branching` moves per state and `length` steps.
struct SyntheticTask {
    std::string id;
    int tier = 1; // 1..4
    std::vector<int> solution_path;
    int branching = 2;
    int length = 1;
};

using TierParams = std::map<int, std::pair<int, int>>; // tier -> (branching, length)

/// tier t -> branching 2+t, length 2t.
TierParams default_tier_params();

/// Stands in for live competition problems: hint quality models how often a
/// retrieved template reveals the correct move outright.
struct SyntheticEnvironment {
    std::uint64_t rng_seed = 0;
    double guided_hint_quality = 0.85; // in [0,1]
    TierParams tier_params = default_tier_params();
};

enum class Method { Guided, BestOfN, Mcts };

std::string to_string(Method m);

struct StrategyReport {
    Method method = Method::Guided;
    int tier = 1;
    double mean_cost = 0.0; // over solved trials only
    double solve_rate = 0.0;
    int trials = 0;
};

struct MctsConfig {
    double exploration_constant = 1.4142135623730951; // sqrt(2)
    std::uint64_t max_iterations = 100000;
};

/// 4·per_tier tasks, bit-deterministic for a seed; each task's solution path
/// is drawn from its own generator so per_tier changes never reshuffle
/// earlier tasks.
std::vector<SyntheticTask> gen_tasks(std::uint64_t seed, int per_tier,
                                     const TierParams& params = default_tier_params());

/// Interplay-loop simulation. Each step costs one instantiate+assess round;
/// when the template hint misses (probability 1−hint_quality), finding the
/// correct move among the remaining branching−1 costs that many extra
/// assess+revise rounds, uniformly distributed. Always solves.
long long run_guided(const SyntheticEnvironment& env, const SyntheticTask& task,
                     int trial_index = 0);

/// Samples complete uniform-random move sequences until one matches the
/// solution; cost is the number of trajectories sampled. nullopt when the
/// cap is reached.
std::optional<long long> run_best_of_n(const SyntheticEnvironment& env, const SyntheticTask& task,
                                       long long max_trajectories, int trial_index = 0);

/// UCB1 tree search: unvisited children expand first (lowest move index),
/// uniform random rollout to terminal, reward 1 on an exact solution match,
/// mean-reward backpropagation. Cost is the iteration at which the
/// most-visited root-to-leaf path first equals the solution; nullopt at
/// max_iterations.
std::optional<long long> run_mcts(const SyntheticEnvironment& env, const SyntheticTask& task,
                                  const MctsConfig& cfg, int trial_index = 0);

struct MctsAudit {
    std::optional<long long> cost;
    bool visit_counts_consistent = false; // parent visits == sum(child visits) + 1, every node,
                                          // checked after every iteration
};

/// run_mcts with per-iteration tree invariant checking; for tests on small
/// tasks (the audit is O(nodes) per iteration).
MctsAudit run_mcts_audited(const SyntheticEnvironment& env, const SyntheticTask& task,
                           const MctsConfig& cfg, int trial_index = 0);

struct CompareConfig {
    long long best_of_n_cap = 50000000;
    MctsConfig mcts{1.4142135623730951, 3000000};
    int trials_per_task = 1;
};

/// Runs all three methods on every task and aggregates per (method, tier):
/// 12 rows, methods in (guided, best_of_n, mcts) order, tiers ascending.
std::vector<StrategyReport> compare(const SyntheticEnvironment& env,
                                    const std::vector<SyntheticTask>& tasks,
                                    const CompareConfig& cfg);

struct ScalingRow {
    int tier = 0;
    double mean_rounds = 0.0;
    double mean_templates = 0.0;
    int count = 0;
};

/// Groups transcripts by difficulty tier; transcripts without a tier are
/// excluded with a warning. Rows sorted by tier ascending.
std::vector<ScalingRow> scaling_report(const std::vector<InterplayTranscript>& transcripts);

/// CSV: method,tier,mean_cost,solve_rate,trials
std::string tradeoff_csv(const std::vector<StrategyReport>& reports);
/// CSV: tier,mean_rounds,mean_templates
std::string scaling_csv(const std::vector<ScalingRow>& rows);

/// Seed for one (environment, task, method, trial) stream; every trial owns
/// an independent generator so concurrency cannot change results.
std::uint64_t trial_seed(std::uint64_t env_seed, const std::string& task_id, Method method,
                         int trial_index);

} // namespace rf
