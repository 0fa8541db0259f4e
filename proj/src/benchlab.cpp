#include "reasonflux/benchlab.hpp"

#include "reasonflux/errors.hpp"
#include "reasonflux/logging.hpp"
#include "reasonflux/textutil.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

namespace rf {

namespace {

// Bounded draws use a plain modulo: the bias at branching <= 6 against a
// 64-bit generator is immeasurable, and the reduction is portable across
// standard libraries (uniform_int_distribution is not).
int draw_below(std::mt19937_64& rng, int n) {
    return static_cast<int>(rng() % static_cast<std::uint64_t>(n));
}

double draw_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0); // 53-bit mantissa
}

std::mt19937_64 seeded_rng(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

// --- MCTS ------------------------------------------------------------------

struct McNode {
    std::int32_t child_base = -1; // offset into the children pool, branching slots
    std::uint32_t visits = 0;
    float value = 0.0f;
    // Selection-loop caches, refreshed on backpropagation.
    float mean = 0.0f;           // value / visits
    float inv_sqrt_visits = 0.0f; // 1 / sqrt(visits)
};

class McTree {
public:
    McTree(int branching, std::size_t reserve_nodes) : branching_(branching) {
        nodes_.reserve(reserve_nodes);
        nodes_.push_back(McNode{});
    }

    McNode& node(std::int32_t i) { return nodes_[static_cast<std::size_t>(i)]; }
    const McNode& node(std::int32_t i) const { return nodes_[static_cast<std::size_t>(i)]; }

    std::int32_t child(std::int32_t parent, int move) const {
        const auto base = nodes_[static_cast<std::size_t>(parent)].child_base;
        if (base < 0) return -1;
        return pool_[static_cast<std::size_t>(base) + static_cast<std::size_t>(move)];
    }

    std::int32_t add_child(std::int32_t parent, int move) {
        auto& p = nodes_[static_cast<std::size_t>(parent)];
        if (p.child_base < 0) {
            p.child_base = static_cast<std::int32_t>(pool_.size());
            pool_.insert(pool_.end(), static_cast<std::size_t>(branching_), -1);
        }
        const std::int32_t id = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back(McNode{});
        pool_[static_cast<std::size_t>(p.child_base) + static_cast<std::size_t>(move)] = id;
        return id;
    }

    /// Lowest move index without a child, or -1 when fully expanded.
    int first_unexpanded(std::int32_t parent) const {
        const auto base = nodes_[static_cast<std::size_t>(parent)].child_base;
        if (base < 0) return 0;
        for (int m = 0; m < branching_; ++m) {
            if (pool_[static_cast<std::size_t>(base) + static_cast<std::size_t>(m)] < 0) return m;
        }
        return -1;
    }

    int branching() const { return branching_; }

    /// parent visits == sum of child visits + 1 at every expanded node (the
    /// +1 is the parent's own creation rollout). Childless nodes only carry
    /// their own visits: terminal nodes are revisited without children.
    bool visit_counts_consistent() const {
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const auto& n = nodes_[i];
            if (n.child_base < 0) {
                if (n.visits < 1) return false;
                continue;
            }
            std::uint64_t child_sum = 0;
            for (int m = 0; m < branching_; ++m) {
                const auto c =
                    pool_[static_cast<std::size_t>(n.child_base) + static_cast<std::size_t>(m)];
                if (c >= 0) child_sum += nodes_[static_cast<std::size_t>(c)].visits;
            }
            if (n.visits != child_sum + 1) return false;
        }
        return true;
    }

private:
    int branching_;
    std::vector<McNode> nodes_;
    std::vector<std::int32_t> pool_;
};

bool best_visit_path_is(const McTree& tree, const SyntheticTask& task) {
    std::int32_t cur = 0;
    for (int depth = 0; depth < task.length; ++depth) {
        int best_move = -1;
        std::uint32_t best_visits = 0;
        for (int m = 0; m < tree.branching(); ++m) {
            const std::int32_t c = tree.child(cur, m);
            if (c < 0) continue;
            const std::uint32_t v = tree.node(c).visits;
            if (best_move < 0 || v > best_visits) {
                best_move = m;
                best_visits = v;
            }
        }
        if (best_move < 0) return false;
        if (best_move != task.solution_path[static_cast<std::size_t>(depth)]) return false;
        cur = tree.child(cur, best_move);
    }
    return true;
}

} // namespace

TierParams default_tier_params() {
    TierParams p;
    for (int t = 1; t <= 4; ++t) p[t] = {2 + t, 2 * t};
    return p;
}

std::string to_string(Method m) {
    switch (m) {
        case Method::Guided: return "guided";
        case Method::BestOfN: return "best_of_n";
        case Method::Mcts: return "mcts";
    }
    return "guided";
}

std::uint64_t trial_seed(std::uint64_t env_seed, const std::string& task_id, Method method,
                         int trial_index) {
    std::string key = std::to_string(env_seed);
    key += '|';
    key += task_id;
    key += '|';
    key += to_string(method);
    key += '|';
    key += std::to_string(trial_index);
    return fnv1a(key);
}

std::vector<SyntheticTask> gen_tasks(std::uint64_t seed, int per_tier, const TierParams& params) {
    if (per_tier < 1) throw Error(ErrorCode::Validation, "gen_tasks: per_tier must be >= 1");
    std::vector<SyntheticTask> tasks;
    tasks.reserve(static_cast<std::size_t>(per_tier) * 4);
    for (int tier = 1; tier <= 4; ++tier) {
        const auto it = params.find(tier);
        if (it == params.end()) {
            throw Error(ErrorCode::Validation, "gen_tasks: no params for tier " + std::to_string(tier));
        }
        const auto [branching, length] = it->second;
        for (int k = 0; k < per_tier; ++k) {
            SyntheticTask task;
            task.id = "tier" + std::to_string(tier) + "-task" + std::to_string(k);
            task.tier = tier;
            task.branching = branching;
            task.length = length;
            auto rng = seeded_rng(fnv1a(std::to_string(seed) + "|gen|" + task.id));
            for (int s = 0; s < length; ++s) task.solution_path.push_back(draw_below(rng, branching));
            tasks.push_back(std::move(task));
        }
    }
    return tasks;
}

long long run_guided(const SyntheticEnvironment& env, const SyntheticTask& task, int trial_index) {
    auto rng = seeded_rng(trial_seed(env.rng_seed, task.id, Method::Guided, trial_index));
    long long cost = 0;
    for (int step = 0; step < task.length; ++step) {
        cost += 1; // the instantiate+assess round for this step
        if (draw_unit(rng) < env.guided_hint_quality) continue;
        if (task.branching > 1) {
            cost += 1 + draw_below(rng, task.branching - 1); // assess+revise rounds
        }
    }
    return cost;
}

std::optional<long long> run_best_of_n(const SyntheticEnvironment& env, const SyntheticTask& task,
                                       long long max_trajectories, int trial_index) {
    if (max_trajectories < 1) {
        throw Error(ErrorCode::Validation, "run_best_of_n: max_trajectories must be >= 1");
    }
    auto rng = seeded_rng(trial_seed(env.rng_seed, task.id, Method::BestOfN, trial_index));
    const auto& solution = task.solution_path;
    for (long long sample = 1; sample <= max_trajectories; ++sample) {
        bool match = true;
        for (int s = 0; s < task.length; ++s) {
            const int move = draw_below(rng, task.branching);
            match = match && move == solution[static_cast<std::size_t>(s)];
        }
        if (match) return sample;
    }
    return std::nullopt;
}

namespace {

template <bool Audit>
std::optional<long long> mcts_core(const SyntheticEnvironment& env, const SyntheticTask& task,
                                   const MctsConfig& cfg, int trial_index, bool* consistent) {
    if (!(cfg.exploration_constant > 0)) {
        throw Error(ErrorCode::Validation, "run_mcts: exploration_constant must be > 0");
    }
    if (cfg.max_iterations < 1) {
        throw Error(ErrorCode::Validation, "run_mcts: max_iterations must be >= 1");
    }
    auto rng = seeded_rng(trial_seed(env.rng_seed, task.id, Method::Mcts, trial_index));
    const std::size_t reserve =
        static_cast<std::size_t>(std::min<std::uint64_t>(cfg.max_iterations + 1, 4u << 20));
    McTree tree(task.branching, reserve);

    std::vector<std::int32_t> path_nodes;
    std::vector<int> path_moves;
    for (std::uint64_t it = 1; it <= cfg.max_iterations; ++it) {
        path_nodes.assign(1, 0);
        path_moves.clear();
        std::int32_t cur = 0;
        int depth = 0;

        // Selection: descend through fully expanded nodes; expand the lowest
        // unvisited move of the first node that has one.
        while (depth < task.length) {
            if (tree.node(cur).visits == 0) break; // fresh node: roll out from it
            const int unexpanded = tree.first_unexpanded(cur);
            if (unexpanded >= 0) {
                cur = tree.add_child(cur, unexpanded);
                path_nodes.push_back(cur);
                path_moves.push_back(unexpanded);
                ++depth;
                break;
            }
            const float k = static_cast<float>(cfg.exploration_constant) *
                            std::sqrt(std::log(static_cast<float>(tree.node(cur).visits)));
            int best_move = 0;
            float best_score = -1.0f;
            for (int m = 0; m < task.branching; ++m) {
                const std::int32_t c = tree.child(cur, m);
                const auto& cn = tree.node(c);
                const float score = cn.mean + k * cn.inv_sqrt_visits;
                if (score > best_score) {
                    best_score = score;
                    best_move = m;
                }
            }
            cur = tree.child(cur, best_move);
            path_nodes.push_back(cur);
            path_moves.push_back(best_move);
            ++depth;
        }

        // Rollout: uniform random completion to terminal depth. Reward 1 only
        // when tree path plus rollout reproduces the whole solution.
        bool match = true;
        for (std::size_t s = 0; s < path_moves.size() && match; ++s) {
            match = path_moves[s] == task.solution_path[s];
        }
        for (int d = depth; d < task.length; ++d) {
            const int move = draw_below(rng, task.branching);
            match = match && move == task.solution_path[static_cast<std::size_t>(d)];
        }
        const float reward = match ? 1.0f : 0.0f;

        for (const auto n : path_nodes) {
            auto& nd = tree.node(n);
            nd.visits += 1;
            nd.value += reward;
            nd.mean = nd.value / static_cast<float>(nd.visits);
            nd.inv_sqrt_visits = 1.0f / std::sqrt(static_cast<float>(nd.visits));
        }

        if constexpr (Audit) {
            if (!tree.visit_counts_consistent()) *consistent = false;
        }
        if (best_visit_path_is(tree, task)) return static_cast<long long>(it);
    }
    return std::nullopt;
}

} // namespace

std::optional<long long> run_mcts(const SyntheticEnvironment& env, const SyntheticTask& task,
                                  const MctsConfig& cfg, int trial_index) {
    return mcts_core<false>(env, task, cfg, trial_index, nullptr);
}

MctsAudit run_mcts_audited(const SyntheticEnvironment& env, const SyntheticTask& task,
                           const MctsConfig& cfg, int trial_index) {
    MctsAudit audit;
    bool consistent = true;
    audit.cost = mcts_core<true>(env, task, cfg, trial_index, &consistent);
    audit.visit_counts_consistent = consistent;
    return audit;
}

std::vector<StrategyReport> compare(const SyntheticEnvironment& env,
                                    const std::vector<SyntheticTask>& tasks,
                                    const CompareConfig& cfg) {
    bool tier_seen[5] = {false, false, false, false, false};
    for (const auto& t : tasks) {
        if (t.tier >= 1 && t.tier <= 4) tier_seen[t.tier] = true;
    }
    if (!(tier_seen[1] && tier_seen[2] && tier_seen[3] && tier_seen[4])) {
        throw Error(ErrorCode::Validation, "compare: tasks must cover all 4 tiers");
    }

    // Trials are independent with per-trial generators, so they can run on a
    // small worker pool; results land in preallocated slots and aggregation
    // stays sequential, keeping the report a pure function of (seed, config).
    struct Job {
        const SyntheticTask* task;
        Method method;
        int trial;
        std::optional<long long> cost;
    };
    std::vector<Job> jobs;
    const Method methods[] = {Method::Guided, Method::BestOfN, Method::Mcts};
    // Queue the heaviest work first so the pool drains evenly.
    for (auto it = tasks.rbegin(); it != tasks.rend(); ++it) {
        for (int trial = 0; trial < cfg.trials_per_task; ++trial) {
            jobs.push_back({&*it, Method::Mcts, trial, std::nullopt});
            jobs.push_back({&*it, Method::BestOfN, trial, std::nullopt});
            jobs.push_back({&*it, Method::Guided, trial, std::nullopt});
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            Job& job = jobs[i];
            switch (job.method) {
                case Method::Guided: job.cost = run_guided(env, *job.task, job.trial); break;
                case Method::BestOfN:
                    job.cost = run_best_of_n(env, *job.task, cfg.best_of_n_cap, job.trial);
                    break;
                case Method::Mcts: job.cost = run_mcts(env, *job.task, cfg.mcts, job.trial); break;
            }
        }
    };
    const std::size_t n_workers =
        std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(),
                                                       jobs.size()));
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    struct Bucket {
        long long solved = 0;
        long long trials = 0;
        double cost_sum = 0.0;
    };
    std::map<std::pair<Method, int>, Bucket> buckets;
    for (const Job& job : jobs) {
        auto& b = buckets[{job.method, job.task->tier}];
        b.trials += 1;
        if (job.cost) {
            b.solved += 1;
            b.cost_sum += static_cast<double>(*job.cost);
        }
    }

    std::vector<StrategyReport> reports;
    for (const Method m : methods) {
        for (int tier = 1; tier <= 4; ++tier) {
            const auto it = buckets.find({m, tier});
            if (it == buckets.end()) continue;
            const Bucket& b = it->second;
            StrategyReport r;
            r.method = m;
            r.tier = tier;
            r.trials = static_cast<int>(b.trials);
            r.solve_rate = b.trials ? static_cast<double>(b.solved) / b.trials : 0.0;
            r.mean_cost = b.solved ? b.cost_sum / static_cast<double>(b.solved) : 0.0;
            reports.push_back(r);
        }
    }
    return reports;
}

std::vector<ScalingRow> scaling_report(const std::vector<InterplayTranscript>& transcripts) {
    std::map<int, ScalingRow> rows;
    for (const auto& t : transcripts) {
        if (!t.difficulty_tier) {
            log_warn("scaling_report: transcript '" + t.problem_id + "' has no difficulty tier");
            continue;
        }
        auto& row = rows[*t.difficulty_tier];
        row.tier = *t.difficulty_tier;
        row.mean_rounds += t.rounds_used;
        row.mean_templates += t.templates_retrieved;
        row.count += 1;
    }
    std::vector<ScalingRow> out;
    for (auto& [tier, row] : rows) {
        (void)tier;
        row.mean_rounds /= row.count;
        row.mean_templates /= row.count;
        out.push_back(row);
    }
    return out;
}

std::string tradeoff_csv(const std::vector<StrategyReport>& reports) {
    std::string out = "method,tier,mean_cost,solve_rate,trials\n";
    for (const auto& r : reports) {
        out += to_string(r.method) + "," + std::to_string(r.tier) + "," +
               format_fixed(r.mean_cost, 4) + "," + format_fixed(r.solve_rate, 4) + "," +
               std::to_string(r.trials) + "\n";
    }
    return out;
}

std::string scaling_csv(const std::vector<ScalingRow>& rows) {
    std::string out = "tier,mean_rounds,mean_templates\n";
    for (const auto& r : rows) {
        out += std::to_string(r.tier) + "," + format_fixed(r.mean_rounds, 4) + "," +
               format_fixed(r.mean_templates, 4) + "\n";
    }
    return out;
}

} // namespace rf
