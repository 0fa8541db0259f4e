#pragma once

#include "reasonflux/llm_gateway.hpp"
#include "reasonflux/navigator.hpp"
#include "reasonflux/template_store.hpp"

#include <string>
#include <vector>

namespace rf::testsupport {

// Reply formatting for scripted navigators.
std::string abstraction_reply(const std::vector<std::string>& concepts,
                              const std::vector<std::string>& relations);
std::string trajectory_reply(const std::vector<TrajectoryStep>& steps);
std::string assessment_reply(Verdict verdict, const std::string& critique);
std::string answer_block_reply(const std::string& answer);

/// Scripts the exact request sequence a solve() session issues, mirroring
/// the interplay loop's state machine. Drive it in event order: abstraction,
/// plan, then one round_* call per instantiate+assess exchange. The builder
/// tracks the same counters solve() reports, so tests can assert against
/// the values it predicts.
class SolveScriptBuilder {
public:
    SolveScriptBuilder(Problem problem, const TemplateIndex& index, NavigatorConfig cfg,
                       MockScript& nav_script, MockScript& inf_script);

    void abstraction(const std::vector<std::string>& concepts,
                     const std::vector<std::string>& relations);
    void plan(const std::vector<TrajectoryStep>& steps);

    /// One accepted instantiate+assess round for the current step.
    void round_accept(const std::string& reasoning);
    /// A rejected round: the step is re-planned in place.
    void round_revise(const std::string& reasoning, const std::string& critique,
                      const TrajectoryStep& replacement);
    /// A rejected round: the trajectory is re-planned from this step onward.
    void round_replan(const std::string& reasoning, const std::string& critique,
                      const std::vector<TrajectoryStep>& new_suffix);

    int expected_rounds() const { return rounds_; }
    int expected_templates_retrieved() const { return templates_retrieved_; }
    const ThoughtTrajectory& trajectory() const { return traj_; }
    const Problem& problem() const { return problem_; }
    int current_step() const { return current_; }

private:
    Template retrieve(const TrajectoryStep& step);
    InstantiatedStep script_instantiation(const std::string& reasoning);
    void script_assessment(const InstantiatedStep& s_hat, Verdict verdict,
                           const std::string& critique);

    Problem problem_;
    const TemplateIndex& index_;
    NavigatorConfig cfg_;
    MockScript& nav_;
    MockScript& inf_;
    ProblemAbstraction abstraction_;
    ThoughtTrajectory traj_;
    std::vector<Template> step_templates_;
    std::vector<InstantiatedStep> accepted_;
    int current_ = 1;
    int rounds_ = 0;
    int templates_retrieved_ = 0;
};

/// Script one abstract exchange and return the abstraction solve/pair
/// sampling would derive.
ProblemAbstraction script_abstraction(MockScript& nav, const Problem& problem,
                                      const std::vector<std::string>& concepts,
                                      const std::vector<std::string>& relations);

/// Script one plan exchange at (temperature, seed) and return its trajectory.
ThoughtTrajectory script_plan(MockScript& nav, const ProblemAbstraction& a,
                              const NavigatorConfig& cfg, double temperature,
                              std::optional<long long> seed,
                              const std::vector<TrajectoryStep>& steps);

/// Script the per-member instantiation chain trajectory_reward runs; one
/// reply per trajectory step, the last carrying `ANSWER: <answer>`.
void script_member_run(MockScript& inf, const Problem& member, const ThoughtTrajectory& traj,
                       const TemplateIndex& index, const std::string& answer);

/// Build a TrajectoryStep without ceremony.
TrajectoryStep step(int index, const std::string& goal, const std::string& template_name,
                    std::vector<std::string> tags = {});

/// The five-template seed library shipped with the repo, loaded once.
const TemplateIndex& seed_index();

/// Absolute path to the repo root (tests run from anywhere).
std::string repo_root();

// Brute-force retrieval reference, independent of the index path: no
// postings, straight loops, its own tokenizer. Used wherever search results
// are checked against first principles.
namespace oracle {

std::vector<SearchHit> search(const TemplateLibrary& lib, const SearchQuery& q, std::size_t k);

/// Random library over a fixed word pool; ids kept unique; m in [1, max_templates].
TemplateLibrary random_library(std::uint64_t& state, int max_templates);

/// Random query: exact names, partial names, and tag-only modes.
SearchQuery random_query(std::uint64_t& state, const TemplateLibrary& lib);

} // namespace oracle

} // namespace rf::testsupport
