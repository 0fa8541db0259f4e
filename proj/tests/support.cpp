#include "support.hpp"

#include "reasonflux/errors.hpp"
#include "reasonflux/textutil.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <set>

using nlohmann::json;

#ifndef RF_REPO_ROOT
#define RF_REPO_ROOT "."
#endif

namespace rf::testsupport {

std::string repo_root() {
    return RF_REPO_ROOT;
}

const TemplateIndex& seed_index() {
    static const TemplateIndex idx = build_index(load_library(repo_root() + "/seed_library"));
    return idx;
}

std::string abstraction_reply(const std::vector<std::string>& concepts,
                              const std::vector<std::string>& relations) {
    const json j{{"concepts", concepts}, {"relations", relations}};
    return "Analyzing the problem.\n\n```abstraction\n" + j.dump(2) + "\n```\n";
}

std::string trajectory_reply(const std::vector<TrajectoryStep>& steps) {
    json arr = json::array();
    for (const auto& s : steps) {
        arr.push_back(json{{"goal", s.goal},
                           {"template_name", s.template_name},
                           {"template_tags", s.template_tags}});
    }
    const json j{{"steps", arr}};
    return "Here is the plan.\n\n```trajectory\n" + j.dump(2) + "\n```\n";
}

std::string assessment_reply(Verdict verdict, const std::string& critique) {
    const json j{{"verdict", to_string(verdict)}, {"critique", critique}};
    return "```assessment\n" + j.dump(2) + "\n```\n";
}

std::string answer_block_reply(const std::string& answer) {
    const json j{{"answer", answer}};
    return "```answer\n" + j.dump(2) + "\n```\n";
}

TrajectoryStep step(int index, const std::string& goal, const std::string& template_name,
                    std::vector<std::string> tags) {
    TrajectoryStep s;
    s.index = index;
    s.goal = goal;
    s.template_name = template_name;
    s.template_tags = std::move(tags);
    return s;
}

SolveScriptBuilder::SolveScriptBuilder(Problem problem, const TemplateIndex& index,
                                       NavigatorConfig cfg, MockScript& nav_script,
                                       MockScript& inf_script)
    : problem_(std::move(problem)), index_(index), cfg_(cfg), nav_(nav_script), inf_(inf_script) {}

void SolveScriptBuilder::abstraction(const std::vector<std::string>& concepts,
                                     const std::vector<std::string>& relations) {
    const std::string reply = abstraction_reply(concepts, relations);
    script_reply(nav_, build_abstract_request(problem_), reply);
    abstraction_.concepts = concepts;
    abstraction_.relations = relations;
    abstraction_.raw = reply;
}

Template SolveScriptBuilder::retrieve(const TrajectoryStep& s) {
    templates_retrieved_ += 1;
    std::vector<SearchHit> hits;
    const SearchQuery q = s.query();
    if (!q.empty()) hits = search(index_, q, 1);
    if (hits.empty()) {
        Template marker;
        marker.id = kNoMatchTemplateId;
        marker.name = "(no matching template)";
        return marker;
    }
    return *index_.library.find(hits.front().template_id);
}

void SolveScriptBuilder::plan(const std::vector<TrajectoryStep>& steps) {
    script_reply(nav_, build_plan_request(abstraction_, cfg_), trajectory_reply(steps));
    traj_.steps = steps;
    for (std::size_t i = 0; i < traj_.steps.size(); ++i) {
        traj_.steps[i].index = static_cast<int>(i) + 1;
    }
    traj_.version = 0;
    for (const auto& s : traj_.steps) step_templates_.push_back(retrieve(s));
}

InstantiatedStep SolveScriptBuilder::script_instantiation(const std::string& reasoning) {
    const auto i = static_cast<std::size_t>(current_ - 1);
    const TrajectoryStep& s = traj_.steps.at(i);
    const Template& t = step_templates_.at(i);
    script_reply(inf_, build_instantiate_request(problem_, s, t, accepted_), reasoning);
    InstantiatedStep s_hat;
    s_hat.step_index = s.index;
    s_hat.template_id = t.id;
    s_hat.reasoning = trim(reasoning);
    s_hat.context_digest = to_hex(fnv1a(context_prompt_text(accepted_)));
    return s_hat;
}

void SolveScriptBuilder::script_assessment(const InstantiatedStep& s_hat, Verdict verdict,
                                           const std::string& critique) {
    script_reply(nav_, build_assess_request(traj_, s_hat), assessment_reply(verdict, critique));
    rounds_ += 1;
}

void SolveScriptBuilder::round_accept(const std::string& reasoning) {
    InstantiatedStep s_hat = script_instantiation(reasoning);
    script_assessment(s_hat, Verdict::Accept, "");
    accepted_.push_back(std::move(s_hat));
    current_ += 1;
}

void SolveScriptBuilder::round_revise(const std::string& reasoning, const std::string& critique,
                                      const TrajectoryStep& replacement) {
    const InstantiatedStep s_hat = script_instantiation(reasoning);
    script_assessment(s_hat, Verdict::ReviseStep, critique);

    StepAssessment assessment{current_, Verdict::ReviseStep, critique};
    ThoughtTrajectory refined;
    refined.steps.assign(traj_.steps.begin(), traj_.steps.begin() + (current_ - 1));
    refined.steps.push_back(replacement);
    refined.steps.insert(refined.steps.end(), traj_.steps.begin() + current_, traj_.steps.end());
    for (std::size_t i = 0; i < refined.steps.size(); ++i) {
        refined.steps[i].index = static_cast<int>(i) + 1;
    }
    refined.version = traj_.version + 1;
    script_reply(nav_, build_refine_request(traj_, assessment), trajectory_reply(refined.steps));

    traj_ = refined;
    step_templates_[static_cast<std::size_t>(current_ - 1)] =
        retrieve(traj_.steps[static_cast<std::size_t>(current_ - 1)]);
}

void SolveScriptBuilder::round_replan(const std::string& reasoning, const std::string& critique,
                                      const std::vector<TrajectoryStep>& new_suffix) {
    const InstantiatedStep s_hat = script_instantiation(reasoning);
    script_assessment(s_hat, Verdict::ReplanSuffix, critique);

    StepAssessment assessment{current_, Verdict::ReplanSuffix, critique};
    ThoughtTrajectory refined;
    refined.steps.assign(traj_.steps.begin(), traj_.steps.begin() + (current_ - 1));
    refined.steps.insert(refined.steps.end(), new_suffix.begin(), new_suffix.end());
    for (std::size_t i = 0; i < refined.steps.size(); ++i) {
        refined.steps[i].index = static_cast<int>(i) + 1;
    }
    refined.version = traj_.version + 1;
    script_reply(nav_, build_refine_request(traj_, assessment), trajectory_reply(refined.steps));

    traj_ = refined;
    step_templates_.resize(static_cast<std::size_t>(current_ - 1));
    for (int k = current_; k <= traj_.size(); ++k) {
        step_templates_.push_back(retrieve(traj_.steps[static_cast<std::size_t>(k - 1)]));
    }
}

ProblemAbstraction script_abstraction(MockScript& nav, const Problem& problem,
                                      const std::vector<std::string>& concepts,
                                      const std::vector<std::string>& relations) {
    const std::string reply = abstraction_reply(concepts, relations);
    script_reply(nav, build_abstract_request(problem), reply);
    ProblemAbstraction a;
    a.concepts = concepts;
    a.relations = relations;
    a.raw = reply;
    return a;
}

ThoughtTrajectory script_plan(MockScript& nav, const ProblemAbstraction& a,
                              const NavigatorConfig& cfg, double temperature,
                              std::optional<long long> seed,
                              const std::vector<TrajectoryStep>& steps) {
    script_reply(nav, build_plan_request(a, cfg, temperature, seed), trajectory_reply(steps));
    ThoughtTrajectory traj;
    traj.steps = steps;
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        traj.steps[i].index = static_cast<int>(i) + 1;
    }
    traj.version = 0;
    return traj;
}

namespace oracle {

namespace {

std::set<std::string> tokens_of(const std::vector<std::string>& phrases) {
    std::set<std::string> out;
    for (const auto& phrase : phrases) {
        std::string cur;
        for (std::size_t i = 0; i <= phrase.size(); ++i) {
            const char c = i < phrase.size() ? phrase[i] : ' ';
            if (std::isalnum(static_cast<unsigned char>(c))) {
                cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            } else {
                if (cur.size() >= 2) out.insert(cur);
                cur.clear();
            }
        }
    }
    return out;
}

double jaccard_of(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

std::uint64_t next64(std::uint64_t& state) {
    // splitmix64; self-contained so the oracle owes nothing to the library.
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

const std::vector<std::string> kWords = {
    "substitution", "trigonometric", "inequality",  "extremum", "distance", "parity",
    "symmetry",     "mean",          "geometric",   "interval", "absolute", "value",
    "formula",      "theorem",       "application", "radical",  "circle",   "optimization"};

} // namespace

std::vector<SearchHit> search(const TemplateLibrary& lib, const SearchQuery& q, std::size_t k) {
    const auto q_tags = tokens_of(q.tags);
    const auto q_name = q.name ? tokens_of({*q.name}) : std::set<std::string>{};
    std::vector<SearchHit> hits;
    for (const auto& t : lib.templates) {
        if (q.name && slugify(*q.name) == slugify(t.name)) {
            hits.push_back({t.id, kExactNameScore, MatchKind::ExactName});
            continue;
        }
        const double score = 2.0 * jaccard_of(q_tags, tokens_of(t.tags)) +
                             1.0 * jaccard_of(q_name, tokens_of({t.name}));
        if (score > 0) hits.push_back({t.id, score, MatchKind::Lexical});
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.template_id < b.template_id;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

TemplateLibrary random_library(std::uint64_t& state, int max_templates) {
    TemplateLibrary lib;
    const int m = 1 + static_cast<int>(next64(state) % static_cast<std::uint64_t>(max_templates));
    for (int i = 0; i < m; ++i) {
        Template t;
        for (std::uint64_t w = 0, n = 2 + next64(state) % 3; w < n; ++w) {
            if (w) t.name += " ";
            t.name += kWords[next64(state) % kWords.size()];
        }
        t.name += " " + std::to_string(i); // ids stay unique
        t.id = slugify(t.name);
        t.kind = TemplateKind::ProblemSolvingMethod;
        for (std::uint64_t w = 0, n = 1 + next64(state) % 3; w < n; ++w) {
            t.tags.push_back(kWords[next64(state) % kWords.size()] + " " +
                             kWords[next64(state) % kWords.size()]);
        }
        t.description = "desc";
        t.scope = "scope";
        t.application_steps = {"step"};
        lib.templates.push_back(std::move(t));
    }
    return lib;
}

SearchQuery random_query(std::uint64_t& state, const TemplateLibrary& lib) {
    SearchQuery q;
    const auto mode = next64(state) % 4;
    if (mode == 0) {
        q.name = lib.templates[next64(state) % lib.templates.size()].name;
    } else if (mode == 1) {
        q.name = kWords[next64(state) % kWords.size()] + " " +
                 kWords[next64(state) % kWords.size()];
    }
    const auto n_tags = mode >= 2 ? 1 + next64(state) % 2 : next64(state) % 2;
    for (std::uint64_t i = 0; i < n_tags; ++i) q.tags.push_back(kWords[next64(state) % kWords.size()]);
    if (q.empty()) q.tags.push_back(kWords[next64(state) % kWords.size()]);
    return q;
}

} // namespace oracle

void script_member_run(MockScript& inf, const Problem& member, const ThoughtTrajectory& traj,
                       const TemplateIndex& index, const std::string& answer) {
    std::vector<SearchQuery> queries;
    for (const auto& s : traj.steps) queries.push_back(s.query());
    const TrajectoryRetrieval retrieval = retrieve_for_trajectory(index, queries);

    std::vector<InstantiatedStep> context;
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        const bool last = i + 1 == traj.steps.size();
        std::string reasoning = "Work for step " + std::to_string(i + 1) + " on " + member.id + ".";
        if (last) reasoning += "\nANSWER: " + answer;
        script_reply(inf,
                     build_instantiate_request(member, traj.steps[i], retrieval.templates[i],
                                               context),
                     reasoning);
        InstantiatedStep s_hat;
        s_hat.step_index = traj.steps[i].index;
        s_hat.template_id = retrieval.templates[i].id;
        s_hat.reasoning = trim(reasoning);
        s_hat.context_digest = to_hex(fnv1a(context_prompt_text(context)));
        context.push_back(std::move(s_hat));
    }
}

} // namespace rf::testsupport
