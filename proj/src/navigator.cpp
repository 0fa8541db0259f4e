#include "reasonflux/navigator.hpp"

#include "reasonflux/errors.hpp"
#include "reasonflux/logging.hpp"
#include "reasonflux/textutil.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using nlohmann::json;

namespace rf {

namespace {

constexpr int kNavMaxTokens = 1024;
constexpr int kInfMaxTokens = 2048;

const char* const kNavSystem =
    "You are a reasoning navigator. You plan with thought templates and reply "
    "with exactly one fenced block as instructed.";
const char* const kInfSystem = "You are a careful step-by-step problem solver.";

const PromptTemplate kAbstractPrompt{
    "abstract",
    "Analyze the problem and extract its core concepts and the relations "
    "between them.\n\nProblem:\n{problem}\n\nReply with one fenced block tagged "
    "`abstraction` containing JSON {\"concepts\": [...], \"relations\": [...]}.\n"};

const PromptTemplate kPlanPrompt{
    "plan",
    "Plan a thought-template trajectory from this analysis.\n\nConcepts:\n{concepts}\n\n"
    "Relations:\n{relations}\n\nAnalysis:\n{analysis}\n\nPlan at most {max_steps} high-level "
    "steps; each step names a thought template to retrieve by name and tags.\nReply with one "
    "fenced block tagged `trajectory` containing JSON {\"steps\": [{\"goal\": ..., "
    "\"template_name\": ..., \"template_tags\": [...]}]}.\n"};

const PromptTemplate kInstantiatePrompt{
    "instantiate",
    "Problem:\n{problem}\n\nStep {index}: {goal}\n\nTemplate:\n{template}\n\nContext from "
    "completed steps:\n{context}\n\nCarry out this step in full detail, applying the template "
    "to the problem. If this completes the solution, end with a line `ANSWER: <final answer>`.\n"};

const PromptTemplate kAssessPrompt{
    "assess",
    "Trajectory:\n{trajectory}\n\nStep {index} goal: {goal}\n\nInstantiated reasoning:\n"
    "{reasoning}\n\nAssess whether this step is correct and keeps the trajectory on track. "
    "Reply with one fenced block tagged `assessment` containing JSON {\"verdict\": "
    "\"accept\"|\"revise_step\"|\"replan_suffix\", \"critique\": ...}.\n"};

const PromptTemplate kDirectPrompt{
    "direct",
    "Solve the problem directly. End with a line `ANSWER: <final answer>`.\n\nProblem:\n"
    "{problem}\n"};

const PromptTemplate kExtractPrompt{
    "extract",
    "Summarize this worked solution into one reusable thought template.\n\nProblem:\n{problem}\n\n"
    "Solution:\n{solution}\n\nReply with one fenced block tagged `template` containing JSON with "
    "keys exactly name, kind, tags, description, scope, application_steps, examples; kind is one "
    "of problem_solving_method, secondary_conclusion, property_theorem, knowledge_application, "
    "formula_rule; examples entries have keys problem, solution_steps, answer.\n"};

const PromptTemplate kRefinePrompt{
    "refine",
    "Current trajectory:\n{trajectory}\n\nStep {index} was assessed `{verdict}` with "
    "critique:\n{critique}\n\nEmit the full updated trajectory. Steps before {index} must be "
    "kept unchanged.\nReply with one fenced block tagged `trajectory` containing JSON "
    "{\"steps\": [{\"goal\": ..., \"template_name\": ..., \"template_tags\": [...]}]}.\n"};

std::string joined_lines(const std::vector<std::string>& items) {
    if (items.empty()) return "(none)";
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += "\n";
        out += "- " + items[i];
    }
    return out;
}

std::string require_string_field(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_string()) {
        throw Error(ErrorCode::Parse, where + ": field '" + key + "' missing or not a string");
    }
    return j.at(key).get<std::string>();
}

std::vector<std::string> string_array_field(const json& j, const char* key,
                                            const std::string& where, bool required) {
    if (!j.contains(key)) {
        if (required) {
            throw Error(ErrorCode::Parse, where + ": field '" + key + "' missing");
        }
        return {};
    }
    if (!j.at(key).is_array()) {
        throw Error(ErrorCode::Parse, where + ": field '" + key + "' is not an array");
    }
    std::vector<std::string> out;
    for (const auto& v : j.at(key)) {
        if (!v.is_string()) {
            throw Error(ErrorCode::Parse, where + ": field '" + key + "' has a non-string entry");
        }
        out.push_back(v.get<std::string>());
    }
    return out;
}

json parse_block_json(const std::string& body, const std::string& where) {
    try {
        return json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, where + ": block is not valid JSON: " + e.what());
    }
}

/// Runs a structured request/parse exchange with bounded re-asks on parse
/// failures. Returns the parsed value and the final raw reply.
std::pair<ParsedReply, std::string> structured_exchange(const BackendSpec& backend,
                                                        GenerationRequest request, ReplyKind kind,
                                                        const NavigatorConfig& cfg) {
    std::string last_error;
    for (int attempt = 0; attempt <= cfg.max_parse_retries; ++attempt) {
        const GenerationResult reply = generate(backend, request);
        try {
            ParsedReply parsed = parse_structured_reply(reply.text, kind);
            if (attempt > 0) {
                log_warn("structured reply for '" + to_string(kind) + "' needed " +
                         std::to_string(attempt) + " retr" + (attempt == 1 ? "y" : "ies"));
            }
            return {std::move(parsed), reply.text};
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Parse) throw;
            last_error = e.what();
            request = build_retry_request(request, reply.text, last_error, kind);
        }
    }
    throw Error(ErrorCode::Parse, "unparseable " + to_string(kind) + " reply after " +
                                      std::to_string(cfg.max_parse_retries) +
                                      " retries: " + last_error);
}

std::vector<TrajectoryStep> steps_with_indices(std::vector<TrajectoryStep> steps) {
    for (std::size_t i = 0; i < steps.size(); ++i) steps[i].index = static_cast<int>(i) + 1;
    return steps;
}

json trajectory_to_json(const ThoughtTrajectory& traj) {
    json steps = json::array();
    for (const auto& s : traj.steps) {
        steps.push_back(json{{"index", s.index},
                             {"goal", s.goal},
                             {"template_name", s.template_name},
                             {"template_tags", s.template_tags}});
    }
    return json{{"version", traj.version}, {"steps", steps}};
}

ThoughtTrajectory trajectory_from_json(const json& j) {
    ThoughtTrajectory traj;
    traj.version = j.at("version").get<int>();
    for (const auto& sj : j.at("steps")) {
        TrajectoryStep s;
        s.index = sj.at("index").get<int>();
        s.goal = sj.at("goal").get<std::string>();
        s.template_name = sj.at("template_name").get<std::string>();
        for (const auto& t : sj.at("template_tags")) s.template_tags.push_back(t.get<std::string>());
        traj.steps.push_back(std::move(s));
    }
    return traj;
}

} // namespace

SearchQuery TrajectoryStep::query() const {
    SearchQuery q;
    if (!trim(template_name).empty()) q.name = template_name;
    q.tags = template_tags;
    return q;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Accept: return "accept";
        case Verdict::ReviseStep: return "revise_step";
        case Verdict::ReplanSuffix: return "replan_suffix";
    }
    return "accept";
}

std::optional<Verdict> verdict_from_string(const std::string& s) {
    if (s == "accept") return Verdict::Accept;
    if (s == "revise_step") return Verdict::ReviseStep;
    if (s == "replan_suffix") return Verdict::ReplanSuffix;
    return std::nullopt;
}

std::string to_string(TerminatedBy t) {
    switch (t) {
        case TerminatedBy::Completed: return "completed";
        case TerminatedBy::MaxRounds: return "max_rounds";
        case TerminatedBy::Error: return "error";
    }
    return "error";
}

std::string to_string(ReplyKind k) {
    switch (k) {
        case ReplyKind::Abstraction: return "abstraction";
        case ReplyKind::Trajectory: return "trajectory";
        case ReplyKind::Assessment: return "assessment";
        case ReplyKind::Answer: return "answer";
    }
    return "abstraction";
}

std::vector<FencedBlock> extract_fenced_blocks(const std::string& raw) {
    std::vector<FencedBlock> blocks;
    std::istringstream in(raw);
    std::string line;
    bool inside = false;
    FencedBlock cur;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!inside) {
            if (line.rfind("```", 0) == 0 && line.size() > 3) {
                cur.tag = trim(line.substr(3));
                cur.body.clear();
                inside = true;
            }
        } else {
            if (trim(line) == "```") {
                blocks.push_back(cur);
                inside = false;
            } else {
                cur.body += line;
                cur.body += "\n";
            }
        }
    }
    return blocks;
}

ParsedReply parse_structured_reply(const std::string& raw, ReplyKind expected) {
    const auto blocks = extract_fenced_blocks(raw);
    if (blocks.empty()) {
        throw Error(ErrorCode::Parse, "no structured block in reply");
    }
    if (blocks.size() > 1) {
        log_warn("reply contains " + std::to_string(blocks.size()) +
                 " fenced blocks; using the first");
    }
    const FencedBlock& block = blocks.front();
    const std::string want = to_string(expected);
    if (block.tag != want) {
        throw Error(ErrorCode::Parse,
                    "expected a '" + want + "' block, found '" + block.tag + "'");
    }
    const json j = parse_block_json(block.body, want + " block");

    switch (expected) {
        case ReplyKind::Abstraction: {
            ProblemAbstraction a;
            a.concepts = string_array_field(j, "concepts", "abstraction block", true);
            a.relations = string_array_field(j, "relations", "abstraction block", true);
            return a;
        }
        case ReplyKind::Trajectory: {
            if (!j.contains("steps") || !j.at("steps").is_array()) {
                throw Error(ErrorCode::Parse, "trajectory block: field 'steps' missing");
            }
            std::vector<TrajectoryStep> steps;
            int idx = 1;
            for (const auto& sj : j.at("steps")) {
                TrajectoryStep s;
                s.index = idx++;
                s.goal = trim(require_string_field(sj, "goal", "trajectory step"));
                if (s.goal.empty()) {
                    throw Error(ErrorCode::Parse, "trajectory step: empty goal");
                }
                if (sj.contains("template_name") && sj.at("template_name").is_string()) {
                    s.template_name = sj.at("template_name").get<std::string>();
                }
                s.template_tags = string_array_field(sj, "template_tags", "trajectory step", false);
                if (trim(s.template_name).empty() && s.template_tags.empty()) {
                    throw Error(ErrorCode::Parse,
                                "trajectory step: needs template_name or template_tags");
                }
                steps.push_back(std::move(s));
            }
            return steps;
        }
        case ReplyKind::Assessment: {
            AssessmentPayload a;
            const std::string v = require_string_field(j, "verdict", "assessment block");
            auto verdict = verdict_from_string(v);
            if (!verdict) {
                throw Error(ErrorCode::Parse, "assessment block: unknown verdict '" + v + "'");
            }
            a.verdict = *verdict;
            a.critique = j.contains("critique") && j.at("critique").is_string()
                             ? j.at("critique").get<std::string>()
                             : std::string();
            if (a.verdict != Verdict::Accept && trim(a.critique).empty()) {
                throw Error(ErrorCode::Parse,
                            "assessment block: verdict '" + v + "' requires a critique");
            }
            return a;
        }
        case ReplyKind::Answer: {
            return require_string_field(j, "answer", "answer block");
        }
    }
    throw Error(ErrorCode::Parse, "unreachable reply kind");
}

std::string template_prompt_text(const Template& t) {
    if (t.id == kNoMatchTemplateId) {
        return "(no matching template was found in the library; reason carefully from first "
               "principles)";
    }
    std::string out = "Name: " + t.name + "\n";
    out += "Description: " + t.description + "\n";
    out += "Scope: " + t.scope + "\n";
    out += "Application steps:\n";
    for (std::size_t i = 0; i < t.application_steps.size(); ++i) {
        out += std::to_string(i + 1) + ". " + t.application_steps[i] + "\n";
    }
    return out;
}

std::string trajectory_prompt_text(const ThoughtTrajectory& traj) {
    std::string out;
    for (const auto& s : traj.steps) {
        out += std::to_string(s.index) + ". " + s.goal + " [template: " + s.template_name;
        if (!s.template_tags.empty()) {
            out += "; tags: ";
            for (std::size_t i = 0; i < s.template_tags.size(); ++i) {
                if (i) out += ", ";
                out += s.template_tags[i];
            }
        }
        out += "]\n";
    }
    return out;
}

std::string context_prompt_text(const std::vector<InstantiatedStep>& accepted) {
    if (accepted.empty()) return "(none)";
    std::string out;
    for (const auto& s : accepted) {
        out += "Step " + std::to_string(s.step_index) + ":\n" + s.reasoning + "\n\n";
    }
    return trim(out);
}

GenerationRequest build_abstract_request(const Problem& x) {
    GenerationRequest r;
    r.messages = {{Role::System, kNavSystem},
                  {Role::User, render_prompt(kAbstractPrompt, {{"problem", x.statement}})}};
    r.temperature = kTempPlanning;
    r.max_tokens = kNavMaxTokens;
    return r;
}

GenerationRequest build_plan_request(const ProblemAbstraction& a, const NavigatorConfig& cfg,
                                     double temperature, std::optional<long long> seed) {
    GenerationRequest r;
    r.messages = {{Role::System, kNavSystem},
                  {Role::User, render_prompt(kPlanPrompt,
                                             {{"concepts", joined_lines(a.concepts)},
                                              {"relations", joined_lines(a.relations)},
                                              {"analysis", a.raw.empty() ? "(none)" : a.raw},
                                              {"max_steps", std::to_string(cfg.max_steps)}})}};
    r.temperature = temperature;
    r.max_tokens = kNavMaxTokens;
    r.seed = seed;
    return r;
}

GenerationRequest build_direct_request(const Problem& x) {
    GenerationRequest r;
    r.messages = {{Role::System, kInfSystem},
                  {Role::User, render_prompt(kDirectPrompt, {{"problem", x.statement}})}};
    r.temperature = kTempInstantiate;
    r.max_tokens = kInfMaxTokens;
    return r;
}

GenerationRequest build_extract_request(const std::string& problem, const std::string& solution) {
    GenerationRequest r;
    r.messages = {{Role::System, kNavSystem},
                  {Role::User, render_prompt(kExtractPrompt,
                                             {{"problem", problem}, {"solution", solution}})}};
    r.temperature = kTempPlanning;
    r.max_tokens = kInfMaxTokens;
    return r;
}

GenerationRequest build_instantiate_request(const Problem& x, const TrajectoryStep& s,
                                            const Template& t,
                                            const std::vector<InstantiatedStep>& context) {
    GenerationRequest r;
    r.messages = {{Role::System, kInfSystem},
                  {Role::User, render_prompt(kInstantiatePrompt,
                                             {{"problem", x.statement},
                                              {"index", std::to_string(s.index)},
                                              {"goal", s.goal},
                                              {"template", template_prompt_text(t)},
                                              {"context", context_prompt_text(context)}})}};
    r.temperature = kTempInstantiate;
    r.max_tokens = kInfMaxTokens;
    return r;
}

GenerationRequest build_assess_request(const ThoughtTrajectory& traj,
                                       const InstantiatedStep& s_hat) {
    const TrajectoryStep& step = traj.steps.at(static_cast<std::size_t>(s_hat.step_index - 1));
    GenerationRequest r;
    r.messages = {{Role::System, kNavSystem},
                  {Role::User, render_prompt(kAssessPrompt,
                                             {{"trajectory", trajectory_prompt_text(traj)},
                                              {"index", std::to_string(s_hat.step_index)},
                                              {"goal", step.goal},
                                              {"reasoning", s_hat.reasoning}})}};
    r.temperature = kTempPlanning;
    r.max_tokens = kNavMaxTokens;
    return r;
}

GenerationRequest build_refine_request(const ThoughtTrajectory& traj, const StepAssessment& a) {
    GenerationRequest r;
    r.messages = {{Role::System, kNavSystem},
                  {Role::User, render_prompt(kRefinePrompt,
                                             {{"trajectory", trajectory_prompt_text(traj)},
                                              {"index", std::to_string(a.step_index)},
                                              {"verdict", to_string(a.verdict)},
                                              {"critique", a.critique}})}};
    r.temperature = kTempPlanning;
    r.max_tokens = kNavMaxTokens;
    return r;
}

GenerationRequest build_retry_request(const GenerationRequest& prev, const std::string& prev_reply,
                                      const std::string& parse_error, ReplyKind expected) {
    GenerationRequest r = prev;
    r.messages.push_back({Role::Assistant, prev_reply});
    r.messages.push_back({Role::User, "Your previous reply could not be parsed: " + parse_error +
                                          ". Reply again with exactly one fenced `" +
                                          to_string(expected) + "` block."});
    return r;
}

std::optional<std::string> extract_answer_line(const std::string& reasoning) {
    std::istringstream in(reasoning);
    std::string line;
    std::optional<std::string> answer;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.rfind("ANSWER:", 0) == 0) {
            answer = trim(t.substr(7));
        }
    }
    return answer;
}

ProblemAbstraction abstract_problem(const Problem& x, const BackendSpec& nav_backend,
                                    const NavigatorConfig& cfg) {
    if (trim(x.statement).empty()) {
        throw Error(ErrorCode::Validation, "problem statement is empty");
    }
    auto [parsed, raw] = structured_exchange(nav_backend, build_abstract_request(x),
                                             ReplyKind::Abstraction, cfg);
    ProblemAbstraction a = std::get<ProblemAbstraction>(std::move(parsed));
    a.raw = raw;
    if (trim(a.raw).empty()) throw Error(ErrorCode::Parse, "empty abstraction reply");
    return a;
}

ThoughtTrajectory plan_trajectory(const ProblemAbstraction& a, const BackendSpec& nav_backend,
                                  const NavigatorConfig& cfg, double temperature,
                                  std::optional<long long> seed) {
    auto [parsed, raw] = structured_exchange(
        nav_backend, build_plan_request(a, cfg, temperature, seed), ReplyKind::Trajectory, cfg);
    auto steps = std::get<std::vector<TrajectoryStep>>(std::move(parsed));
    if (steps.empty()) throw Error(ErrorCode::Validation, "empty trajectory");
    if (static_cast<int>(steps.size()) > cfg.max_steps) {
        log_warn("planned trajectory has " + std::to_string(steps.size()) +
                 " steps; truncating to max_steps=" + std::to_string(cfg.max_steps));
        steps.resize(static_cast<std::size_t>(cfg.max_steps));
    }
    ThoughtTrajectory traj;
    traj.steps = steps_with_indices(std::move(steps));
    traj.version = 0;
    return traj;
}

InstantiatedStep instantiate_step(const Problem& x, const TrajectoryStep& s, const Template& t,
                                  const std::vector<InstantiatedStep>& context,
                                  const BackendSpec& inf_backend) {
    const GenerationResult reply = generate(inf_backend, build_instantiate_request(x, s, t, context));
    InstantiatedStep out;
    out.step_index = s.index;
    out.template_id = t.id;
    out.reasoning = trim(reply.text);
    out.context_digest = to_hex(fnv1a(context_prompt_text(context)));
    if (out.reasoning.empty()) {
        throw Error(ErrorCode::Backend, "empty instantiation reply for step " +
                                            std::to_string(s.index));
    }
    return out;
}

StepAssessment assess_step(const ThoughtTrajectory& traj, const InstantiatedStep& s_hat,
                           const BackendSpec& nav_backend, const NavigatorConfig& cfg) {
    if (s_hat.step_index < 1 || s_hat.step_index > traj.size()) {
        throw Error(ErrorCode::Validation, "assess_step: step index outside trajectory");
    }
    StepAssessment out;
    out.step_index = s_hat.step_index;
    try {
        auto [parsed, raw] = structured_exchange(nav_backend, build_assess_request(traj, s_hat),
                                                 ReplyKind::Assessment, cfg);
        (void)raw;
        const auto payload = std::get<AssessmentPayload>(parsed);
        out.verdict = payload.verdict;
        out.critique = payload.critique;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::Parse) throw;
        log_warn(std::string("assessment unparseable after retries; accepting step ") +
                 std::to_string(s_hat.step_index) + " (" + e.what() + ")");
        out.verdict = Verdict::Accept;
        out.critique.clear();
    }
    return out;
}

ThoughtTrajectory refine_trajectory(const ThoughtTrajectory& traj, const StepAssessment& a,
                                    const BackendSpec& nav_backend, const NavigatorConfig& cfg) {
    if (a.verdict == Verdict::Accept) {
        throw Error(ErrorCode::Validation, "refine_trajectory: accepted steps are not refined");
    }
    if (a.step_index < 1 || a.step_index > traj.size()) {
        throw Error(ErrorCode::Validation, "refine_trajectory: step index outside trajectory");
    }
    auto [parsed, raw] =
        structured_exchange(nav_backend, build_refine_request(traj, a), ReplyKind::Trajectory, cfg);
    (void)raw;
    const auto replied = std::get<std::vector<TrajectoryStep>>(parsed);
    const auto idx = static_cast<std::size_t>(a.step_index);
    if (replied.size() < idx) {
        throw Error(ErrorCode::Parse, "refined trajectory has fewer steps than the refined index");
    }

    // Completed work is never rewritten: the prefix comes from the original.
    std::vector<TrajectoryStep> steps(traj.steps.begin(), traj.steps.begin() + (idx - 1));
    if (a.verdict == Verdict::ReviseStep) {
        steps.push_back(replied[idx - 1]);
        steps.insert(steps.end(), traj.steps.begin() + idx, traj.steps.end());
    } else {
        steps.insert(steps.end(), replied.begin() + (idx - 1), replied.end());
    }
    if (static_cast<int>(steps.size()) > cfg.max_steps) {
        throw Error(ErrorCode::Validation, "refined trajectory exceeds max_steps");
    }
    ThoughtTrajectory out;
    out.steps = steps_with_indices(std::move(steps));
    out.version = traj.version + 1;
    return out;
}

InterplayTranscript solve(const Problem& x, const TemplateIndex& lib_index,
                          const BackendSpec& nav_backend, const BackendSpec& inf_backend,
                          const NavigatorConfig& cfg) {
    if (lib_index.library.templates.empty()) {
        throw Error(ErrorCode::Validation, "solve: template library is empty");
    }
    InterplayTranscript tr;
    tr.problem_id = x.id;
    tr.difficulty_tier = x.difficulty_tier;

    auto retrieve_one = [&](const TrajectoryStep& s) {
        std::vector<SearchHit> hits;
        const SearchQuery q = s.query();
        if (!q.empty()) hits = search(lib_index, q, 1);
        tr.templates_retrieved += 1;
        if (hits.empty()) {
            Template marker;
            marker.id = kNoMatchTemplateId;
            marker.name = "(no matching template)";
            return marker;
        }
        return *lib_index.library.find(hits.front().template_id);
    };

    try {
        tr.abstraction = abstract_problem(x, nav_backend, cfg);
        ThoughtTrajectory traj = plan_trajectory(*tr.abstraction, nav_backend, cfg);
        tr.trajectory_versions.push_back(traj);

        std::vector<Template> step_templates;
        for (const auto& s : traj.steps) step_templates.push_back(retrieve_one(s));

        std::vector<InstantiatedStep> accepted;
        int i = 1;
        while (i <= traj.size()) {
            if (tr.rounds_used >= cfg.max_rounds) {
                tr.terminated_by = TerminatedBy::MaxRounds;
                return tr;
            }
            const TrajectoryStep& step = traj.steps[static_cast<std::size_t>(i - 1)];
            const Template& tmpl = step_templates[static_cast<std::size_t>(i - 1)];
            const InstantiatedStep s_hat =
                instantiate_step(x, step, tmpl, accepted, inf_backend);
            const StepAssessment assessment = assess_step(traj, s_hat, nav_backend, cfg);
            tr.rounds_used += 1;
            tr.instantiated.push_back(s_hat);
            tr.assessments.push_back(assessment);

            if (assessment.verdict == Verdict::Accept) {
                accepted.push_back(s_hat);
                ++i;
                continue;
            }
            traj = refine_trajectory(traj, assessment, nav_backend, cfg);
            tr.trajectory_versions.push_back(traj);
            // Re-retrieve only the steps the refinement changed; an unchanged
            // suffix keeps its previous retrievals.
            const std::vector<Template> previous = std::move(step_templates);
            step_templates.assign(previous.begin(), previous.begin() + (i - 1));
            if (assessment.verdict == Verdict::ReviseStep) {
                step_templates.push_back(retrieve_one(traj.steps[static_cast<std::size_t>(i - 1)]));
                step_templates.insert(step_templates.end(), previous.begin() + i, previous.end());
            } else {
                for (int k = i; k <= traj.size(); ++k) {
                    step_templates.push_back(retrieve_one(traj.steps[static_cast<std::size_t>(k - 1)]));
                }
            }
        }

        if (!accepted.empty()) {
            tr.final_answer = extract_answer_line(accepted.back().reasoning);
        }
        tr.terminated_by = tr.final_answer ? TerminatedBy::Completed : TerminatedBy::MaxRounds;
        return tr;
    } catch (const std::exception& e) {
        tr.terminated_by = TerminatedBy::Error;
        tr.error = e.what();
        return tr;
    }
}

std::string transcript_to_json(const InterplayTranscript& t) {
    json j;
    j["problem_id"] = t.problem_id;
    j["difficulty_tier"] = t.difficulty_tier ? json(*t.difficulty_tier) : json(nullptr);
    if (t.abstraction) {
        j["abstraction"] = json{{"concepts", t.abstraction->concepts},
                                {"relations", t.abstraction->relations},
                                {"raw", t.abstraction->raw}};
    } else {
        j["abstraction"] = nullptr;
    }
    json versions = json::array();
    for (const auto& v : t.trajectory_versions) versions.push_back(trajectory_to_json(v));
    j["trajectory_versions"] = versions;
    json inst = json::array();
    for (const auto& s : t.instantiated) {
        inst.push_back(json{{"step_index", s.step_index},
                            {"template_id", s.template_id},
                            {"reasoning", s.reasoning},
                            {"context_digest", s.context_digest}});
    }
    j["instantiated"] = inst;
    json assess = json::array();
    for (const auto& a : t.assessments) {
        assess.push_back(json{{"step_index", a.step_index},
                              {"verdict", to_string(a.verdict)},
                              {"critique", a.critique}});
    }
    j["assessments"] = assess;
    j["final_answer"] = t.final_answer ? json(*t.final_answer) : json(nullptr);
    j["rounds_used"] = t.rounds_used;
    j["templates_retrieved"] = t.templates_retrieved;
    j["terminated_by"] = to_string(t.terminated_by);
    j["error"] = t.error.empty() ? json(nullptr) : json(t.error);
    return j.dump(2) + "\n";
}

InterplayTranscript transcript_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("invalid transcript JSON: ") + e.what());
    }
    InterplayTranscript t;
    t.problem_id = j.at("problem_id").get<std::string>();
    if (j.contains("difficulty_tier") && !j.at("difficulty_tier").is_null()) {
        t.difficulty_tier = j.at("difficulty_tier").get<int>();
    }
    if (j.contains("abstraction") && !j.at("abstraction").is_null()) {
        ProblemAbstraction a;
        const auto& aj = j.at("abstraction");
        for (const auto& c : aj.at("concepts")) a.concepts.push_back(c.get<std::string>());
        for (const auto& r : aj.at("relations")) a.relations.push_back(r.get<std::string>());
        a.raw = aj.at("raw").get<std::string>();
        t.abstraction = std::move(a);
    }
    for (const auto& vj : j.at("trajectory_versions")) {
        t.trajectory_versions.push_back(trajectory_from_json(vj));
    }
    for (const auto& sj : j.at("instantiated")) {
        InstantiatedStep s;
        s.step_index = sj.at("step_index").get<int>();
        s.template_id = sj.at("template_id").get<std::string>();
        s.reasoning = sj.at("reasoning").get<std::string>();
        s.context_digest = sj.at("context_digest").get<std::string>();
        t.instantiated.push_back(std::move(s));
    }
    for (const auto& aj : j.at("assessments")) {
        StepAssessment a;
        a.step_index = aj.at("step_index").get<int>();
        a.verdict = *verdict_from_string(aj.at("verdict").get<std::string>());
        a.critique = aj.at("critique").get<std::string>();
        t.assessments.push_back(std::move(a));
    }
    if (!j.at("final_answer").is_null()) t.final_answer = j.at("final_answer").get<std::string>();
    t.rounds_used = j.at("rounds_used").get<int>();
    t.templates_retrieved = j.at("templates_retrieved").get<int>();
    const std::string tb = j.at("terminated_by").get<std::string>();
    t.terminated_by = tb == "completed"    ? TerminatedBy::Completed
                      : tb == "max_rounds" ? TerminatedBy::MaxRounds
                                           : TerminatedBy::Error;
    if (j.contains("error") && !j.at("error").is_null()) t.error = j.at("error").get<std::string>();
    return t;
}

void write_transcript(const InterplayTranscript& t, const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write transcript: " + path);
    out << transcript_to_json(t);
}

InterplayTranscript read_transcript(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read transcript: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return transcript_from_json(buf.str());
}

} // namespace rf
