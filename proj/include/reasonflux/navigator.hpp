#pragma once

#include "reasonflux/llm_gateway.hpp"
#include "reasonflux/template_store.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rf {

struct Problem {
    std::string id;
    std::string statement;
    std::optional<std::string> answer_key;
    std::vector<std::string> similar_ids;
    std::optional<int> difficulty_tier; // 1..4
};

struct ProblemAbstraction {
    std::vector<std::string> concepts;
    std::vector<std::string> relations;
    std::string raw; // full navigator reply
};

struct TrajectoryStep {
    int index = 1; // 1-based
    std::string goal;
    std::string template_name;
    std::vector<std::string> template_tags;

    SearchQuery query() const;
};

struct ThoughtTrajectory {
    std::vector<TrajectoryStep> steps;
    int version = 0; // increments on refinement

    int size() const { return static_cast<int>(steps.size()); }
};

struct InstantiatedStep {
    int step_index = 1;
    std::string template_id;
    std::string reasoning;
    std::string context_digest;
};

enum class Verdict { Accept, ReviseStep, ReplanSuffix };

std::string to_string(Verdict v);
std::optional<Verdict> verdict_from_string(const std::string& s);

struct StepAssessment {
    int step_index = 1;
    Verdict verdict = Verdict::Accept;
    std::string critique;
};

enum class TerminatedBy { Completed, MaxRounds, Error };

std::string to_string(TerminatedBy t);

/// Full record of one solve: the abstraction, every trajectory version,
/// every instantiation and assessment in order, and the outcome counters.
struct InterplayTranscript {
    std::string problem_id;
    std::optional<int> difficulty_tier;
    std::optional<ProblemAbstraction> abstraction;
    std::vector<ThoughtTrajectory> trajectory_versions;
    std::vector<InstantiatedStep> instantiated;
    std::vector<StepAssessment> assessments;
    std::optional<std::string> final_answer;
    int rounds_used = 0;
    int templates_retrieved = 0;
    TerminatedBy terminated_by = TerminatedBy::Error;
    std::string error; // set when terminated_by == Error
};

struct NavigatorConfig {
    int max_rounds = 8;
    int max_steps = 10;
    int max_parse_retries = 2;
};

// Generation temperatures per call role: planning needs diversity,
// trajectory sampling for preference pairs more so, instantiation fidelity.
inline constexpr double kTempPlanning = 0.7;
inline constexpr double kTempSampling = 1.0;
inline constexpr double kTempInstantiate = 0.2;

// ---------------------------------------------------------------------------
// Structured reply parsing
//
// Every structured navigator reply carries exactly one fenced block tagged by
// kind, containing a JSON object:
//   ```abstraction   {"concepts": [...], "relations": [...]}
//   ```trajectory    {"steps": [{"goal", "template_name", "template_tags"}]}
//   ```assessment    {"verdict": "accept|revise_step|replan_suffix", "critique"}
//   ```answer        {"answer": "..."}
// ---------------------------------------------------------------------------

enum class ReplyKind { Abstraction, Trajectory, Assessment, Answer };

std::string to_string(ReplyKind k);

struct FencedBlock {
    std::string tag;
    std::string body;
};

/// All ```tag fenced blocks in a reply, in order.
std::vector<FencedBlock> extract_fenced_blocks(const std::string& raw);

struct AssessmentPayload {
    Verdict verdict = Verdict::Accept;
    std::string critique;
};

using ParsedReply =
    std::variant<ProblemAbstraction, std::vector<TrajectoryStep>, AssessmentPayload, std::string>;

/// Parse the first fenced block of `raw` as `expected`. More than one block
/// warns and uses the first. Throws Error{Parse} on a missing block, a
/// wrong-kind block, or a schema violation.
ParsedReply parse_structured_reply(const std::string& raw, ReplyKind expected);

// ---------------------------------------------------------------------------
// Prompt construction. Public so tests and script generators can predict the
// exact requests a solve session issues.
// ---------------------------------------------------------------------------

std::string template_prompt_text(const Template& t);
std::string trajectory_prompt_text(const ThoughtTrajectory& traj);
std::string context_prompt_text(const std::vector<InstantiatedStep>& accepted);

GenerationRequest build_abstract_request(const Problem& x);
GenerationRequest build_plan_request(const ProblemAbstraction& a, const NavigatorConfig& cfg,
                                     double temperature = kTempPlanning,
                                     std::optional<long long> seed = std::nullopt);
/// Template-free single-call solving, for A/B comparison against the
/// interplay loop.
GenerationRequest build_direct_request(const Problem& x);
/// Asks a backend to distill a (problem, solution) record into one library
/// template, replied as a fenced `template` block of library-schema JSON.
GenerationRequest build_extract_request(const std::string& problem, const std::string& solution);
GenerationRequest build_instantiate_request(const Problem& x, const TrajectoryStep& s,
                                            const Template& t,
                                            const std::vector<InstantiatedStep>& context);
GenerationRequest build_assess_request(const ThoughtTrajectory& traj, const InstantiatedStep& s_hat);
GenerationRequest build_refine_request(const ThoughtTrajectory& traj, const StepAssessment& a);

/// Follow-up request after an unparseable reply: the failed reply and a
/// correction instruction are appended, so retries have distinct
/// fingerprints and mocks can script each attempt.
GenerationRequest build_retry_request(const GenerationRequest& prev, const std::string& prev_reply,
                                      const std::string& parse_error, ReplyKind expected);

/// Last `ANSWER:` line of a reasoning text, trimmed; nullopt when absent.
std::optional<std::string> extract_answer_line(const std::string& reasoning);

// ---------------------------------------------------------------------------
// Interplay operations
// ---------------------------------------------------------------------------

ProblemAbstraction abstract_problem(const Problem& x, const BackendSpec& nav_backend,
                                    const NavigatorConfig& cfg = {});

/// Temperature/seed default to planning values; trajectory sampling for
/// preference pairs passes kTempSampling and a per-sample seed.
ThoughtTrajectory plan_trajectory(const ProblemAbstraction& a, const BackendSpec& nav_backend,
                                  const NavigatorConfig& cfg = {},
                                  double temperature = kTempPlanning,
                                  std::optional<long long> seed = std::nullopt);

InstantiatedStep instantiate_step(const Problem& x, const TrajectoryStep& s, const Template& t,
                                  const std::vector<InstantiatedStep>& context,
                                  const BackendSpec& inf_backend);

/// Parse failure after retries degrades to Accept with a loud warning; the
/// interplay loop must not deadlock on a misbehaving navigator.
StepAssessment assess_step(const ThoughtTrajectory& traj, const InstantiatedStep& s_hat,
                           const BackendSpec& nav_backend, const NavigatorConfig& cfg = {});

/// New trajectory with version+1. Steps before the assessed index are
/// preserved verbatim; ReviseStep replaces only the assessed step,
/// ReplanSuffix may replace everything from it onward.
ThoughtTrajectory refine_trajectory(const ThoughtTrajectory& traj, const StepAssessment& a,
                                    const BackendSpec& nav_backend, const NavigatorConfig& cfg = {});

/// The full multi-round interplay: abstract, plan, retrieve, then per step
/// instantiate + assess, refining and re-retrieving on rejection. One round
/// is one instantiate+assess exchange. Always halts within cfg.max_rounds;
/// backend or parse errors end the run with a partial transcript.
InterplayTranscript solve(const Problem& x, const TemplateIndex& lib_index,
                          const BackendSpec& nav_backend, const BackendSpec& inf_backend,
                          const NavigatorConfig& cfg = {});

// ---------------------------------------------------------------------------
// Transcript serialization (stable key order; suitable for byte-exact replay
// comparisons under scripted backends)
// ---------------------------------------------------------------------------

std::string transcript_to_json(const InterplayTranscript& t);
InterplayTranscript transcript_from_json(const std::string& text);
void write_transcript(const InterplayTranscript& t, const std::string& path);
InterplayTranscript read_transcript(const std::string& path);

} // namespace rf
