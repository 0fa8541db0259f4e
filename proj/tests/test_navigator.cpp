#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "reasonflux/errors.hpp"
#include "reasonflux/logging.hpp"
#include "reasonflux/navigator.hpp"
#include "support.hpp"

#include <random>

using namespace rf;
using namespace rf::testsupport;

namespace {

BackendSpec mock_backend(std::shared_ptr<MockScript> script, const std::string& model) {
    BackendSpec b;
    b.kind = BackendKind::ScriptedMock;
    b.model = model;
    b.script = std::move(script);
    return b;
}

Problem sample_problem() {
    Problem p;
    p.id = "nav-test";
    p.statement = "Find the minimum of a + 1/a for a > 0.";
    p.difficulty_tier = 1;
    return p;
}

} // namespace

TEST_CASE("extract_fenced_blocks finds tagged blocks in order") {
    const auto blocks = extract_fenced_blocks(
        "prose\n```abstraction\n{\"a\":1}\n```\nmore\n```answer\n{\"answer\":\"7\"}\n```\n");
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].tag == "abstraction");
    CHECK(blocks[0].body == "{\"a\":1}\n");
    CHECK(blocks[1].tag == "answer");
}

TEST_CASE("parse_structured_reply handles each kind") {
    const auto traj = std::get<std::vector<TrajectoryStep>>(parse_structured_reply(
        trajectory_reply({step(1, "goal one", "Tmpl A"), step(2, "goal two", "", {"tag"})}),
        ReplyKind::Trajectory));
    REQUIRE(traj.size() == 2);
    CHECK(traj[0].goal == "goal one");
    CHECK(traj[1].template_tags == std::vector<std::string>{"tag"});

    const auto abs = std::get<ProblemAbstraction>(
        parse_structured_reply(abstraction_reply({"c1", "c2"}, {"r"}), ReplyKind::Abstraction));
    CHECK(abs.concepts.size() == 2);

    const auto assess = std::get<AssessmentPayload>(parse_structured_reply(
        assessment_reply(Verdict::ReplanSuffix, "rework it"), ReplyKind::Assessment));
    CHECK(assess.verdict == Verdict::ReplanSuffix);
    CHECK(assess.critique == "rework it");

    CHECK(std::get<std::string>(parse_structured_reply(answer_block_reply("42"),
                                                       ReplyKind::Answer)) == "42");
}

TEST_CASE("parse_structured_reply rejects prose, wrong kinds and bad schemas") {
    CHECK_THROWS_WITH_AS(parse_structured_reply("no blocks here", ReplyKind::Answer),
                         doctest::Contains("no structured block"), Error);
    CHECK_THROWS_WITH_AS(
        parse_structured_reply(answer_block_reply("42"), ReplyKind::Trajectory),
        doctest::Contains("expected"), Error);
    CHECK_THROWS_AS(
        parse_structured_reply("```trajectory\n{\"steps\": \"oops\"}\n```", ReplyKind::Trajectory),
        Error);
    // a non-accept verdict needs a critique
    CHECK_THROWS_AS(
        parse_structured_reply(assessment_reply(Verdict::ReviseStep, ""), ReplyKind::Assessment),
        Error);
    // steps need a template reference
    CHECK_THROWS_AS(parse_structured_reply(
                        "```trajectory\n{\"steps\":[{\"goal\":\"g\"}]}\n```", ReplyKind::Trajectory),
                    Error);
}

TEST_CASE("two blocks use the first and warn") {
    const auto before = warn_count();
    const std::string reply = answer_block_reply("first") + answer_block_reply("second");
    CHECK(std::get<std::string>(parse_structured_reply(reply, ReplyKind::Answer)) == "first");
    CHECK(warn_count() == before + 1);
}

TEST_CASE("abstract_problem parses a scripted reply") {
    auto nav = std::make_shared<MockScript>();
    const Problem p = sample_problem();
    script_abstraction(*nav, p, {"reciprocal pair", "positivity"}, {"a > 0"});
    const auto a = abstract_problem(p, mock_backend(nav, "nav"));
    CHECK(a.concepts.size() == 2);
    CHECK(a.relations.size() == 1);
    CHECK(!a.raw.empty());
}

TEST_CASE("abstract_problem retries malformed replies then succeeds") {
    auto nav = std::make_shared<MockScript>();
    const Problem p = sample_problem();
    const NavigatorConfig cfg;

    const auto first_req = build_abstract_request(p);
    const std::string malformed = "I will not use a fenced block.";
    script_reply(*nav, first_req, malformed);

    std::string parse_error;
    try {
        parse_structured_reply(malformed, ReplyKind::Abstraction);
    } catch (const Error& e) {
        parse_error = e.what();
    }
    const auto retry_req = build_retry_request(first_req, malformed, parse_error,
                                               ReplyKind::Abstraction);
    script_reply(*nav, retry_req, abstraction_reply({"c"}, {"r"}));

    const auto before = warn_count();
    const auto a = abstract_problem(p, mock_backend(nav, "nav"), cfg);
    CHECK(a.concepts == std::vector<std::string>{"c"});
    CHECK(warn_count() > before); // the retry was logged
}

TEST_CASE("abstract_problem fails after exhausting parse retries") {
    auto nav = std::make_shared<MockScript>();
    nav->fallback_replies = {"still not a block"};
    const Problem p = sample_problem();
    try {
        abstract_problem(p, mock_backend(nav, "nav"), NavigatorConfig{});
        FAIL("expected Error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Parse);
    }
}

TEST_CASE("plan_trajectory yields version 0 with sequential indices") {
    auto nav = std::make_shared<MockScript>();
    const ProblemAbstraction a{{"c"}, {"r"}, "raw analysis"};
    const NavigatorConfig cfg;
    script_reply(*nav, build_plan_request(a, cfg),
                 trajectory_reply({step(1, "g1", "T1"), step(2, "g2", "T2"), step(3, "g3", "T3")}));
    const auto traj = plan_trajectory(a, mock_backend(nav, "nav"), cfg);
    CHECK(traj.version == 0);
    REQUIRE(traj.size() == 3);
    CHECK(traj.steps[2].index == 3);
}

TEST_CASE("plan_trajectory truncates beyond max_steps with a warning") {
    auto nav = std::make_shared<MockScript>();
    const ProblemAbstraction a{{"c"}, {"r"}, "raw"};
    NavigatorConfig cfg;
    cfg.max_steps = 10;
    std::vector<TrajectoryStep> fifteen;
    for (int i = 1; i <= 15; ++i) fifteen.push_back(step(i, "goal " + std::to_string(i), "T"));
    script_reply(*nav, build_plan_request(a, cfg), trajectory_reply(fifteen));
    const auto before = warn_count();
    const auto traj = plan_trajectory(a, mock_backend(nav, "nav"), cfg);
    CHECK(traj.size() == 10);
    CHECK(warn_count() == before + 1);
}

TEST_CASE("plan_trajectory rejects an empty plan") {
    auto nav = std::make_shared<MockScript>();
    const ProblemAbstraction a{{"c"}, {"r"}, "raw"};
    const NavigatorConfig cfg;
    script_reply(*nav, build_plan_request(a, cfg), trajectory_reply({}));
    CHECK_THROWS_WITH_AS(plan_trajectory(a, mock_backend(nav, "nav"), cfg),
                         doctest::Contains("empty trajectory"), Error);
}

TEST_CASE("instantiate_step threads context into the prompt") {
    const Problem p = sample_problem();
    const TrajectoryStep s1 = step(1, "first", "T");
    const TrajectoryStep s2 = step(2, "second", "T");
    Template t;
    t.id = "t";
    t.name = "T";
    t.application_steps = {"do"};

    const auto req1 = build_instantiate_request(p, s1, t, {});
    InstantiatedStep done1;
    done1.step_index = 1;
    done1.reasoning = "prior reasoning";
    const auto req2 = build_instantiate_request(p, s2, t, {done1});
    CHECK(request_fingerprint(req1) != request_fingerprint(req2));
    CHECK(req2.messages.back().content.find("prior reasoning") != std::string::npos);

    auto inf = std::make_shared<MockScript>();
    script_reply(*inf, req1, "  canned step text  ");
    const auto got = instantiate_step(p, s1, t, {}, mock_backend(inf, "inf"));
    CHECK(got.reasoning == "canned step text");
    CHECK(got.step_index == 1);
    CHECK(got.template_id == "t");
}

TEST_CASE("instantiate_step rejects an empty reply") {
    const Problem p = sample_problem();
    const TrajectoryStep s = step(1, "only", "T");
    Template t;
    t.id = "t";
    t.name = "T";
    auto inf = std::make_shared<MockScript>();
    script_reply(*inf, build_instantiate_request(p, s, t, {}), "   \n  ");
    CHECK_THROWS_AS(instantiate_step(p, s, t, {}, mock_backend(inf, "inf")), Error);
}

TEST_CASE("assess_step parses verdicts and falls back to accept") {
    ThoughtTrajectory traj;
    traj.steps = {step(1, "g1", "T")};
    InstantiatedStep s_hat;
    s_hat.step_index = 1;
    s_hat.reasoning = "some work";

    auto nav = std::make_shared<MockScript>();
    script_reply(*nav, build_assess_request(traj, s_hat),
                 assessment_reply(Verdict::ReplanSuffix, "replan the tail"));
    const auto a = assess_step(traj, s_hat, mock_backend(nav, "nav"));
    CHECK(a.verdict == Verdict::ReplanSuffix);
    CHECK(a.critique == "replan the tail");

    // Unparseable assessments degrade to accept with a warning.
    auto chaotic = std::make_shared<MockScript>();
    chaotic->fallback_replies = {"not a block"};
    const auto before = warn_count();
    const auto fallback = assess_step(traj, s_hat, mock_backend(chaotic, "nav"));
    CHECK(fallback.verdict == Verdict::Accept);
    CHECK(warn_count() > before);
}

TEST_CASE("assess_step validates the step index") {
    ThoughtTrajectory traj;
    traj.steps = {step(1, "g1", "T")};
    InstantiatedStep s_hat;
    s_hat.step_index = 5;
    auto nav = std::make_shared<MockScript>();
    CHECK_THROWS_AS(assess_step(traj, s_hat, mock_backend(nav, "nav")), Error);
}

TEST_CASE("refine_trajectory preserves the prefix on revise_step") {
    ThoughtTrajectory traj;
    traj.steps = {step(1, "g1", "T1"), step(2, "g2", "T2"), step(3, "g3", "T3")};
    traj.version = 0;
    const StepAssessment a{2, Verdict::ReviseStep, "step 2 used the wrong tool"};

    auto nav = std::make_shared<MockScript>();
    script_reply(*nav, build_refine_request(traj, a),
                 trajectory_reply({step(1, "SHOULD BE IGNORED", "X"), step(2, "g2 revised", "T2b"),
                                   step(3, "ALSO IGNORED", "Y")}));
    const auto refined = refine_trajectory(traj, a, mock_backend(nav, "nav"));
    CHECK(refined.version == 1);
    REQUIRE(refined.size() == 3);
    CHECK(refined.steps[0].goal == "g1"); // prefix kept from the original
    CHECK(refined.steps[1].goal == "g2 revised");
    CHECK(refined.steps[2].goal == "g3"); // suffix kept on revise_step
}

TEST_CASE("refine_trajectory replaces the suffix on replan_suffix") {
    ThoughtTrajectory traj;
    traj.steps = {step(1, "g1", "T1"), step(2, "g2", "T2"), step(3, "g3", "T3")};
    const StepAssessment a{2, Verdict::ReplanSuffix, "the tail is unworkable"};

    auto nav = std::make_shared<MockScript>();
    script_reply(*nav, build_refine_request(traj, a),
                 trajectory_reply({step(1, "ignored", "X"), step(2, "new g2", "N2"),
                                   step(3, "new g3", "N3"), step(4, "new g4", "N4")}));
    const auto refined = refine_trajectory(traj, a, mock_backend(nav, "nav"));
    CHECK(refined.version == 1);
    REQUIRE(refined.size() == 4);
    CHECK(refined.steps[0].goal == "g1");
    CHECK(refined.steps[1].goal == "new g2");
    CHECK(refined.steps[3].goal == "new g4");
    CHECK(refined.steps[3].index == 4);
}

TEST_CASE("refine_trajectory rejects accept verdicts and oversized plans") {
    ThoughtTrajectory traj;
    traj.steps = {step(1, "g1", "T1")};
    auto nav = std::make_shared<MockScript>();
    CHECK_THROWS_AS(
        refine_trajectory(traj, {1, Verdict::Accept, ""}, mock_backend(nav, "nav")), Error);

    NavigatorConfig tight;
    tight.max_steps = 2;
    const StepAssessment a{1, Verdict::ReplanSuffix, "needs more steps"};
    script_reply(*nav, build_refine_request(traj, a),
                 trajectory_reply({step(1, "n1", "T"), step(2, "n2", "T"), step(3, "n3", "T")}));
    CHECK_THROWS_WITH_AS(refine_trajectory(traj, a, mock_backend(nav, "nav"), tight),
                         doctest::Contains("max_steps"), Error);
}

TEST_CASE("solve runs the golden interplay: 3 steps, one revision") {
    auto nav = std::make_shared<MockScript>();
    auto inf = std::make_shared<MockScript>();
    Problem p = sample_problem();
    p.difficulty_tier = 2;

    SolveScriptBuilder b(p, seed_index(), NavigatorConfig{}, *nav, *inf);
    b.abstraction({"minimum", "substitution"}, {"reciprocal structure"});
    b.plan({step(1, "Substitute to expose a reciprocal pair", "Extremum Value Theorem"),
            step(2, "Bound the pair", "Distance Formulas and Their Applications"),
            step(3, "Conclude the minimum", "Extremum Value Theorem")});
    b.round_accept("Let a = x - 0; the expression is a + 1/a.");
    b.round_revise("Distances do not bound a + 1/a.", "Wrong tool; use the mean inequality.",
                   step(2, "Bound via the mean inequality", "",
                        {"Inequality of Arithmetic and Geometric Means"}));
    b.round_accept("By AM-GM, a + 1/a >= 2.");
    b.round_accept("Hence the minimum is 2.\nANSWER: 2");

    const auto tr = solve(p, seed_index(), mock_backend(nav, "nav"), mock_backend(inf, "inf"),
                          NavigatorConfig{});
    CHECK(tr.terminated_by == TerminatedBy::Completed);
    CHECK(tr.rounds_used == 4);
    CHECK(tr.rounds_used == b.expected_rounds());
    CHECK(tr.templates_retrieved == 4);
    CHECK(tr.templates_retrieved == b.expected_templates_retrieved());
    REQUIRE(tr.final_answer.has_value());
    CHECK(*tr.final_answer == "2");
    REQUIRE(tr.trajectory_versions.size() == 2);
    CHECK(tr.trajectory_versions[0].version == 0);
    CHECK(tr.trajectory_versions[1].version == 1);
    // Prefix preservation across versions.
    CHECK(tr.trajectory_versions[1].steps[0].goal == tr.trajectory_versions[0].steps[0].goal);
    CHECK(tr.instantiated.size() == 4);
    CHECK(tr.assessments.size() == 4);

    // Bit-determinism under scripted mocks.
    const auto again = solve(p, seed_index(), mock_backend(nav, "nav"), mock_backend(inf, "inf"),
                             NavigatorConfig{});
    CHECK(transcript_to_json(tr) == transcript_to_json(again));
}

TEST_CASE("solve stops at max_rounds") {
    auto nav = std::make_shared<MockScript>();
    auto inf = std::make_shared<MockScript>();
    const Problem p = sample_problem();
    NavigatorConfig cfg;
    cfg.max_rounds = 1;

    SolveScriptBuilder b(p, seed_index(), cfg, *nav, *inf);
    b.abstraction({"c"}, {"r"});
    b.plan({step(1, "a", "Extremum Value Theorem"), step(2, "b", "Extremum Value Theorem"),
            step(3, "c", "Extremum Value Theorem")});
    b.round_accept("step 1 done");

    const auto tr = solve(p, seed_index(), mock_backend(nav, "nav"), mock_backend(inf, "inf"), cfg);
    CHECK(tr.terminated_by == TerminatedBy::MaxRounds);
    CHECK(tr.rounds_used == 1);
    CHECK(!tr.final_answer.has_value());
}

TEST_CASE("solve completes a two-step all-accept run") {
    auto nav = std::make_shared<MockScript>();
    auto inf = std::make_shared<MockScript>();
    const Problem p = sample_problem();

    SolveScriptBuilder b(p, seed_index(), NavigatorConfig{}, *nav, *inf);
    b.abstraction({"c"}, {"r"});
    b.plan({step(1, "work", "Extremum Value Theorem"),
            step(2, "finish", "Extremum Value Theorem")});
    b.round_accept("partial work");
    b.round_accept("done\nANSWER: 7");

    const auto tr = solve(p, seed_index(), mock_backend(nav, "nav"), mock_backend(inf, "inf"),
                          NavigatorConfig{});
    CHECK(tr.rounds_used == 2);
    CHECK(tr.terminated_by == TerminatedBy::Completed);
    CHECK(tr.templates_retrieved == 2);
}

TEST_CASE("solve preserves a partial transcript on backend errors") {
    auto nav = std::make_shared<MockScript>();
    auto inf = std::make_shared<MockScript>(); // instantiate request will be unscripted
    const Problem p = sample_problem();

    SolveScriptBuilder b(p, seed_index(), NavigatorConfig{}, *nav, *inf);
    b.abstraction({"c"}, {"r"});
    b.plan({step(1, "work", "Extremum Value Theorem")});

    auto inf_empty = std::make_shared<MockScript>();
    const auto tr = solve(p, seed_index(), mock_backend(nav, "nav"),
                          mock_backend(inf_empty, "inf"), NavigatorConfig{});
    CHECK(tr.terminated_by == TerminatedBy::Error);
    CHECK(!tr.error.empty());
    CHECK(tr.abstraction.has_value());
    CHECK(tr.trajectory_versions.size() == 1);
}

TEST_CASE("answer extraction takes the last ANSWER line") {
    CHECK(extract_answer_line("work\nANSWER: 3\nmore\n ANSWER: 7 \n") == std::string("7"));
    CHECK(!extract_answer_line("no answer here").has_value());
}

TEST_CASE("transcripts round-trip through JSON") {
    auto nav = std::make_shared<MockScript>();
    auto inf = std::make_shared<MockScript>();
    const Problem p = sample_problem();
    SolveScriptBuilder b(p, seed_index(), NavigatorConfig{}, *nav, *inf);
    b.abstraction({"c"}, {"r"});
    b.plan({step(1, "only", "Extremum Value Theorem")});
    b.round_accept("fine\nANSWER: 1");
    const auto tr = solve(p, seed_index(), mock_backend(nav, "nav"), mock_backend(inf, "inf"),
                          NavigatorConfig{});
    const auto text = transcript_to_json(tr);
    const auto back = transcript_from_json(text);
    CHECK(transcript_to_json(back) == text);
}

TEST_CASE("termination fuzz: adversarial mocks always halt inside max_rounds") {
    const std::vector<std::string> malformed_pool = {
        "no structure at all",
        "```trajectory\n{\"steps\": [\n```",
        "```trajectory\n{\"steps\": []}\n```",
        "```assessment\n{\"verdict\": \"maybe\", \"critique\": \"?\"}\n```",
        "```abstraction\n{\"concepts\": [\"x\"], \"relations\": []}\n```",
        "```assessment\n{\"verdict\": \"revise_step\", \"critique\": \"redo\"}\n```",
        "```assessment\n{\"verdict\": \"accept\", \"critique\": \"\"}\n```",
        "```trajectory\n{\"steps\": [{\"goal\": \"g\", \"template_name\": \"Extremum Value "
        "Theorem\"}]}\n```",
        "step work without an answer line",
        "work\nANSWER: 7",
        "",
        "```answer\n{\"answer\": \"7\"}\n```",
    };
    std::mt19937_64 rng(424242);
    int completed = 0, maxed = 0, errored = 0;
    for (int run = 0; run < 300; ++run) {
        auto nav = std::make_shared<MockScript>();
        auto inf = std::make_shared<MockScript>();
        const std::size_t n = 1 + rng() % 6;
        for (std::size_t i = 0; i < n; ++i) {
            nav->fallback_replies.push_back(malformed_pool[rng() % malformed_pool.size()]);
            inf->fallback_replies.push_back(malformed_pool[rng() % malformed_pool.size()]);
        }
        Problem p;
        p.id = "fuzz-" + std::to_string(run);
        p.statement = "fuzz problem " + std::to_string(run);
        NavigatorConfig cfg;
        cfg.max_rounds = 8;
        const auto tr = solve(p, seed_index(), mock_backend(nav, "nav"),
                              mock_backend(inf, "inf"), cfg);
        CHECK(tr.rounds_used <= cfg.max_rounds);
        switch (tr.terminated_by) {
            case TerminatedBy::Completed: ++completed; break;
            case TerminatedBy::MaxRounds: ++maxed; break;
            case TerminatedBy::Error: ++errored; break;
        }
        // The partial transcript always serializes and re-parses.
        const auto text = transcript_to_json(tr);
        CHECK(transcript_to_json(transcript_from_json(text)) == text);
    }
    // The adversary must actually exercise all three exits.
    CHECK(completed > 0);
    CHECK(maxed > 0);
    CHECK(errored > 0);
}
