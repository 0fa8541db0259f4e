// Regenerates the committed scripted-mock fixtures under testdata/: the
// golden solve, the tiered transcript suite, the eval A/B set, the
// preference-pair sampling set, and the extraction corpus script. Run from
// the repo root (or pass it as argv[1]) after changing prompt construction,
// then commit the outputs.

#include "reasonflux/cli.hpp"
#include "reasonflux/navigator.hpp"
#include "reasonflux/template_store.hpp"
#include "reasonflux/textutil.hpp"

#include "../tests/support.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rf;
using namespace rf::testsupport;

namespace {

std::string g_root;

void write_file(const std::string& path, const std::string& content) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path);
    if (!out) {
        std::cerr << "cannot write " << path << "\n";
        std::exit(1);
    }
    out << content;
    std::cout << "wrote " << path << "\n";
}

void write_json(const std::string& path, const json& j) {
    write_file(path, j.dump(2) + "\n");
}

json problem_json(const Problem& p) {
    json j{{"id", p.id}, {"statement", p.statement}};
    if (p.answer_key) j["answer_key"] = *p.answer_key;
    if (p.difficulty_tier) j["difficulty_tier"] = *p.difficulty_tier;
    return j;
}

json mock_config(const std::string& nav_script, const std::string& inf_script) {
    return json{{"library_path", "seed_library"},
                {"output_dir", "out"},
                {"navigator_backend", json{{"kind", "scripted_mock"},
                                           {"model", "nav-mock"},
                                           {"script_path", nav_script}}},
                {"inference_backend", json{{"kind", "scripted_mock"},
                                           {"model", "inf-mock"},
                                           {"script_path", inf_script}}},
                {"navigator",
                 json{{"max_rounds", 8}, {"max_steps", 10}, {"max_parse_retries", 2}}}};
}

BackendSpec mock_backend(std::shared_ptr<MockScript> script, const std::string& model) {
    BackendSpec b;
    b.kind = BackendKind::ScriptedMock;
    b.model = model;
    b.script = std::move(script);
    return b;
}

// The committed end-to-end run: 3-step plan, one revise_step, final answer 7.
void gen_golden() {
    Problem p;
    p.id = "golden-min-value";
    p.statement =
        "Find the minimum value of the function y = (x^4 - 5x^2 + 1)/(x^2 - 5) for x^2 > 5.";
    p.answer_key = "7";
    p.difficulty_tier = 2;

    auto nav = std::make_shared<MockScript>();
    auto inf = std::make_shared<MockScript>();
    SolveScriptBuilder b(p, seed_index(), NavigatorConfig{}, *nav, *inf);
    b.abstraction({"function minimum", "algebraic substitution"},
                  {"y depends on x only through x^2 - 5",
                   "substituting a = x^2 - 5 exposes a reciprocal pair"});
    b.plan({step(1, "Rewrite the function via substitution to expose a term plus its reciprocal",
                 "Extremum Value Theorem"),
            step(2, "Bound the rewritten expression from below", "Distance Formulas and Their Applications"),
            step(3, "Combine the bound with the constant shift and state the minimum",
                 "Extremum Value Theorem")});
    b.round_accept("Dividing, y = x^2 + 1/(x^2 - 5). Substituting a = x^2 - 5 > 0 gives "
                   "y = a + 1/a + 5.");
    b.round_revise("The distance formulas d = |Ax0+By0+C|/sqrt(A^2+B^2) concern analytic "
                   "geometry and give no lower bound for a + 1/a.",
                   "Distance formulas do not apply here; bound a + 1/a with the "
                   "arithmetic-geometric mean inequality instead.",
                   step(2, "Bound a + 1/a below using the arithmetic-geometric mean inequality",
                        "", {"Inequality of Arithmetic and Geometric Means"}));
    b.round_accept("By the AM-GM inequality, a + 1/a >= 2*sqrt(a * 1/a) = 2, with equality "
                   "exactly when a = 1.");
    b.round_accept("Therefore y = a + 1/a + 5 >= 2 + 5 = 7, attained at x^2 - 5 = 1, i.e. "
                   "x = +-sqrt(6).\nANSWER: 7");

    const std::string dir = g_root + "/testdata/golden";
    write_json(dir + "/problem.json", problem_json(p));
    save_mock_script(*nav, dir + "/nav_script.json");
    std::cout << "wrote " << dir << "/nav_script.json\n";
    save_mock_script(*inf, dir + "/inf_script.json");
    std::cout << "wrote " << dir << "/inf_script.json\n";
    write_json(dir + "/config.json",
               mock_config("testdata/golden/nav_script.json", "testdata/golden/inf_script.json"));

    const auto transcript = solve(p, seed_index(), mock_backend(nav, "nav-mock"),
                                  mock_backend(inf, "inf-mock"), NavigatorConfig{});
    if (transcript.terminated_by != TerminatedBy::Completed || transcript.rounds_used != 4 ||
        transcript.templates_retrieved != 4 ||
        transcript.rounds_used != b.expected_rounds() ||
        transcript.templates_retrieved != b.expected_templates_retrieved()) {
        std::cerr << "golden run did not produce the expected transcript shape: terminated_by="
                  << to_string(transcript.terminated_by) << " rounds=" << transcript.rounds_used
                  << " templates=" << transcript.templates_retrieved
                  << " error=" << transcript.error << "\n";
        std::exit(1);
    }
    write_file(dir + "/transcript.json", transcript_to_json(transcript));
}

// Tiered suite: rounds and retrievals grow with tier.
void gen_suite() {
    auto nav = std::make_shared<MockScript>();
    auto inf = std::make_shared<MockScript>();
    const std::string dir = g_root + "/testdata/golden/suite";

    struct Shape {
        int tier;
        int steps;
        int revisions;
    };
    const Shape shapes[] = {{1, 1, 0}, {2, 2, 0}, {3, 3, 1}, {4, 4, 2}};

    json problems = json::array();
    std::vector<InterplayTranscript> transcripts;
    for (const auto& shape : shapes) {
        for (int variant = 0; variant < 2; ++variant) {
            Problem p;
            p.id = "suite-t" + std::to_string(shape.tier) + "-" + std::to_string(variant);
            p.statement = "Suite problem at tier " + std::to_string(shape.tier) + ", variant " +
                          std::to_string(variant) +
                          ": minimize a positive expression with a constant product.";
            p.answer_key = "7";
            p.difficulty_tier = shape.tier;
            problems.push_back(problem_json(p));

            SolveScriptBuilder b(p, seed_index(), NavigatorConfig{}, *nav, *inf);
            b.abstraction({"positivity", "constant product"},
                          {"the target splits into a term and its reciprocal"});
            std::vector<TrajectoryStep> steps;
            for (int s = 1; s <= shape.steps; ++s) {
                steps.push_back(step(s, "Step " + std::to_string(s) + " of the tier-" +
                                            std::to_string(shape.tier) + " plan",
                                     "Extremum Value Theorem"));
            }
            b.plan(steps);
            int revisions_left = shape.revisions;
            for (int s = 1; s <= shape.steps; ++s) {
                const bool last = s == shape.steps;
                if (revisions_left > 0 && !last) {
                    b.round_revise("A first attempt at step " + std::to_string(s) +
                                       " that misses the bound.",
                                   "Use the mean inequality for this bound.",
                                   step(s, "Step " + std::to_string(s) + " revised with the mean inequality",
                                        "", {"Inequality of Arithmetic and Geometric Means"}));
                    --revisions_left;
                }
                std::string reasoning = "Clean derivation for step " + std::to_string(s) + ".";
                if (last) reasoning += "\nANSWER: 7";
                b.round_accept(reasoning);
            }
            const auto tr = solve(p, seed_index(), mock_backend(nav, "nav-mock"),
                                  mock_backend(inf, "inf-mock"), NavigatorConfig{});
            if (tr.terminated_by != TerminatedBy::Completed ||
                tr.rounds_used != b.expected_rounds() ||
                tr.templates_retrieved != b.expected_templates_retrieved()) {
                std::cerr << "suite run " << p.id << " diverged from the script: "
                          << transcript_to_json(tr) << "\n";
                std::exit(1);
            }
            transcripts.push_back(tr);
        }
    }
    write_json(dir + "/problems.json", problems);
    save_mock_script(*nav, dir + "/nav_script.json");
    save_mock_script(*inf, dir + "/inf_script.json");
    write_json(dir + "/config.json", mock_config("testdata/golden/suite/nav_script.json",
                                                 "testdata/golden/suite/inf_script.json"));
    for (const auto& tr : transcripts) {
        write_file(dir + "/transcripts/" + tr.problem_id + ".json", transcript_to_json(tr));
    }
}

// 20-problem A/B set: direct solves 10, template-guided solves 17.
void gen_eval() {
    auto nav = std::make_shared<MockScript>();
    auto inf = std::make_shared<MockScript>();
    const std::string dir = g_root + "/testdata/eval";

    json problems = json::array();
    for (int i = 1; i <= 20; ++i) {
        char id[8];
        std::snprintf(id, sizeof(id), "p%02d", i);
        Problem p;
        p.id = id;
        p.statement = "Evaluation problem " + std::to_string(i) +
                      ": compute the stated minimum value.";
        p.answer_key = std::to_string(10 + i);
        p.difficulty_tier = (i - 1) % 4 + 1;
        problems.push_back(problem_json(p));

        // Direct mode: single inference call, correct for the first 10.
        const bool direct_right = i <= 10;
        script_reply(*inf, build_direct_request(p),
                     "Working directly without a template.\nANSWER: " +
                         (direct_right ? *p.answer_key : "guess-" + std::to_string(i)));

        // Template-guided mode: one-step interplay, correct for the first 17.
        const bool guided_right = i <= 17;
        SolveScriptBuilder b(p, seed_index(), NavigatorConfig{}, *nav, *inf);
        b.abstraction({"optimization"}, {"a reciprocal pair appears after substitution"});
        b.plan({step(1, "Apply the extremum bound and conclude", "Extremum Value Theorem")});
        b.round_accept("Applying the extremum bound.\nANSWER: " +
                       (guided_right ? *p.answer_key : "guess-" + std::to_string(i)));
    }
    write_json(dir + "/problems20.json", problems);
    save_mock_script(*nav, dir + "/nav_script.json");
    save_mock_script(*inf, dir + "/inf_script.json");
    write_json(dir + "/config.json",
               mock_config("testdata/eval/nav_script.json", "testdata/eval/inf_script.json"));
}

// Similar-problem set plus three sampled trajectories with rewards 1.0, 0.5, 0.5.
void gen_pairs() {
    auto nav = std::make_shared<MockScript>();
    auto inf = std::make_shared<MockScript>();
    const std::string dir = g_root + "/testdata/pairs";

    Problem anchor;
    anchor.id = "pairset-anchor";
    anchor.statement = "Anchor problem: find the minimum of a + 1/a + 5 for a > 0.";
    anchor.answer_key = "7";
    Problem sibling;
    sibling.id = "pairset-sibling";
    sibling.statement = "Sibling problem: prove the cube-sum expression is at least 24.";
    sibling.answer_key = "24";

    write_json(dir + "/sets.json",
               json{{"anchor", "pairset-anchor"},
                    {"members", json::array({problem_json(anchor), problem_json(sibling)})}});

    const NavigatorConfig cfg;
    const ProblemAbstraction a = script_abstraction(
        *nav, anchor, {"extremum bound"}, {"the anchor and its siblings share one plan"});

    // --seed 7 at the CLI: sample seeds are 7, 8, 9.
    const ThoughtTrajectory t0 = script_plan(
        *nav, a, cfg, kTempSampling, 7,
        {step(1, "Use the extremum bound on the reciprocal pair", "Extremum Value Theorem")});
    const ThoughtTrajectory t1 = script_plan(
        *nav, a, cfg, kTempSampling, 8,
        {step(1, "Use distance formulas on the expression", "Distance Formulas and Their Applications")});
    const ThoughtTrajectory t2 = script_plan(
        *nav, a, cfg, kTempSampling, 9,
        {step(1, "Use reduction formulas on the expression",
              "Analyzing the Parity and Symmetry of Trigonometric Functions Using Reduction Formulas")});

    // Rewards over {anchor, sibling}: 2/2, 1/2, 1/2.
    script_member_run(*inf, anchor, t0, seed_index(), "7");
    script_member_run(*inf, sibling, t0, seed_index(), "24");
    script_member_run(*inf, anchor, t1, seed_index(), "7");
    script_member_run(*inf, sibling, t1, seed_index(), "not-24");
    script_member_run(*inf, anchor, t2, seed_index(), "not-7");
    script_member_run(*inf, sibling, t2, seed_index(), "24");

    save_mock_script(*nav, dir + "/nav_script.json");
    save_mock_script(*inf, dir + "/inf_script.json");
    write_json(dir + "/config.json",
               mock_config("testdata/pairs/nav_script.json", "testdata/pairs/inf_script.json"));
}

// Extraction corpus: one record distills cleanly, one is missing tags.
void gen_extract() {
    auto nav = std::make_shared<MockScript>();
    const std::string dir = g_root + "/testdata/extract";

    const std::string good_problem =
        "Find the maximum value of y = x + sqrt(R^2 - x^2) for 0 < x < R.";
    const std::string good_solution =
        "Since |x| <= R, substitute x = R sin(theta) with theta in (0, pi/2); then "
        "sqrt(R^2 - x^2) = R cos(theta), so y = R(sin(theta) + cos(theta)) = "
        "R sqrt(2) sin(theta + pi/4), whose maximum is R sqrt(2) at theta = pi/4.";
    const json good_template{
        {"name", "sqrt(R^2 - x^2) Type Trigonometric Substitution"},
        {"kind", "problem_solving_method"},
        {"tags", json::array({"Substitution Method", "Trigonometric Substitution",
                              "Irrational Function"})},
        {"description",
         "When a radical of the form sqrt(R^2 - x^2) appears in a problem, and |x| <= R, "
         "consider using trigonometric substitution x = R sin(theta) or x = R cos(theta) to "
         "eliminate the radical, converting the irrational expression into a trigonometric "
         "expression."},
        {"scope",
         "Problems involving function optimization or range, especially those involving "
         "irrational functions of the form sqrt(R^2 - x^2); equations or inequalities "
         "containing such radicals; geometric problems related to circles."},
        {"application_steps",
         json::array({"Determine the range of x, usually |x| <= R.",
                      "Substitute x = R sin(theta) (or R cos(theta)) with theta restricted so "
                      "the substitution is one-to-one.",
                      "Simplify the radical to R cos(theta) (or R sin(theta)) and rewrite the "
                      "whole expression in trigonometric form.",
                      "Optimize or solve using trigonometric identities and ranges.",
                      "Translate the result back to x and verify the original constraints."})},
        {"examples", json::array({json{{"problem", good_problem},
                                       {"solution_steps",
                                        json::array({"Substitute x = R sin(theta).",
                                                     "y = R sqrt(2) sin(theta + pi/4).",
                                                     "Maximum R sqrt(2) at theta = pi/4."})},
                                       {"answer", "R*sqrt(2)"}}})}};

    const std::string bad_problem = "Evaluate the sum of the first n odd numbers.";
    const std::string bad_solution = "Pairing terms shows the sum is n^2.";
    json bad_template = good_template;
    bad_template["name"] = "Sum of Consecutive Odd Numbers";
    bad_template["tags"] = json::array();

    script_reply(*nav, build_extract_request(good_problem, good_solution),
                 "Here is the distilled template.\n\n```template\n" + good_template.dump(2) +
                     "\n```\n");
    script_reply(*nav, build_extract_request(bad_problem, bad_solution),
                 "```template\n" + bad_template.dump(2) + "\n```\n");

    write_json(dir + "/corpus.json",
               json::array({json{{"problem", good_problem}, {"solution", good_solution}},
                            json{{"problem", bad_problem}, {"solution", bad_solution}}}));
    save_mock_script(*nav, dir + "/nav_script.json");
    // extract never calls the inference backend; reuse the nav script path.
    write_json(dir + "/config.json",
               mock_config("testdata/extract/nav_script.json", "testdata/extract/nav_script.json"));
}

} // namespace

int main(int argc, char** argv) {
    g_root = argc > 1 ? argv[1] : ".";
    if (!fs::exists(g_root + "/seed_library")) {
        std::cerr << "run from the repo root (seed_library/ not found under '" << g_root << "')\n";
        return 1;
    }
    gen_golden();
    gen_suite();
    gen_eval();
    gen_pairs();
    gen_extract();
    std::cout << "done\n";
    return 0;
}
