#include "reasonflux/cli.hpp"

#include "reasonflux/benchlab.hpp"
#include "reasonflux/errors.hpp"
#include "reasonflux/logging.hpp"
#include "reasonflux/template_store.hpp"
#include "reasonflux/textutil.hpp"
#include "reasonflux/trainkit.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace rf {

namespace {

int exit_code_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::Usage:
        case ErrorCode::Io: return 2;
        default: return 1;
    }
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\n") == std::string::npos) return value;
    std::string quoted = "\"";
    for (char c : value) {
        if (c == '"') quoted += "\"\"";
        else quoted += c;
    }
    quoted += "\"";
    return quoted;
}

Problem problem_from_json_obj(const json& j, const std::string& where) {
    Problem p;
    if (!j.contains("id") || !j.contains("statement")) {
        throw Error(ErrorCode::Parse, where + ": problem needs 'id' and 'statement'");
    }
    p.id = j.at("id").get<std::string>();
    p.statement = j.at("statement").get<std::string>();
    if (j.contains("answer_key") && !j.at("answer_key").is_null()) {
        p.answer_key = j.at("answer_key").get<std::string>();
    }
    if (j.contains("difficulty_tier") && !j.at("difficulty_tier").is_null()) {
        p.difficulty_tier = j.at("difficulty_tier").get<int>();
    }
    if (j.contains("similar_ids")) {
        for (const auto& s : j.at("similar_ids")) p.similar_ids.push_back(s.get<std::string>());
    }
    return p;
}

Problem load_problem(const std::string& path) {
    const json j = json::parse(slurp(path));
    return problem_from_json_obj(j, path);
}

std::vector<Problem> load_problem_set(const std::string& path) {
    const json j = json::parse(slurp(path));
    const json arr = j.is_array() ? j : (j.contains("problems") ? j.at("problems") : json::array());
    std::vector<Problem> out;
    for (const auto& pj : arr) out.push_back(problem_from_json_obj(pj, path));
    return out;
}

BackendSpec backend_from_json(const json& j, const std::string& where) {
    BackendSpec b;
    if (j.contains("api_key")) {
        throw Error(ErrorCode::Parse,
                    where + ": secrets do not belong in config files; name an environment "
                            "variable with 'api_key_env' instead");
    }
    const std::string kind = j.contains("kind") ? j.at("kind").get<std::string>() : "";
    if (kind == "scripted_mock") {
        b.kind = BackendKind::ScriptedMock;
        if (j.contains("script_path")) {
            b.script = load_mock_script(expand_env(j.at("script_path").get<std::string>()));
        }
    } else if (kind == "http_openai_compatible") {
        b.kind = BackendKind::HttpOpenAiCompatible;
        if (!j.contains("base_url")) {
            throw Error(ErrorCode::Parse, where + ": http backend needs 'base_url'");
        }
        b.base_url = expand_env(j.at("base_url").get<std::string>());
    } else {
        throw Error(ErrorCode::Parse, where + ": backend 'kind' must be scripted_mock or "
                                              "http_openai_compatible");
    }
    if (j.contains("model")) b.model = expand_env(j.at("model").get<std::string>());
    if (j.contains("api_key_env")) b.api_key_env = j.at("api_key_env").get<std::string>();
    return b;
}

std::string timestamp_name() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%S", &tm);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        now.time_since_epoch())
                        .count() %
                    1000;
    char out[48];
    std::snprintf(out, sizeof(out), "%s%03d", buf, static_cast<int>(ms));
    return out;
}

std::vector<std::string> sorted_json_files(const std::string& dir, const char* skip = nullptr) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "not a directory: " + dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
        if (skip && entry.path().filename() == skip) continue;
        files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::string resolve_library(const std::string& flag_path, const RunConfig& cfg) {
    if (!flag_path.empty()) return flag_path;
    if (!cfg.library_path.empty()) return cfg.library_path;
    throw Error(ErrorCode::Usage, "no library path: pass one or set library_path in --config");
}

void require_backends(const RunConfig& cfg) {
    if (!cfg.has_backends) {
        throw Error(ErrorCode::Usage, "this command needs backends: pass --config");
    }
}

std::optional<std::string> answer_from_reply(const std::string& text) {
    if (auto line = extract_answer_line(text)) return line;
    for (const auto& block : extract_fenced_blocks(text)) {
        if (block.tag != "answer") continue;
        try {
            return std::get<std::string>(parse_structured_reply(text, ReplyKind::Answer));
        } catch (const Error&) {
            break;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_library_validate(const std::string& path, std::ostream& out, std::ostream& err) {
    const auto files = sorted_json_files(path, "library.lock.json");
    if (files.empty()) {
        err << "error: empty library: " << path << "\n";
        return 1;
    }
    std::size_t bad = 0;
    std::map<std::string, std::string> seen;
    for (const auto& file : files) {
        std::vector<std::string> violations;
        try {
            const Template t = template_from_json_text(slurp(file), file);
            violations = validate(t);
            if (violations.empty()) {
                auto [it, inserted] = seen.emplace(t.id, file);
                if (!inserted) {
                    violations.push_back("id: duplicate of " + it->second);
                }
            }
        } catch (const Error& e) {
            violations.push_back(e.what());
        }
        if (!violations.empty()) {
            ++bad;
            out << file << ":\n";
            for (const auto& v : violations) out << "  - " << v << "\n";
        }
    }
    if (bad) {
        out << bad << " of " << files.size() << " templates invalid\n";
        return 1;
    }
    out << files.size() << " templates OK\n";
    return 0;
}

int cmd_library_index(const std::string& path, std::ostream& out) {
    const TemplateLibrary lib = load_library(path);
    write_library_manifest(lib, path);
    out << "indexed " << lib.size() << " templates; wrote "
        << (fs::path(path) / "library.lock.json").string() << "\n";
    return 0;
}

int cmd_library_search(const std::string& path, const std::string& name, const std::string& tags,
                       std::size_t k, std::ostream& out) {
    const TemplateIndex idx = build_index(load_library(path));
    SearchQuery q;
    if (!name.empty()) q.name = name;
    if (!tags.empty()) q.tags.push_back(tags);
    const auto hits = search(idx, q, k);
    if (hits.empty()) {
        out << "no matches\n";
        return 0;
    }
    for (std::size_t i = 0; i < hits.size(); ++i) {
        out << (i + 1) << ". " << hits[i].template_id << "  score=" << format_fixed(hits[i].score, 4)
            << "  [" << (hits[i].matched_on == MatchKind::ExactName ? "exact_name" : "lexical")
            << "]\n";
    }
    return 0;
}

int cmd_solve(const RunConfig& cfg, const std::string& problem_path,
              const std::string& transcript_out, std::ostream& out) {
    require_backends(cfg);
    const Problem problem = load_problem(problem_path);
    const TemplateIndex idx = build_index(load_library(cfg.library_path));
    const InterplayTranscript tr =
        solve(problem, idx, cfg.navigator_backend, cfg.inference_backend, cfg.navigator_cfg);

    std::string path = transcript_out;
    if (path.empty()) {
        path = (fs::path(cfg.output_dir) / "runs" / problem.id / (timestamp_name() + ".json"))
                   .string();
    }
    write_transcript(tr, path);

    out << "answer: " << (tr.final_answer ? *tr.final_answer : "(none)") << "\n";
    out << "rounds_used: " << tr.rounds_used << "\n";
    out << "templates_retrieved: " << tr.templates_retrieved << "\n";
    out << "terminated_by: " << to_string(tr.terminated_by) << "\n";
    out << "transcript: " << path << "\n";
    if (tr.terminated_by == TerminatedBy::Error) {
        out << "error: " << tr.error << "\n";
        return 1;
    }
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& problems_path, const std::string& mode,
             const std::string& out_csv, std::ostream& out) {
    require_backends(cfg);
    const auto problems = load_problem_set(problems_path);
    if (problems.empty()) throw Error(ErrorCode::Usage, "empty problem set: " + problems_path);
    for (const auto& p : problems) {
        if (!p.answer_key) {
            throw Error(ErrorCode::Validation, "problem '" + p.id + "' has no answer_key");
        }
    }
    const bool with_template = mode == "with_template";
    std::optional<TemplateIndex> idx;
    if (with_template) idx = build_index(load_library(cfg.library_path));

    std::string csv = "problem_id,mode,answer,key,correct\n";
    std::size_t correct = 0;
    for (const auto& p : problems) {
        std::optional<std::string> answer;
        if (with_template) {
            const auto tr =
                solve(p, *idx, cfg.navigator_backend, cfg.inference_backend, cfg.navigator_cfg);
            answer = tr.final_answer;
        } else {
            const auto reply = generate(cfg.inference_backend, build_direct_request(p));
            answer = answer_from_reply(reply.text);
        }
        const bool ok = answer && check_answer(*answer, *p.answer_key).equivalent;
        if (ok) ++correct;
        csv += p.id + "," + mode + "," + csv_field(answer ? *answer : "") + "," +
               csv_field(*p.answer_key) + "," + (ok ? "1" : "0") + "\n";
        out << p.id << ": " << (ok ? "correct" : "wrong") << " (answer "
            << (answer ? *answer : "(none)") << ", key " << *p.answer_key << ")\n";
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(problems.size());
    out << mode << " accuracy: " << format_fixed(accuracy, 4) << " (" << correct << "/"
        << problems.size() << ")\n";

    if (!out_csv.empty()) {
        fs::create_directories(fs::path(out_csv).parent_path().empty()
                                   ? "."
                                   : fs::path(out_csv).parent_path().string());
        std::ofstream f(out_csv);
        if (!f) throw Error(ErrorCode::Io, "cannot write " + out_csv);
        f << csv;
        out << "report: " << out_csv << "\n";
    }
    return 0;
}

int cmd_traindata_sft(const RunConfig& cfg, const std::string& library_flag,
                      const std::string& out_path, std::ostream& out) {
    const TemplateLibrary lib = load_library(resolve_library(library_flag, cfg));
    const auto records = build_sft_dataset(lib);
    const auto n = emit_dataset(records, out_path);
    out << "wrote " << n << " sft records to " << out_path << "\n";
    return 0;
}

int cmd_traindata_pairs(const RunConfig& cfg, const std::string& sets_path, int samples,
                        int max_pairs, long long base_seed, const std::string& out_path,
                        std::ostream& out) {
    require_backends(cfg);
    if (samples < 2) throw Error(ErrorCode::Usage, "--samples must be >= 2");
    const auto sets = load_similar_sets(sets_path);
    const TemplateIndex idx = build_index(load_library(cfg.library_path));

    std::vector<PreferencePair> all_pairs;
    std::map<std::string, std::string> prompts;
    for (const auto& sim : sets) {
        const ProblemAbstraction a =
            abstract_problem(sim.anchor, cfg.navigator_backend, cfg.navigator_cfg);
        prompts[sim.anchor.id] =
            build_plan_request(a, cfg.navigator_cfg).messages.back().content;
        std::vector<std::pair<ThoughtTrajectory, double>> sampled;
        for (int s = 0; s < samples; ++s) {
            ThoughtTrajectory traj =
                plan_trajectory(a, cfg.navigator_backend, cfg.navigator_cfg, kTempSampling,
                                base_seed + s);
            traj.version = s; // sampling order; pair tie-breaks use it
            const RewardReport report =
                trajectory_reward(traj, sim, idx, cfg.inference_backend);
            out << sim.anchor.id << " sample " << s << ": reward "
                << format_fixed(report.reward, 4) << "\n";
            sampled.emplace_back(std::move(traj), report.reward);
        }
        auto pairs =
            build_preference_pairs(sim.anchor.id, sampled, static_cast<std::size_t>(max_pairs));
        all_pairs.insert(all_pairs.end(), pairs.begin(), pairs.end());
    }
    const auto n = emit_dataset(all_pairs, prompts, out_path);
    out << "wrote " << n << " preference pairs to " << out_path << "\n";
    return 0;
}

int cmd_extract(const RunConfig& cfg, const std::string& corpus_path, const std::string& staging,
                std::ostream& out) {
    require_backends(cfg);
    const json corpus = json::parse(slurp(corpus_path));
    if (!corpus.is_array() || corpus.empty()) {
        throw Error(ErrorCode::Usage, "empty extraction corpus: " + corpus_path);
    }
    std::size_t accepted = 0, rejected = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& rec = corpus[i];
        const std::string where = corpus_path + "[" + std::to_string(i) + "]";
        if (!rec.contains("problem") || !rec.contains("solution")) {
            throw Error(ErrorCode::Parse, where + ": record needs 'problem' and 'solution'");
        }
        const auto reply = generate(cfg.navigator_backend,
                                    build_extract_request(rec.at("problem").get<std::string>(),
                                                          rec.at("solution").get<std::string>()));
        std::vector<std::string> reasons;
        try {
            const auto blocks = extract_fenced_blocks(reply.text);
            if (blocks.empty() || blocks.front().tag != "template") {
                throw Error(ErrorCode::Parse, "reply has no fenced `template` block");
            }
            const Template t = template_from_json_text(blocks.front().body, where);
            reasons = validate(t);
            if (reasons.empty()) {
                write_template_file(t, staging);
                ++accepted;
                out << where << ": staged " << t.id << "\n";
                continue;
            }
        } catch (const Error& e) {
            reasons.push_back(e.what());
        }
        ++rejected;
        out << where << ": rejected\n";
        for (const auto& r : reasons) out << "  - " << r << "\n";
    }
    out << "accepted " << accepted << ", rejected " << rejected << "; staging dir: " << staging
        << "\n";
    return 0;
}

int cmd_bench_tradeoff(std::uint64_t seed, int per_tier, double hint_quality, long long bon_cap,
                       std::uint64_t mcts_iters, const std::string& out_dir, std::ostream& out) {
    SyntheticEnvironment env;
    env.rng_seed = seed;
    env.guided_hint_quality = hint_quality;
    const auto tasks = gen_tasks(seed, per_tier);
    CompareConfig cfg;
    cfg.best_of_n_cap = bon_cap;
    cfg.mcts.max_iterations = mcts_iters;
    const auto reports = compare(env, tasks, cfg);
    const std::string csv = tradeoff_csv(reports);
    fs::create_directories(out_dir);
    const std::string path = (fs::path(out_dir) / "tradeoff.csv").string();
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
    f << csv;
    out << csv;
    out << "wrote " << path << "\n";
    return 0;
}

int cmd_bench_scaling(const std::string& transcripts_dir, const std::string& out_dir,
                      std::ostream& out) {
    std::vector<InterplayTranscript> transcripts;
    for (const auto& file : sorted_json_files(transcripts_dir)) {
        transcripts.push_back(read_transcript(file));
    }
    const auto rows = scaling_report(transcripts);
    const std::string csv = scaling_csv(rows);
    fs::create_directories(out_dir);
    const std::string path = (fs::path(out_dir) / "scaling.csv").string();
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
    f << csv;
    out << csv;
    out << "wrote " << path << "\n";
    return 0;
}

} // namespace

std::string expand_env(const std::string& value) {
    std::string out;
    std::size_t i = 0;
    while (i < value.size()) {
        if (value[i] == '$' && i + 1 < value.size() && value[i + 1] == '{') {
            const auto close = value.find('}', i + 2);
            if (close != std::string::npos) {
                const std::string name = value.substr(i + 2, close - i - 2);
                if (const char* v = std::getenv(name.c_str())) {
                    out += v;
                } else {
                    log_warn("config references unset environment variable '" + name + "'");
                }
                i = close + 1;
                continue;
            }
        }
        out.push_back(value[i]);
        ++i;
    }
    return out;
}

RunConfig load_run_config(const std::string& path) {
    json j;
    try {
        j = json::parse(slurp(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, path + ": invalid JSON: " + e.what());
    }
    RunConfig cfg;
    if (j.contains("library_path")) {
        cfg.library_path = expand_env(j.at("library_path").get<std::string>());
    }
    if (j.contains("output_dir")) cfg.output_dir = expand_env(j.at("output_dir").get<std::string>());
    if (j.contains("navigator_backend") && j.contains("inference_backend")) {
        cfg.navigator_backend = backend_from_json(j.at("navigator_backend"), path);
        cfg.inference_backend = backend_from_json(j.at("inference_backend"), path);
        cfg.has_backends = true;
    }
    if (j.contains("navigator")) {
        const auto& n = j.at("navigator");
        if (n.contains("max_rounds")) cfg.navigator_cfg.max_rounds = n.at("max_rounds").get<int>();
        if (n.contains("max_steps")) cfg.navigator_cfg.max_steps = n.at("max_steps").get<int>();
        if (n.contains("max_parse_retries")) {
            cfg.navigator_cfg.max_parse_retries = n.at("max_parse_retries").get<int>();
        }
    }
    return cfg;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"ReasonFlux: hierarchical reasoning with a thought-template library"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;
    long long seed = 7;
    app.add_option("--config", config_path, "JSON run config");
    app.add_option("--output", output_dir, "output directory (overrides config)");
    app.add_option("--seed", seed, "seed for sampling and benchmarks");

    // library
    auto* lib_cmd = app.add_subcommand("library", "template library management");
    lib_cmd->require_subcommand(1);
    std::string lib_path;
    auto* lib_validate = lib_cmd->add_subcommand("validate", "validate every record");
    lib_validate->add_option("path", lib_path, "library directory");
    auto* lib_index = lib_cmd->add_subcommand("index", "write the library manifest");
    lib_index->add_option("path", lib_path, "library directory");
    auto* lib_search = lib_cmd->add_subcommand("search", "ranked keyword search");
    std::string q_name, q_tags;
    std::size_t top_k = 5;
    lib_search->add_option("path", lib_path, "library directory");
    lib_search->add_option("--name", q_name, "template name query");
    lib_search->add_option("--tags", q_tags, "tag keywords");
    lib_search->add_option("-k,--top", top_k, "max hits");

    // solve
    auto* solve_cmd = app.add_subcommand("solve", "run the interplay loop on one problem");
    std::string problem_path, transcript_out;
    int max_rounds_override = -1;
    solve_cmd->add_option("--problem", problem_path, "problem JSON file")->required();
    solve_cmd->add_option("--transcript-out", transcript_out, "exact transcript path");
    solve_cmd->add_option("--max-rounds", max_rounds_override, "override max interplay rounds");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "direct vs template-guided accuracy");
    std::string eval_problems, eval_mode, eval_csv;
    eval_cmd->add_option("--problems", eval_problems, "problem set JSON file")->required();
    eval_cmd->add_option("--mode", eval_mode, "direct or with_template")
        ->required()
        ->check(CLI::IsMember({"direct", "with_template"}));
    eval_cmd->add_option("--out", eval_csv, "CSV report path");

    // traindata
    auto* train_cmd = app.add_subcommand("traindata", "emit training datasets");
    train_cmd->require_subcommand(1);
    auto* sft_cmd = train_cmd->add_subcommand("sft", "structure-finetuning records");
    std::string sft_library, sft_out;
    sft_cmd->add_option("--library", sft_library, "library directory");
    sft_cmd->add_option("--out", sft_out, "output JSONL path");
    auto* pairs_cmd = train_cmd->add_subcommand("pairs", "preference pairs from sampled trajectories");
    std::string sets_path, pairs_out;
    int samples = 4, max_pairs = 8;
    pairs_cmd->add_option("--sets", sets_path, "similar-problem sets JSON")->required();
    pairs_cmd->add_option("--samples", samples, "trajectories sampled per problem");
    pairs_cmd->add_option("--max-pairs", max_pairs, "pair cap per problem");
    pairs_cmd->add_option("--out", pairs_out, "output JSONL path");

    // extract
    auto* extract_cmd = app.add_subcommand("extract", "distill templates from worked solutions");
    std::string corpus_path, staging_dir;
    extract_cmd->add_option("--corpus", corpus_path, "corpus JSON of {problem, solution}")
        ->required();
    extract_cmd->add_option("--staging", staging_dir, "staging directory for candidates");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "seeded benchmark studies");
    bench_cmd->require_subcommand(1);
    auto* tradeoff_cmd = bench_cmd->add_subcommand("tradeoff", "guided vs Best-of-N vs MCTS cost");
    int per_tier = 10;
    double hint_quality = 0.85;
    long long bon_cap = 50000000;
    std::uint64_t mcts_iters = 3000000;
    tradeoff_cmd->add_option("--per-tier", per_tier, "tasks per difficulty tier");
    tradeoff_cmd->add_option("--hint-quality", hint_quality, "guided hint quality in [0,1]");
    tradeoff_cmd->add_option("--bon-cap", bon_cap, "Best-of-N trajectory cap");
    tradeoff_cmd->add_option("--mcts-iters", mcts_iters, "MCTS iteration cap");
    auto* scaling_cmd = bench_cmd->add_subcommand("scaling", "rounds/templates by difficulty tier");
    std::string transcripts_dir;
    scaling_cmd->add_option("--transcripts", transcripts_dir, "directory of transcript JSON files")
        ->required();

    for (CLI::App* sub :
         {lib_cmd, lib_validate, lib_index, lib_search, solve_cmd, eval_cmd, train_cmd, sft_cmd,
          pairs_cmd, extract_cmd, bench_cmd, tradeoff_cmd, scaling_cmd}) {
        sub->fallthrough();
    }

    std::vector<const char*> argv;
    argv.push_back("reasonflux");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_run_config(config_path);
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (max_rounds_override > 0) cfg.navigator_cfg.max_rounds = max_rounds_override;

        if (lib_validate->parsed()) {
            return cmd_library_validate(resolve_library(lib_path, cfg), out, err);
        }
        if (lib_index->parsed()) return cmd_library_index(resolve_library(lib_path, cfg), out);
        if (lib_search->parsed()) {
            return cmd_library_search(resolve_library(lib_path, cfg), q_name, q_tags, top_k, out);
        }
        if (solve_cmd->parsed()) return cmd_solve(cfg, problem_path, transcript_out, out);
        if (eval_cmd->parsed()) {
            if (eval_csv.empty()) {
                eval_csv = (fs::path(cfg.output_dir) / ("eval_" + eval_mode + ".csv")).string();
            }
            return cmd_eval(cfg, eval_problems, eval_mode, eval_csv, out);
        }
        if (sft_cmd->parsed()) {
            if (sft_out.empty()) sft_out = (fs::path(cfg.output_dir) / "sft.jsonl").string();
            fs::create_directories(fs::path(sft_out).parent_path());
            return cmd_traindata_sft(cfg, sft_library, sft_out, out);
        }
        if (pairs_cmd->parsed()) {
            if (pairs_out.empty()) pairs_out = (fs::path(cfg.output_dir) / "pairs.jsonl").string();
            fs::create_directories(fs::path(pairs_out).parent_path());
            return cmd_traindata_pairs(cfg, sets_path, samples, max_pairs, seed, pairs_out, out);
        }
        if (extract_cmd->parsed()) {
            if (staging_dir.empty()) {
                staging_dir = (fs::path(cfg.output_dir) / "staged_templates").string();
            }
            return cmd_extract(cfg, corpus_path, staging_dir, out);
        }
        if (tradeoff_cmd->parsed()) {
            return cmd_bench_tradeoff(static_cast<std::uint64_t>(seed), per_tier, hint_quality,
                                      bon_cap, mcts_iters, cfg.output_dir, out);
        }
        if (scaling_cmd->parsed()) {
            return cmd_bench_scaling(transcripts_dir, cfg.output_dir, out);
        }
        err << "usage error: no command\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace rf
