#include "reasonflux/template_store.hpp"

#include "reasonflux/errors.hpp"
#include "reasonflux/textutil.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace rf {

namespace {

const char* const kKindNames[] = {
    "problem_solving_method",
    "secondary_conclusion",
    "property_theorem",
    "knowledge_application",
    "formula_rule",
};

json example_to_json(const WorkedExample& e) {
    json j;
    j["problem"] = e.problem;
    j["solution_steps"] = e.solution_steps;
    j["answer"] = e.answer ? json(*e.answer) : json(nullptr);
    return j;
}

json template_to_json(const Template& t) {
    json j;
    j["name"] = t.name;
    j["kind"] = to_string(t.kind);
    j["tags"] = t.tags;
    j["description"] = t.description;
    j["scope"] = t.scope;
    j["application_steps"] = t.application_steps;
    json exs = json::array();
    for (const auto& e : t.examples) exs.push_back(example_to_json(e));
    j["examples"] = exs;
    return j;
}

std::string require_string(const json& j, const std::string& key, const std::string& file) {
    if (!j.contains(key) || !j.at(key).is_string()) {
        throw Error(ErrorCode::Parse, file + ": field '" + key + "' missing or not a string");
    }
    return j.at(key).get<std::string>();
}

std::vector<std::string> require_string_array(const json& j, const std::string& key,
                                              const std::string& file) {
    if (!j.contains(key) || !j.at(key).is_array()) {
        throw Error(ErrorCode::Parse, file + ": field '" + key + "' missing or not an array");
    }
    std::vector<std::string> out;
    for (const auto& v : j.at(key)) {
        if (!v.is_string()) {
            throw Error(ErrorCode::Parse, file + ": field '" + key + "' has a non-string entry");
        }
        out.push_back(v.get<std::string>());
    }
    return out;
}

Template template_from_json(const json& j, const std::string& file) {
    if (!j.is_object()) throw Error(ErrorCode::Parse, file + ": record is not a JSON object");
    static const std::set<std::string> keys = {"name",        "kind",  "tags",
                                               "description", "scope", "application_steps",
                                               "examples"};
    for (const auto& [key, _] : j.items()) {
        if (!keys.count(key)) {
            throw Error(ErrorCode::Parse, file + ": unknown field '" + key + "'");
        }
    }
    Template t;
    t.name = require_string(j, "name", file);
    const std::string kind_s = require_string(j, "kind", file);
    auto kind = template_kind_from_string(kind_s);
    if (!kind) throw Error(ErrorCode::Parse, file + ": field 'kind' has unknown value '" + kind_s + "'");
    t.kind = *kind;
    t.tags = require_string_array(j, "tags", file);
    t.description = require_string(j, "description", file);
    t.scope = require_string(j, "scope", file);
    t.application_steps = require_string_array(j, "application_steps", file);
    if (!j.contains("examples") || !j.at("examples").is_array()) {
        throw Error(ErrorCode::Parse, file + ": field 'examples' missing or not an array");
    }
    for (const auto& ej : j.at("examples")) {
        WorkedExample e;
        e.problem = require_string(ej, "problem", file);
        e.solution_steps = require_string_array(ej, "solution_steps", file);
        if (!ej.contains("answer")) {
            throw Error(ErrorCode::Parse, file + ": example field 'answer' missing (use null)");
        }
        if (ej.at("answer").is_string()) {
            e.answer = ej.at("answer").get<std::string>();
        } else if (!ej.at("answer").is_null()) {
            throw Error(ErrorCode::Parse, file + ": example field 'answer' must be string or null");
        }
        t.examples.push_back(std::move(e));
    }
    t.id = slugify(t.name);
    return t;
}

} // namespace

std::string to_string(TemplateKind k) {
    return kKindNames[static_cast<int>(k)];
}

std::optional<TemplateKind> template_kind_from_string(const std::string& s) {
    for (int i = 0; i < 5; ++i) {
        if (s == kKindNames[i]) return static_cast<TemplateKind>(i);
    }
    return std::nullopt;
}

const Template* TemplateLibrary::find(const std::string& id) const {
    for (const auto& t : templates) {
        if (t.id == id) return &t;
    }
    return nullptr;
}

std::vector<std::string> validate(const Template& t) {
    std::vector<std::string> violations;
    if (trim(t.name).empty()) violations.push_back("name: empty");
    if (t.id != slugify(t.name)) violations.push_back("id: not the slug of name");
    if (t.tags.empty()) violations.push_back("tags: empty");
    for (const auto& tag : t.tags) {
        if (trim(tag).empty()) {
            violations.push_back("tags: contains an empty tag");
            break;
        }
    }
    if (trim(t.description).empty()) violations.push_back("description: empty");
    if (trim(t.scope).empty()) violations.push_back("scope: empty");
    if (t.application_steps.empty()) violations.push_back("application_steps: empty");
    for (std::size_t i = 0; i < t.examples.size(); ++i) {
        const auto& e = t.examples[i];
        const std::string where = "examples[" + std::to_string(i) + "]";
        if (trim(e.problem).empty()) violations.push_back(where + ".problem: empty");
        if (e.solution_steps.empty()) violations.push_back(where + ".solution_steps: empty");
    }
    return violations;
}

TemplateLibrary load_library(const std::string& path) {
    if (!fs::exists(path)) throw Error(ErrorCode::Io, "library path does not exist: " + path);
    if (!fs::is_directory(path)) throw Error(ErrorCode::Io, "library path is not a directory: " + path);

    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(path)) {
        if (!entry.is_regular_file()) continue;
        const auto name = entry.path().filename().string();
        if (name == "library.lock.json") continue;
        if (entry.path().extension() == ".json") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error(ErrorCode::Validation, "empty library: " + path);

    TemplateLibrary lib;
    std::map<std::string, std::string> seen; // id -> file
    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in) throw Error(ErrorCode::Io, "cannot read " + file);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw Error(ErrorCode::Parse, file + ": invalid JSON: " + e.what());
        }
        Template t = template_from_json(j, file);
        auto violations = validate(t);
        if (!violations.empty()) {
            std::string msg = file + ": invalid template:";
            for (const auto& v : violations) msg += " [" + v + "]";
            throw Error(ErrorCode::Parse, msg);
        }
        auto [it, inserted] = seen.emplace(t.id, file);
        if (!inserted) {
            throw Error(ErrorCode::Validation,
                        "duplicate template id '" + t.id + "' in " + file + " and " + it->second);
        }
        lib.templates.push_back(std::move(t));
    }
    return lib;
}

std::string template_content_hash(const Template& t) {
    return to_hex(fnv1a(template_to_json(t).dump()));
}

Template template_from_json_text(const std::string& text, const std::string& where) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, where + ": invalid JSON: " + e.what());
    }
    return template_from_json(j, where);
}

void write_template_file(const Template& t, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create directory: " + dir);
    const std::string file = (fs::path(dir) / (t.id + ".json")).string();
    std::ofstream out(file);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + file);
    out << template_to_json(t).dump(2) << "\n";
}

void write_library_manifest(const TemplateLibrary& lib, const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create library directory: " + path);
    json manifest;
    json entries = json::array();
    std::string combined;
    for (const auto& t : lib.templates) {
        const std::string h = template_content_hash(t);
        entries.push_back(json{{"id", t.id}, {"hash", h}});
        combined += t.id + ":" + h + "\n";
    }
    manifest["templates"] = entries;
    manifest["library_hash"] = to_hex(fnv1a(combined));
    const std::string lock = (fs::path(path) / "library.lock.json").string();
    std::ofstream out(lock);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + lock);
    out << manifest.dump(2) << "\n";
}

void save_library(const TemplateLibrary& lib, const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create library directory: " + path);
    for (const auto& t : lib.templates) {
        const std::string file = (fs::path(path) / (t.id + ".json")).string();
        std::ofstream out(file);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + file);
        out << template_to_json(t).dump(2) << "\n";
    }
    write_library_manifest(lib, path);
}

TemplateIndex build_index(const TemplateLibrary& lib) {
    TemplateIndex idx;
    idx.library = lib;
    for (const auto& t : lib.templates) {
        idx.exact_name[slugify(t.name)] = t.id;
        for (const auto& tok : token_set(t.tags)) idx.tag_postings[tok].insert(t.id);
        for (const auto& tok : tokenize(t.name)) idx.name_postings[tok].insert(t.id);
    }
    return idx;
}

std::vector<SearchHit> search(const TemplateIndex& idx, const SearchQuery& q, std::size_t k) {
    if (k < 1) throw Error(ErrorCode::Validation, "search: k must be >= 1");
    if (q.empty()) throw Error(ErrorCode::Validation, "search: empty query");

    const std::set<std::string> q_tag_tokens = token_set(q.tags);
    const std::set<std::string> q_name_tokens =
        q.name ? token_set({*q.name}) : std::set<std::string>{};

    std::optional<std::string> exact_id;
    if (q.name) {
        auto it = idx.exact_name.find(slugify(*q.name));
        if (it != idx.exact_name.end()) exact_id = it->second;
    }

    std::vector<SearchHit> hits;
    for (const auto& t : idx.library.templates) {
        if (exact_id && t.id == *exact_id) {
            hits.push_back({t.id, kExactNameScore, MatchKind::ExactName});
            continue;
        }
        const double score = 2.0 * jaccard(q_tag_tokens, token_set(t.tags)) +
                             1.0 * jaccard(q_name_tokens, token_set({t.name}));
        if (score > 0.0) hits.push_back({t.id, score, MatchKind::Lexical});
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.template_id < b.template_id;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

TrajectoryRetrieval retrieve_for_trajectory(const TemplateIndex& idx,
                                            const std::vector<SearchQuery>& steps) {
    if (steps.empty()) throw Error(ErrorCode::Validation, "retrieve_for_trajectory: no steps");
    if (std::all_of(steps.begin(), steps.end(), [](const SearchQuery& s) { return s.empty(); })) {
        throw Error(ErrorCode::Validation, "retrieve_for_trajectory: every step query is empty");
    }

    TrajectoryRetrieval out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        std::vector<SearchHit> hits;
        if (!steps[i].empty()) hits = search(idx, steps[i], 1);
        if (hits.empty()) {
            Template marker;
            marker.id = kNoMatchTemplateId;
            marker.name = "(no matching template)";
            out.templates.push_back(std::move(marker));
            out.unmatched.push_back(i);
        } else {
            const Template* t = idx.library.find(hits.front().template_id);
            out.templates.push_back(*t);
        }
    }
    return out;
}

} // namespace rf
