#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rf {

/// The five template categories the library admits.
enum class TemplateKind {
    ProblemSolvingMethod,
    SecondaryConclusion,
    PropertyTheorem,
    KnowledgeApplication,
    FormulaRule,
};

std::string to_string(TemplateKind k);
std::optional<TemplateKind> template_kind_from_string(const std::string& s);

struct WorkedExample {
    std::string problem;
    std::vector<std::string> solution_steps;
    std::optional<std::string> answer;

    bool operator==(const WorkedExample&) const = default;
};

/// One structured thought template: a reusable problem-solving pattern with
/// retrieval metadata (name, tags), a description of the underlying
/// principle, the scope of problems it addresses, ordered application steps,
/// and worked examples.
struct Template {
    std::string id; // slugify(name)
    std::string name;
    TemplateKind kind = TemplateKind::ProblemSolvingMethod;
    std::vector<std::string> tags;
    std::string description;
    std::string scope;
    std::vector<std::string> application_steps;
    std::vector<WorkedExample> examples;

    bool operator==(const Template&) const = default;
};

struct TemplateLibrary {
    std::vector<Template> templates;

    std::size_t size() const { return templates.size(); }
    const Template* find(const std::string& id) const;
};

/// Keyword index over the library. Immutable after construction; safe for
/// unlimited concurrent readers.
struct TemplateIndex {
    std::map<std::string, std::set<std::string>> tag_postings;  // token -> ids
    std::map<std::string, std::set<std::string>> name_postings; // token -> ids
    std::map<std::string, std::string> exact_name;              // slug -> id
    TemplateLibrary library;
};

struct SearchQuery {
    std::optional<std::string> name;
    std::vector<std::string> tags;

    bool empty() const { return (!name || name->empty()) && tags.empty(); }
};

enum class MatchKind { ExactName, Lexical };

struct SearchHit {
    std::string template_id;
    double score = 0.0;
    MatchKind matched_on = MatchKind::Lexical;
};

/// Score an exact normalized-name match above the lexical ceiling
/// (2·tag-Jaccard + 1·name-Jaccard ≤ 3) so result lists stay sorted by
/// (score desc, template_id asc) while exact matches hold rank 1.
inline constexpr double kExactNameScore = 4.0;

/// Marker id surfaced when a trajectory step retrieves nothing; the caller
/// decides how to replan.
inline constexpr const char* kNoMatchTemplateId = "__no_match__";

/// Per-step retrieval outcome for a whole trajectory.
struct TrajectoryRetrieval {
    std::vector<Template> templates;      // one per step; marker template when unmatched
    std::vector<std::size_t> unmatched;   // 0-based step positions with no hit
};

/// Empty list iff all Template invariants hold; each violation names the
/// offending field.
std::vector<std::string> validate(const Template& t);

/// Load a library directory of one-record-per-file JSON templates.
/// Throws Error{Io} on a missing path, Error{Parse} on a malformed record
/// (message carries file and field), Error{Validation} on duplicate ids or
/// an empty library.
TemplateLibrary load_library(const std::string& path);

/// Write one `<id>.json` per template plus a `library.lock.json` manifest
/// (ids and content hashes). Loading the directory back reproduces the
/// library field-by-field.
void save_library(const TemplateLibrary& lib, const std::string& path);

/// Write only the `library.lock.json` manifest for an existing directory.
void write_library_manifest(const TemplateLibrary& lib, const std::string& path);

/// Deterministic content hash of a single template record.
std::string template_content_hash(const Template& t);

/// Parse one template record from JSON text (the library file schema).
/// `where` labels error messages. Throws Error{Parse}; does not validate.
Template template_from_json_text(const std::string& text, const std::string& where);

/// Write a single `<id>.json` record under `dir`.
void write_template_file(const Template& t, const std::string& dir);

TemplateIndex build_index(const TemplateLibrary& lib);

/// Ranked keyword search. If the query name normalizes to a known template
/// name, that template is rank 1 with MatchKind::ExactName; all other hits
/// score 2·Jaccard(query tag tokens, template tag tokens) +
/// 1·Jaccard(query name tokens, template name tokens). Zero-score hits are
/// dropped; ties break on template_id ascending. Throws Error{Validation}
/// on an empty query or k < 1.
std::vector<SearchHit> search(const TemplateIndex& idx, const SearchQuery& q, std::size_t k);

/// Top-1 retrieval per trajectory step (one template per step). Steps with
/// no hit yield the no-match marker template and are listed in `unmatched`.
/// Throws Error{Validation} when the step list is empty or every query is
/// empty.
TrajectoryRetrieval retrieve_for_trajectory(const TemplateIndex& idx,
                                            const std::vector<SearchQuery>& steps);

} // namespace rf
