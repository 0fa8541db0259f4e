#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rf {

enum class Role { System, User, Assistant };

std::string to_string(Role r);

struct ChatMessage {
    Role role = Role::User;
    std::string content;
};

struct GenerationRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.7;
    int max_tokens = 1024;
    std::optional<long long> seed;
};

struct GenerationResult {
    std::string text;
    std::optional<std::vector<std::pair<std::string, double>>> token_logprobs;
    std::string backend_id;
    long long latency_ms = 0;
};

/// Per-request slot in a batch; errors are reported positionally without
/// aborting the batch.
struct GenerationOutcome {
    std::optional<GenerationResult> result;
    std::string error;

    bool ok() const { return result.has_value(); }
};

struct MockEntry {
    std::string text;
    std::optional<std::vector<std::pair<std::string, double>>> token_logprobs;
};

/// Canned replies keyed by request fingerprint. A script answers every
/// fingerprint used in a test or the mock fails loudly. `fallback_replies`,
/// when nonempty, are served cyclically on a fingerprint miss instead of
/// failing; adversarial-input tests use this to feed arbitrary reply
/// sequences through a deterministic backend.
struct MockScript {
    std::map<std::string, MockEntry> entries;
    std::vector<std::string> fallback_replies;

    std::size_t fallback_cursor = 0;
    std::mutex mutex;
};

enum class BackendKind { HttpOpenAiCompatible, ScriptedMock };

inline constexpr const char* kDefaultApiKeyEnv = "REASONFLUX_API_KEY";

/// Shareable handle to a text-generation backend. HTTP backends read the
/// API key only from the named environment variable, never from config
/// values, and the key never appears in logs or serialized artifacts.
struct BackendSpec {
    BackendKind kind = BackendKind::ScriptedMock;
    std::string base_url;            // http only
    std::string model = "mock";
    std::string api_key_env = kDefaultApiKeyEnv;
    std::shared_ptr<MockScript> script; // mock only

    std::string id() const;
};

struct PromptTemplate {
    std::string id;
    std::string body; // named {placeholder} slots
};

/// Substitute {name} placeholders (single pass; binding values are inserted
/// verbatim, never re-scanned). Throws Error{Parse} naming any placeholder
/// without a binding; bindings without a placeholder only warn.
std::string render_prompt(const PromptTemplate& pt,
                          const std::map<std::string, std::string>& bindings);

/// Stable fingerprint of (messages, temperature, seed); mock scripts key on it.
std::string request_fingerprint(const GenerationRequest& r);

/// Fingerprint for a (prompt, completion) log-probability query.
std::string logprob_fingerprint(const std::string& prompt, const std::string& completion);

/// One generation. Mock: canned reply for the request fingerprint (or next
/// fallback reply). HTTP: POST {base_url}/v1/chat/completions, retrying
/// transient failures (connect errors, 429, 5xx) with exponential backoff —
/// base 0.5 s, factor 2, at most 5 attempts; other 4xx fail immediately.
GenerationResult generate(const BackendSpec& b, const GenerationRequest& r);

/// Batch generation with at most max_in_flight requests outstanding.
/// Results align positionally with the inputs.
std::vector<GenerationOutcome> generate_many(const BackendSpec& b,
                                             const std::vector<GenerationRequest>& rs,
                                             std::size_t max_in_flight);

/// Sum of completion-token log-probabilities under the backend. Empty
/// completion sums to 0. Throws Error{Unsupported} when the backend cannot
/// score a fixed completion (chat-completions HTTP endpoints cannot).
double sequence_logprob(const BackendSpec& b, const std::string& prompt,
                        const std::string& completion);

std::shared_ptr<MockScript> load_mock_script(const std::string& path);
void save_mock_script(const MockScript& script, const std::string& path);

/// Convenience for script authoring in tests and generators.
void script_reply(MockScript& script, const GenerationRequest& r, const std::string& text);
void script_logprobs(MockScript& script, const std::string& prompt, const std::string& completion,
                     const std::vector<std::pair<std::string, double>>& token_logprobs);

} // namespace rf
