#include "reasonflux/llm_gateway.hpp"

#include "reasonflux/errors.hpp"
#include "reasonflux/logging.hpp"
#include "reasonflux/textutil.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

using nlohmann::json;

namespace rf {

namespace {

constexpr int kRetryMaxAttempts = 5;
constexpr int kRetryBaseMs = 500;

bool is_placeholder_start(unsigned char c) {
    return std::isalpha(c) != 0 || c == '_';
}

bool is_placeholder_char(unsigned char c) {
    return std::isalnum(c) != 0 || c == '_';
}

std::string fingerprint_payload(const GenerationRequest& r) {
    std::string data;
    for (const auto& m : r.messages) {
        data += to_string(m.role);
        data += '\x1f';
        data += m.content;
        data += '\x1e';
    }
    data += "temp=" + format_fixed(r.temperature, 4);
    data += ";seed=" + (r.seed ? std::to_string(*r.seed) : std::string("none"));
    return data;
}

GenerationResult mock_generate(const BackendSpec& b, const GenerationRequest& r) {
    if (!b.script) throw Error(ErrorCode::Backend, "scripted mock has no script");
    const std::string fp = request_fingerprint(r);
    std::lock_guard<std::mutex> lock(b.script->mutex);
    auto it = b.script->entries.find(fp);
    GenerationResult out;
    out.backend_id = b.id();
    out.latency_ms = 0;
    if (it != b.script->entries.end()) {
        out.text = it->second.text;
        out.token_logprobs = it->second.token_logprobs;
        return out;
    }
    if (!b.script->fallback_replies.empty()) {
        const auto& pool = b.script->fallback_replies;
        out.text = pool[b.script->fallback_cursor % pool.size()];
        b.script->fallback_cursor++;
        return out;
    }
    throw Error(ErrorCode::Backend, "unscripted request (fingerprint " + fp + ")");
}

json request_to_wire(const BackendSpec& b, const GenerationRequest& r) {
    json messages = json::array();
    for (const auto& m : r.messages) {
        messages.push_back(json{{"role", to_string(m.role)}, {"content", m.content}});
    }
    json body{{"model", b.model},
              {"messages", messages},
              {"temperature", r.temperature},
              {"max_tokens", r.max_tokens},
              {"logprobs", true}};
    if (r.seed) body["seed"] = *r.seed;
    return body;
}

GenerationResult parse_chat_completion(const std::string& body, const BackendSpec& b,
                                       long long latency_ms) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("malformed chat-completions body: ") + e.what());
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
        throw Error(ErrorCode::Parse, "chat-completions body has no choices");
    }
    const json& choice = j["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content") ||
        !choice["message"]["content"].is_string()) {
        throw Error(ErrorCode::Parse, "chat-completions choice has no message content");
    }
    GenerationResult out;
    out.text = choice["message"]["content"].get<std::string>();
    out.backend_id = b.id();
    out.latency_ms = latency_ms;
    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
        std::vector<std::pair<std::string, double>> lps;
        for (const auto& e : choice["logprobs"]["content"]) {
            if (e.contains("token") && e.contains("logprob")) {
                lps.emplace_back(e["token"].get<std::string>(), e["logprob"].get<double>());
            }
        }
        out.token_logprobs = std::move(lps);
    }
    return out;
}

GenerationResult http_generate(const BackendSpec& b, const GenerationRequest& r) {
    if (b.base_url.empty()) throw Error(ErrorCode::Backend, "http backend has no base_url");
    httplib::Client client(b.base_url);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(60, 0);

    httplib::Headers headers;
    if (const char* key = std::getenv(b.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    const std::string payload = request_to_wire(b, r).dump();
    const auto start = std::chrono::steady_clock::now();
    std::string last_error;
    for (int attempt = 1; attempt <= kRetryMaxAttempts; ++attempt) {
        auto res = client.Post("/v1/chat/completions", headers, payload, "application/json");
        if (res) {
            if (res->status == 200) {
                const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                                         std::chrono::steady_clock::now() - start)
                                         .count();
                return parse_chat_completion(res->body, b, latency);
            }
            if (res->status >= 400 && res->status < 500 && res->status != 429) {
                throw Error(ErrorCode::Backend,
                            "chat-completions request failed with HTTP " +
                                std::to_string(res->status));
            }
            last_error = "HTTP " + std::to_string(res->status);
        } else {
            last_error = "connection failure (" + httplib::to_string(res.error()) + ")";
        }
        if (attempt < kRetryMaxAttempts) {
            const int delay_ms = kRetryBaseMs * (1 << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
        }
    }
    throw Error(ErrorCode::Backend, "chat-completions request failed after " +
                                        std::to_string(kRetryMaxAttempts) +
                                        " attempts: " + last_error);
}

} // namespace

std::string to_string(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

std::string BackendSpec::id() const {
    return (kind == BackendKind::ScriptedMock ? "mock:" : "http:") + model;
}

std::string render_prompt(const PromptTemplate& pt,
                          const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(pt.body.size());
    std::map<std::string, bool> used;
    const std::string& body = pt.body;
    std::size_t i = 0;
    while (i < body.size()) {
        if (body[i] == '{' && i + 1 < body.size() &&
            is_placeholder_start(static_cast<unsigned char>(body[i + 1]))) {
            std::size_t j = i + 1;
            while (j < body.size() && is_placeholder_char(static_cast<unsigned char>(body[j]))) ++j;
            if (j < body.size() && body[j] == '}') {
                const std::string name = body.substr(i + 1, j - i - 1);
                auto it = bindings.find(name);
                if (it == bindings.end()) {
                    throw Error(ErrorCode::Parse,
                                "render_prompt(" + pt.id + "): missing binding '" + name + "'");
                }
                out += it->second;
                used[name] = true;
                i = j + 1;
                continue;
            }
        }
        out.push_back(body[i]);
        ++i;
    }
    for (const auto& [name, _] : bindings) {
        if (!used.count(name)) {
            log_warn("render_prompt(" + pt.id + "): binding '" + name + "' has no placeholder");
        }
    }
    return out;
}

std::string request_fingerprint(const GenerationRequest& r) {
    return to_hex(fnv1a(fingerprint_payload(r)));
}

std::string logprob_fingerprint(const std::string& prompt, const std::string& completion) {
    std::string data = "logprob\x1f";
    data += prompt;
    data += '\x1e';
    data += completion;
    return to_hex(fnv1a(data));
}

GenerationResult generate(const BackendSpec& b, const GenerationRequest& r) {
    if (r.messages.empty()) throw Error(ErrorCode::Validation, "generate: no messages");
    if (r.messages.back().role != Role::User) {
        throw Error(ErrorCode::Validation, "generate: last message must be from the user");
    }
    if (b.kind == BackendKind::ScriptedMock) return mock_generate(b, r);
    return http_generate(b, r);
}

std::vector<GenerationOutcome> generate_many(const BackendSpec& b,
                                             const std::vector<GenerationRequest>& rs,
                                             std::size_t max_in_flight) {
    if (rs.empty()) throw Error(ErrorCode::Validation, "generate_many: empty batch");
    if (max_in_flight < 1) throw Error(ErrorCode::Validation, "generate_many: max_in_flight < 1");

    std::vector<GenerationOutcome> outcomes(rs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= rs.size()) return;
            try {
                outcomes[i].result = generate(b, rs[i]);
            } catch (const std::exception& e) {
                outcomes[i].error = e.what();
            }
        }
    };
    const std::size_t n_workers = std::min(max_in_flight, rs.size());
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    return outcomes;
}

double sequence_logprob(const BackendSpec& b, const std::string& prompt,
                        const std::string& completion) {
    if (completion.empty()) return 0.0;
    if (b.kind == BackendKind::HttpOpenAiCompatible) {
        throw Error(ErrorCode::Unsupported,
                    "backend '" + b.id() + "' cannot score a fixed completion");
    }
    if (!b.script) throw Error(ErrorCode::Backend, "scripted mock has no script");
    const std::string fp = logprob_fingerprint(prompt, completion);
    std::lock_guard<std::mutex> lock(b.script->mutex);
    auto it = b.script->entries.find(fp);
    if (it == b.script->entries.end()) {
        throw Error(ErrorCode::Backend, "unscripted logprob request (fingerprint " + fp + ")");
    }
    if (!it->second.token_logprobs) {
        throw Error(ErrorCode::Unsupported, "scripted entry has no token log-probabilities");
    }
    double sum = 0.0;
    for (const auto& [token, lp] : *it->second.token_logprobs) {
        (void)token;
        sum += lp;
    }
    return sum;
}

std::shared_ptr<MockScript> load_mock_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read mock script: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, path + ": invalid JSON: " + e.what());
    }
    auto script = std::make_shared<MockScript>();
    if (j.contains("entries")) {
        for (const auto& [fp, ej] : j["entries"].items()) {
            MockEntry e;
            e.text = ej.at("text").get<std::string>();
            if (ej.contains("token_logprobs") && !ej["token_logprobs"].is_null()) {
                std::vector<std::pair<std::string, double>> lps;
                for (const auto& p : ej["token_logprobs"]) {
                    lps.emplace_back(p.at(0).get<std::string>(), p.at(1).get<double>());
                }
                e.token_logprobs = std::move(lps);
            }
            script->entries.emplace(fp, std::move(e));
        }
    }
    if (j.contains("fallback") && j["fallback"].contains("replies")) {
        for (const auto& r : j["fallback"]["replies"]) {
            script->fallback_replies.push_back(r.get<std::string>());
        }
    }
    return script;
}

void save_mock_script(const MockScript& script, const std::string& path) {
    json entries = json::object();
    for (const auto& [fp, e] : script.entries) {
        json ej{{"text", e.text}};
        if (e.token_logprobs) {
            json lps = json::array();
            for (const auto& [tok, lp] : *e.token_logprobs) lps.push_back(json::array({tok, lp}));
            ej["token_logprobs"] = lps;
        } else {
            ej["token_logprobs"] = nullptr;
        }
        entries[fp] = ej;
    }
    json j{{"entries", entries}};
    if (!script.fallback_replies.empty()) {
        j["fallback"] = json{{"replies", script.fallback_replies}};
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write mock script: " + path);
    out << j.dump(2) << "\n";
}

void script_reply(MockScript& script, const GenerationRequest& r, const std::string& text) {
    script.entries[request_fingerprint(r)] = MockEntry{text, std::nullopt};
}

void script_logprobs(MockScript& script, const std::string& prompt, const std::string& completion,
                     const std::vector<std::pair<std::string, double>>& token_logprobs) {
    script.entries[logprob_fingerprint(prompt, completion)] = MockEntry{"", token_logprobs};
}

} // namespace rf
