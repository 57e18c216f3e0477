#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "moma/memory.hpp"
#include "moma/percept.hpp"
#include "moma/prompt.hpp"
#include "moma/skills.hpp"
#include "moma/solver.hpp"

namespace moma {

// Structured sidecar the scripted backends read; live backends see only the
// rendered prompt.
struct DecisionContext {
    const WorldState* ws = nullptr;
    const Solver* solver = nullptr;
    const ShortTermMemory* stm = nullptr;
    std::string stage;  // "stage1" or "stage2"
    std::string skill;  // stage2: the selected skill
    std::string slot;   // stage2: slot kind
    int slot_index = 0;
    const MarkerSet* markers = nullptr;  // stage2
    std::string ground_truth;  // offline eval: desired resolved value
    std::string group;         // error-profile key override
    bool use_descriptions = false;  // answer with a description instead of a marker
};

struct BackendRequest {
    Prompt prompt;
    DecisionContext ctx;
};

struct BackendResponse {
    std::string text;
    double latency_ms = 0;
    std::string provider;
};

class BackendError : public std::runtime_error {
public:
    BackendError(std::string what, bool transport, double retry_after_s = 0)
        : std::runtime_error(std::move(what)), transport(transport), retry_after_s(retry_after_s) {}
    bool transport = false;
    double retry_after_s = 0;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual BackendResponse complete(const BackendRequest& request) = 0;
    virtual std::string name() const = 0;
};

struct OracleErrorProfile {
    std::map<std::string, double> wrong_param_prob;  // keyed by skill or group
    double wrong_skill_prob = 0;
    uint64_t seed = 0;

    double prob_for(const std::string& key) const {
        auto it = wrong_param_prob.find(key);
        return it == wrong_param_prob.end() ? 0.0 : it->second;
    }
};

// Scripted responder with world access; emits ground-truth decisions in the
// engine's parse format, optionally corrupted by the seeded error profile.
class OracleBackend : public Backend {
public:
    explicit OracleBackend(OracleErrorProfile profile = {});
    BackendResponse complete(const BackendRequest& request) override;
    std::string name() const override { return "oracle"; }

private:
    OracleErrorProfile profile_;
    SkillRegistry registry_;
    uint64_t query_count_ = 0;
};

// Oracle that answers designated skills wrongly unless a matching lesson
// text appears in the prompt. Used to demonstrate long-term-memory efficacy.
class LessonSensitiveBackend : public Backend {
public:
    struct Rule {
        std::string trigger;  // lesson text that unlocks the correct answer
        std::function<std::string(const BackendRequest&)> wrong_value;
    };

    explicit LessonSensitiveBackend(std::map<std::string, Rule> rules);
    BackendResponse complete(const BackendRequest& request) override;
    std::string name() const override { return "lesson-oracle"; }

private:
    OracleBackend oracle_;
    std::map<std::string, Rule> rules_;
};

struct LoggedExchange {
    uint64_t request_hash = 0;
    std::string stage;
    std::string response;

    nlohmann::json to_json() const;
    static LoggedExchange from_json(const nlohmann::json& j);
};

// Replays logged responses in order; a mismatched request hash means the
// prompts drifted and is reported as an error.
class ReplayBackend : public Backend {
public:
    explicit ReplayBackend(std::vector<LoggedExchange> exchanges);
    BackendResponse complete(const BackendRequest& request) override;
    std::string name() const override { return "replay"; }

private:
    std::vector<LoggedExchange> exchanges_;
    size_t next_ = 0;
};

struct HttpBackendConfig {
    std::string base_url;  // e.g. https://api.example.com
    std::string path = "/v1/chat/completions";
    std::string model;
    double temperature = 0;
    int max_tokens = 1024;
    std::string api_key_env = "MOMA_API_KEY";
    int timeout_s = 60;
};

// Provider-agnostic chat-completions client; images travel as base64 PNG
// data URLs inside the message content.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    BackendResponse complete(const BackendRequest& request) override;
    std::string name() const override { return "http"; }

    // Exposed for tests.
    nlohmann::json build_payload(const BackendRequest& request) const;

private:
    HttpBackendConfig config_;
};

std::vector<LoggedExchange> load_exchange_log(const std::string& path);
void save_exchange_log(const std::string& path, const std::vector<LoggedExchange>& exchanges);

}  // namespace moma
