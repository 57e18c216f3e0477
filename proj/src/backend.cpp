#include "moma/backend.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "moma/raster.hpp"

namespace moma {

namespace {

std::string answer_block(const std::string& reasoning, const std::string& body) {
    return reasoning + "\nanswer:\n" + body + "\n";
}

std::string describe_value(const DecisionContext& ctx, const Candidate& candidate) {
    // Natural-language description of the intended parameter, the way a
    // model would phrase it when no markers are offered.
    if (ctx.ws && ctx.ws->object(candidate.resolved_value)) {
        const Object* obj = ctx.ws->object(candidate.resolved_value);
        std::string desc;
        for (const auto& [k, v] : obj->attributes) {
            if (v == "true") {
                desc += k + " ";
            } else {
                desc += v + " ";
            }
        }
        desc += obj->category;
        return desc;
    }
    return candidate.label;
}

}  // namespace

OracleBackend::OracleBackend(OracleErrorProfile profile)
    : profile_(std::move(profile)), registry_(default_registry()) {}

BackendResponse OracleBackend::complete(const BackendRequest& request) {
    const DecisionContext& ctx = request.ctx;
    uint64_t draw_key = hash_combine(profile_.seed, ++query_count_);
    BackendResponse resp;
    resp.provider = "oracle";

    if (ctx.stage == "stage1") {
        if (!ctx.solver || !ctx.ws || !ctx.stm) {
            throw BackendError("oracle needs world access for stage 1", false);
        }
        SolverDecision d = ctx.solver->next(*ctx.ws, *ctx.stm);
        if (d.done) {
            resp.text = answer_block("The task looks complete.", "subtask: wait\nskill: none");
            return resp;
        }
        std::string skill = d.skill;
        if (unit_draw(draw_key) < profile_.wrong_skill_prob) {
            // Deterministic wrong-but-registered skill.
            const auto& all = registry_.all();
            for (size_t i = 0; i < all.size(); ++i) {
                if (all[i].name == skill) {
                    skill = all[(i + 1) % all.size()].name;
                    break;
                }
            }
        }
        resp.text = answer_block(
            "Considering the scene, the history so far, and the available skills, the next "
            "step is: " + d.subtask,
            "subtask: " + d.subtask + "\nskill: " + skill);
        return resp;
    }

    // Stage 2: choose the marker (or description) for the desired value.
    if (!ctx.markers || ctx.markers->markers.empty()) {
        throw BackendError("stage 2 request without candidates", false);
    }
    std::string desired = ctx.ground_truth;
    if (desired.empty() && ctx.solver && ctx.ws && ctx.stm) {
        SolverDecision d = ctx.solver->next(*ctx.ws, *ctx.stm);
        if (d.skill == ctx.skill &&
            ctx.slot_index < static_cast<int>(d.param_values.size())) {
            desired = d.param_values[ctx.slot_index];
        }
    }
    const auto& markers = ctx.markers->markers;
    size_t idx = 0;
    for (size_t i = 0; i < markers.size(); ++i) {
        if (markers[i].candidate.resolved_value == desired) {
            idx = i;
            break;
        }
    }
    std::string key = ctx.group.empty() ? ctx.skill : ctx.group;
    if (unit_draw(hash_combine(draw_key, 5)) < profile_.prob_for(key) && markers.size() > 1) {
        idx = (idx + 1) % markers.size();
    }
    if (ctx.use_descriptions) {
        resp.text = answer_block("The parameter that fits the subtask best is described below.",
                                 "choice: " + describe_value(ctx, markers[idx].candidate));
    } else {
        resp.text = answer_block("Comparing the marked candidates against the subtask.",
                                 "marker: " + std::to_string(markers[idx].id));
    }
    return resp;
}

LessonSensitiveBackend::LessonSensitiveBackend(std::map<std::string, Rule> rules)
    : oracle_(), rules_(std::move(rules)) {}

BackendResponse LessonSensitiveBackend::complete(const BackendRequest& request) {
    const DecisionContext& ctx = request.ctx;
    auto it = ctx.stage == "stage2" ? rules_.find(ctx.skill) : rules_.end();
    if (it == rules_.end() || request.prompt.contains(it->second.trigger)) {
        return oracle_.complete(request);
    }
    std::string wrong = it->second.wrong_value(request);
    if (ctx.markers) {
        for (const auto& m : ctx.markers->markers) {
            if (m.candidate.resolved_value == wrong) {
                BackendResponse resp;
                resp.provider = "lesson-oracle";
                resp.text = answer_block("Choosing what seems plausible at first glance.",
                                         "marker: " + std::to_string(m.id));
                return resp;
            }
        }
    }
    BackendResponse resp;
    resp.provider = "lesson-oracle";
    resp.text = answer_block("Choosing what seems plausible at first glance.",
                             "choice: " + wrong);
    return resp;
}

nlohmann::json LoggedExchange::to_json() const {
    return {{"request_hash", request_hash}, {"stage", stage}, {"response", response}};
}

LoggedExchange LoggedExchange::from_json(const nlohmann::json& j) {
    return {j.at("request_hash").get<uint64_t>(), j.value("stage", ""),
            j.at("response").get<std::string>()};
}

ReplayBackend::ReplayBackend(std::vector<LoggedExchange> exchanges)
    : exchanges_(std::move(exchanges)) {}

BackendResponse ReplayBackend::complete(const BackendRequest& request) {
    if (next_ >= exchanges_.size()) {
        throw BackendError("replay log exhausted", false);
    }
    const LoggedExchange& e = exchanges_[next_];
    if (e.request_hash != request.prompt.hash()) {
        throw BackendError("replay request hash mismatch at exchange " + std::to_string(next_),
                           false);
    }
    ++next_;
    BackendResponse resp;
    resp.provider = "replay";
    resp.text = e.response;
    return resp;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {}

nlohmann::json HttpBackend::build_payload(const BackendRequest& request) const {
    nlohmann::json content = nlohmann::json::array();
    for (const auto& part : request.prompt.parts) {
        if (part.kind == PromptPart::Kind::Text) {
            content.push_back({{"type", "text"}, {"text", part.text}});
        } else if (!part.image_png.empty()) {
            content.push_back(
                {{"type", "image_url"},
                 {"image_url",
                  {{"url", "data:image/png;base64," + base64_encode(part.image_png)}}}});
        }
    }
    return {{"model", config_.model},
            {"temperature", config_.temperature},
            {"max_tokens", config_.max_tokens},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})}};
}

BackendResponse HttpBackend::complete(const BackendRequest& request) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key) {
        throw BackendError("missing API key in env var " + config_.api_key_env, false);
    }
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_s);
    client.set_read_timeout(config_.timeout_s);
    httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};

    auto start = std::chrono::steady_clock::now();
    auto res = client.Post(config_.path, headers, build_payload(request).dump(),
                           "application/json");
    auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                  .count();
    if (!res) {
        throw BackendError("transport error: " + httplib::to_string(res.error()), true, 5);
    }
    if (res->status == 429 || res->status >= 500) {
        double retry = 5;
        if (res->has_header("Retry-After")) {
            retry = std::atof(res->get_header_value("Retry-After").c_str());
        }
        throw BackendError("provider returned status " + std::to_string(res->status), true, retry);
    }
    if (res->status != 200) {
        throw BackendError("provider returned status " + std::to_string(res->status) + ": " +
                               res->body,
                           false);
    }
    nlohmann::json j = nlohmann::json::parse(res->body);
    BackendResponse resp;
    resp.latency_ms = ms;
    resp.provider = config_.model;
    resp.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    return resp;
}

std::vector<LoggedExchange> load_exchange_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<LoggedExchange> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(LoggedExchange::from_json(nlohmann::json::parse(line)));
    }
    return out;
}

void save_exchange_log(const std::string& path, const std::vector<LoggedExchange>& exchanges) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& e : exchanges) out << e.to_json().dump() << "\n";
}

}  // namespace moma
