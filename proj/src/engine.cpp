#include "moma/engine.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace moma {

// --- prompt primitives ------------------------------------------------------

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::Full: return "full";
        case Mode::Come: return "come";
        case Mode::Im: return "im";
        case Mode::NoCot: return "nocot";
        case Mode::NoSom: return "nosom";
    }
    return "full";
}

Mode mode_from_name(std::string_view name) {
    if (name == "full") return Mode::Full;
    if (name == "come") return Mode::Come;
    if (name == "im") return Mode::Im;
    if (name == "nocot") return Mode::NoCot;
    if (name == "nosom") return Mode::NoSom;
    throw std::invalid_argument("unknown mode: " + std::string(name));
}

int Prompt::image_count() const {
    int n = 0;
    for (const auto& p : parts) {
        if (p.kind == PromptPart::Kind::Image) ++n;
    }
    return n;
}

std::string Prompt::text_concat() const {
    std::string out;
    for (const auto& p : parts) {
        if (p.kind == PromptPart::Kind::Text) {
            out += p.text;
            out += "\n";
        }
    }
    return out;
}

bool Prompt::contains(std::string_view needle) const {
    return text_concat().find(needle) != std::string::npos;
}

uint64_t Prompt::hash() const {
    uint64_t h = fnv1a(stage);
    for (const auto& p : parts) {
        h = hash_combine(h, p.kind == PromptPart::Kind::Text ? 1 : 2);
        h = hash_combine(h, fnv1a(p.text));
        h = hash_combine(h, fnv1a(p.image_ref));
        h = hash_combine(h, fnv1a(p.image_png));
    }
    return h;
}

// --- prompt construction ----------------------------------------------------

namespace {

const char* kRoleHeader =
    "You control a mobile manipulation robot operating inside a multi-floor office "
    "building. You see the current camera view and a log of what happened so far. "
    "Decide what the robot should do next.";

bool lessons_enabled(const EngineConfig& config) {
    return config.ltm != nullptr && config.mode != Mode::Come && config.mode != Mode::Im;
}

bool images_enabled(const EngineConfig& config) { return config.mode != Mode::Im; }

std::string render_lessons(const LongTermStore& ltm, const std::string& key) {
    auto lessons = ltm.retrieve(key);
    if (lessons.empty()) return {};
    std::string out = "Lessons from earlier failures (take these into account):\n";
    for (const auto& l : lessons) {
        out += "- " + l.analysis + "\n";
    }
    return out;
}

void push_text(Prompt& prompt, std::string text) {
    if (text.empty()) return;
    PromptPart part;
    part.kind = PromptPart::Kind::Text;
    part.text = std::move(text);
    prompt.parts.push_back(std::move(part));
}

void push_image(Prompt& prompt, const Raster& raster, std::string ref) {
    PromptPart part;
    part.kind = PromptPart::Kind::Image;
    part.image_ref = std::move(ref);
    part.image_png = raster.png();
    prompt.parts.push_back(std::move(part));
}

// Keeps the prompt under the character budget by trimming the oldest part of
// the history block.
std::string trim_history(std::string history, size_t other_chars, size_t budget) {
    if (other_chars + history.size() <= budget) return history;
    size_t keep = budget > other_chars ? budget - other_chars : 0;
    if (history.size() > keep) {
        history = "...(earlier steps truncated)\n" +
                  history.substr(history.size() - keep);
    }
    return history;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

// Finds the value of the last "key: value" line in a response.
std::optional<std::string> find_field(const std::string& response, const std::string& key) {
    std::istringstream in(response);
    std::string line;
    std::optional<std::string> found;
    while (std::getline(in, line)) {
        std::string low = lower(line);
        size_t pos = low.find(key + ":");
        if (pos != std::string::npos) {
            found = trim(line.substr(pos + key.size() + 1));
        }
    }
    return found;
}

}  // namespace

Prompt build_stage1_prompt(const std::string& instruction, const WorldState& ws,
                           const Observation& obs, const AnnotatedScene& scene,
                           const std::string& skill_descriptions, const ShortTermMemory& stm,
                           const LongTermStore* ltm, const EngineConfig& config) {
    Prompt prompt;
    prompt.stage = "stage1";

    std::string head = std::string(kRoleHeader) + "\n\nTask instruction: " + instruction + "\n";
    head += "Robot status: floor " + std::to_string(ws.robot.floor_id) + ", ";
    head += ws.robot.held_object ? "holding " + *ws.robot.held_object : "hand empty";
    head += ".\n\nAvailable skills:\n" + skill_descriptions;
    if (lessons_enabled(config) && ltm) {
        head += "\n" + render_lessons(*ltm, "skill_selection");
    }
    push_text(prompt, head);

    std::string history = "Execution history:\n" + stm.render(0);
    std::string tail;
    if (config.mode != Mode::NoCot) {
        tail += "Think step by step: restate the goal, review what has already been done "
                "and whether the last action worked, then pick the next move.\n";
    }
    tail += "Finish your reply with exactly this block:\n"
            "answer:\nsubtask: <short phrase>\nskill: <one skill name from the list>";
    history = trim_history(std::move(history), head.size() + tail.size() + 512,
                           static_cast<size_t>(config.prompt_char_budget));
    push_text(prompt, history);

    if (images_enabled(config)) {
        push_image(prompt, scene.raster, "scene_step" + std::to_string(obs.step) + ".png");
    }
    push_text(prompt, "Current view:\n" + obs.scene_text);
    push_text(prompt, tail);
    return prompt;
}

Prompt build_stage2_prompt(const std::string& subtask, const std::string& skill,
                           const std::string& slot, const Observation& obs,
                           const AnnotatedScene& scene, const LongTermStore* ltm,
                           const EngineConfig& config) {
    Prompt prompt;
    prompt.stage = "stage2";

    std::string head = "The robot is executing skill '" + skill + "' for the subtask: " +
                       subtask + ".\nChoose the value of its '" + slot + "' argument.\n";
    if (lessons_enabled(config) && ltm) {
        head += "\n" + render_lessons(*ltm, skill);
    }
    push_text(prompt, head);

    if (images_enabled(config)) {
        // Without set-of-mark prompting the image carries no drawn marker ids.
        const Raster& img = config.mode == Mode::NoSom ? obs.scene_raster : scene.raster;
        push_image(prompt, img, "scene_step" + std::to_string(obs.step) + "_" + slot + ".png");
    }

    std::string tail;
    if (config.mode == Mode::NoSom) {
        push_text(prompt, "Current view:\n" + obs.scene_text);
        if (config.mode != Mode::NoCot) {
            tail += "Think step by step about which option fits the subtask.\n";
        }
        tail += "Describe the chosen option in words. Finish with exactly:\n"
                "answer:\nchoice: <description of the chosen option>";
    } else {
        push_text(prompt, "Candidates (numbered markers in the image):\n" + scene.table);
        if (config.mode != Mode::NoCot) {
            tail += "Think step by step about which marker fits the subtask.\n";
        }
        tail += "Finish with exactly:\nanswer:\nmarker: <number>";
    }
    push_text(prompt, tail);
    return prompt;
}

// --- response parsing -------------------------------------------------------

std::optional<std::pair<std::string, std::string>> parse_stage1(const std::string& response) {
    auto subtask = find_field(response, "subtask");
    auto skill = find_field(response, "skill");
    if (!subtask || !skill || subtask->empty() || skill->empty()) return std::nullopt;
    return std::make_pair(*subtask, *skill);
}

std::optional<int> parse_stage2_marker(const std::string& response) {
    auto field = find_field(response, "marker");
    if (!field) return std::nullopt;
    try {
        size_t used = 0;
        int id = std::stoi(*field, &used);
        return id;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::optional<std::string> parse_stage2_description(const std::string& response) {
    auto field = find_field(response, "choice");
    if (!field || field->empty()) return std::nullopt;
    return field;
}

// --- decision loop ----------------------------------------------------------

namespace {

std::string reasoning_of(const std::string& response) {
    size_t pos = response.find("answer:");
    return trim(pos == std::string::npos ? response : response.substr(0, pos));
}

// Sends the request, logging the prompt and exchange. Transport errors are
// retried once before giving up.
BackendResponse ask(TrialState& trial, Backend& backend, const BackendRequest& request) {
    trial.prompts.push_back(request.prompt);
    BackendResponse resp;
    try {
        resp = backend.complete(request);
    } catch (const BackendError& e) {
        if (!e.transport) throw;
        resp = backend.complete(request);
    }
    trial.exchanges.push_back({request.prompt.hash(), request.prompt.stage, resp.text});
    return resp;
}

Prompt with_format_reminder(Prompt prompt) {
    PromptPart part;
    part.kind = PromptPart::Kind::Text;
    part.text = "Your previous reply did not contain the required answer block. "
                "Reply again and end with the exact format requested above.";
    prompt.parts.push_back(std::move(part));
    return prompt;
}

std::vector<std::string> word_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

const Candidate* resolve_description(const MarkerSet& markers, const std::string& desc) {
    std::vector<std::string> desc_toks = word_tokens(desc);
    for (const auto& m : markers.markers) {
        std::vector<std::string> label_toks = word_tokens(m.candidate.label);
        bool all = !label_toks.empty();
        for (const auto& t : label_toks) {
            if (std::find(desc_toks.begin(), desc_toks.end(), t) == desc_toks.end()) {
                all = false;
                break;
            }
        }
        if (all) return &m.candidate;
    }
    return nullptr;
}

StepRecord decide_and_act(TrialState& trial, const TaskGoal& goal, const std::string& instruction,
                          const EngineConfig& config) {
    if (!config.backend) throw std::invalid_argument("engine needs a backend");
    static const SkillRegistry registry = default_registry();
    const int step = trial.step + 1;
    Solver solver(goal);

    StepRecord rec;
    rec.step = step;

    Observation obs = observe(trial.ws, config.noise, step);
    rec.scene_table = obs.scene_text;

    AnnotatedScene plain;
    plain.raster = obs.scene_raster;
    plain.table = obs.scene_text;

    if (!config.log_dir.empty()) {
        std::filesystem::create_directories(config.log_dir);
        rec.scene_ref = config.log_dir + "/scene_step" + std::to_string(step) + ".png";
        write_file(rec.scene_ref, obs.scene_raster.png());
    }

    const LongTermStore* ltm = lessons_enabled(config) ? config.ltm : nullptr;

    auto abort_step = [&](const std::string& code, const std::string& message) {
        rec.outcome = Outcome::fail(code, message);
        trial.stm.append(rec);
        trial.step = step;
        return rec;
    };

    // Stage 1: subtask and skill.
    BackendRequest req1;
    req1.prompt = build_stage1_prompt(instruction, trial.ws, obs, plain, registry.describe_all(),
                                      trial.stm, ltm, config);
    req1.ctx.ws = &trial.ws;
    req1.ctx.solver = &solver;
    req1.ctx.stm = &trial.stm;
    req1.ctx.stage = "stage1";

    std::optional<std::pair<std::string, std::string>> stage1;
    try {
        BackendResponse resp = ask(trial, *config.backend, req1);
        stage1 = parse_stage1(resp.text);
        rec.reasoning = reasoning_of(resp.text);
        if (!stage1) {
            req1.prompt = with_format_reminder(req1.prompt);
            resp = ask(trial, *config.backend, req1);
            stage1 = parse_stage1(resp.text);
            rec.reasoning = reasoning_of(resp.text);
        }
    } catch (const BackendError& e) {
        return abort_step("backend_error", e.what());
    }
    if (!stage1) return abort_step("parse_failure", "stage 1 reply not parseable");

    rec.subtask = stage1->first;
    rec.skill = stage1->second;
    const SkillSpec* skill = registry.find(rec.skill);
    if (!skill) return abort_step("parse_failure", "unknown skill " + rec.skill);

    // Stage 2: one query per slot.
    std::vector<std::string> resolved;
    for (size_t i = 0; i < skill->slots.size(); ++i) {
        std::vector<Candidate> cands = candidates_for(*skill, trial.ws, obs, resolved);
        if (cands.empty()) {
            return abort_step("no_candidates",
                              "no candidates for slot " + skill->slots[i] + " of " + skill->name);
        }
        AnnotatedScene scene = annotate_markers(obs, cands);

        BackendRequest req2;
        req2.prompt = build_stage2_prompt(rec.subtask, skill->name, skill->slots[i], obs, scene,
                                          ltm, config);
        req2.ctx.ws = &trial.ws;
        req2.ctx.solver = &solver;
        req2.ctx.stm = &trial.stm;
        req2.ctx.stage = "stage2";
        req2.ctx.skill = skill->name;
        req2.ctx.slot = skill->slots[i];
        req2.ctx.slot_index = static_cast<int>(i);
        req2.ctx.markers = &scene.markers;
        req2.ctx.use_descriptions = config.mode == Mode::NoSom;

        ResolvedParam param;
        param.slot = skill->slots[i];
        bool got = false;
        try {
            for (int attempt = 0; attempt < 2 && !got; ++attempt) {
                if (attempt == 1) req2.prompt = with_format_reminder(req2.prompt);
                BackendResponse resp = ask(trial, *config.backend, req2);
                if (config.mode == Mode::NoSom) {
                    auto desc = parse_stage2_description(resp.text);
                    const Candidate* c =
                        desc ? resolve_description(scene.markers, *desc) : nullptr;
                    if (c) {
                        param.value = c->resolved_value;
                        got = true;
                    }
                } else {
                    auto id = parse_stage2_marker(resp.text);
                    const Marker* m = id ? scene.markers.by_id(*id) : nullptr;
                    if (m) {
                        param.marker_id = m->id;
                        param.value = m->candidate.resolved_value;
                        got = true;
                    }
                }
            }
        } catch (const BackendError& e) {
            return abort_step("backend_error", e.what());
        }
        if (!got) {
            return abort_step("parse_failure",
                              "stage 2 reply not parseable for slot " + skill->slots[i]);
        }
        resolved.push_back(param.value);
        rec.params.push_back(std::move(param));
    }

    trial.invocations.push_back({rec.skill, rec.params, rec.subtask, step});

    SkillExecArgs args{trial.ws, obs, resolved, config.ik_failure_rate, config.seed, step};
    rec.outcome = execute_skill(*skill, args);
    trial.stm.append(rec);
    trial.step = step;
    return rec;
}

TrialRun run_trial(const WorldState& start, const TaskGoal& goal, const std::string& instruction,
                   const EngineConfig& config) {
    TrialState trial;
    trial.ws = start;

    while (trial.step < config.max_steps) {
        if (check_task_success(trial.ws, goal)) break;
        StepRecord rec = decide_and_act(trial, goal, instruction, config);
        if (rec.outcome.code == "backend_error") break;
    }

    TrialRun run;
    run.success = check_task_success(trial.ws, goal);
    run.steps = trial.step;
    run.stm = trial.stm;
    run.invocations = trial.invocations;
    run.exchanges = trial.exchanges;
    run.prompts = trial.prompts;
    run.final_state_hash = trial.ws.state_hash();
    run.final_ws = trial.ws;

    if (!config.log_dir.empty()) {
        std::filesystem::create_directories(config.log_dir);
        std::ofstream transcript(config.log_dir + "/transcript.jsonl");
        for (const auto& step : run.stm.steps) transcript << step.to_json().dump() << "\n";
        save_exchange_log(config.log_dir + "/exchanges.jsonl", run.exchanges);
        nlohmann::json summary = {{"success", run.success},
                                  {"steps", run.steps},
                                  {"mode", mode_name(config.mode)},
                                  {"final_state_hash", run.final_state_hash}};
        std::ofstream(config.log_dir + "/summary.json") << summary.dump(2) << "\n";
    }
    return run;
}

}  // namespace moma
