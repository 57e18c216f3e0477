#include "moma/memory.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace moma {

nlohmann::json StepRecord::to_json() const {
    nlohmann::json params_j = nlohmann::json::array();
    for (const auto& p : params) {
        params_j.push_back({{"marker", p.marker_id}, {"value", p.value}, {"slot", p.slot}});
    }
    return {{"step", step},
            {"scene_ref", scene_ref},
            {"scene_table", scene_table},
            {"subtask", subtask},
            {"skill", skill},
            {"params", params_j},
            {"success", outcome.success},
            {"failure_code", outcome.code},
            {"failure_reason", outcome.message},
            {"semantic_violation", outcome.semantic_violation},
            {"reasoning", reasoning}};
}

StepRecord StepRecord::from_json(const nlohmann::json& j) {
    StepRecord r;
    r.step = j.at("step").get<int>();
    r.scene_ref = j.value("scene_ref", "");
    r.scene_table = j.value("scene_table", "");
    r.subtask = j.value("subtask", "");
    r.skill = j.value("skill", "");
    for (const auto& p : j.value("params", nlohmann::json::array())) {
        r.params.push_back({p.at("marker").get<int>(), p.at("value").get<std::string>(),
                            p.value("slot", "")});
    }
    r.outcome.success = j.at("success").get<bool>();
    r.outcome.code = j.value("failure_code", "");
    r.outcome.message = j.value("failure_reason", "");
    r.outcome.semantic_violation = j.value("semantic_violation", false);
    r.reasoning = j.value("reasoning", "");
    return r;
}

void ShortTermMemory::append(StepRecord record) {
    if (record.step != static_cast<int>(steps.size()) + 1) {
        throw std::invalid_argument("step records must be contiguous from 1");
    }
    steps.push_back(std::move(record));
}

std::string ShortTermMemory::render(int image_budget,
                                    std::vector<std::string>* image_refs) const {
    if (steps.empty()) return "no steps executed yet\n";
    std::ostringstream out;
    for (const auto& s : steps) {
        out << "step " << s.step << ": subtask: " << s.subtask << "; skill: " << s.skill;
        if (!s.params.empty()) {
            out << "(";
            for (size_t i = 0; i < s.params.size(); ++i) {
                if (i) out << ", ";
                out << s.params[i].value;
            }
            out << ")";
        }
        if (s.outcome.success) {
            out << "; outcome: success";
        } else {
            out << "; outcome: failure: " << s.outcome.message;
        }
        out << "\n";
    }
    if (image_refs) {
        size_t first = steps.size() > static_cast<size_t>(image_budget)
                           ? steps.size() - image_budget
                           : 0;
        for (size_t i = first; i < steps.size(); ++i) {
            if (!steps[i].scene_ref.empty()) image_refs->push_back(steps[i].scene_ref);
        }
    }
    return out.str();
}

nlohmann::json FailureLesson::to_json() const {
    return {{"id", id},
            {"skill", skill},
            {"instruction", instruction},
            {"scene_ref", scene_ref},
            {"predicted_subtask", predicted_subtask},
            {"predicted_skill", predicted_skill},
            {"predicted_value", predicted_value},
            {"ground_truth", ground_truth},
            {"analysis", analysis}};
}

FailureLesson FailureLesson::from_json(const nlohmann::json& j) {
    FailureLesson l;
    l.id = j.at("id").get<std::string>();
    l.skill = j.at("skill").get<std::string>();
    l.instruction = j.value("instruction", "");
    l.scene_ref = j.value("scene_ref", "");
    l.predicted_subtask = j.value("predicted_subtask", "");
    l.predicted_skill = j.value("predicted_skill", "");
    l.predicted_value = j.value("predicted_value", "");
    l.ground_truth = j.value("ground_truth", "");
    l.analysis = j.value("analysis", "");
    return l;
}

std::vector<FailureLesson> LongTermStore::retrieve(const std::string& skill_or_stage) const {
    auto it = lessons.find(skill_or_stage);
    if (it == lessons.end()) return {};
    return it->second;
}

void LongTermStore::save(const std::string& path) const {
    nlohmann::json j;
    j["per_skill_cap"] = per_skill_cap;
    nlohmann::json groups = nlohmann::json::object();
    for (const auto& [skill, ls] : lessons) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& l : ls) arr.push_back(l.to_json());
        groups[skill] = arr;
    }
    j["lessons"] = groups;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

LongTermStore LongTermStore::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    LongTermStore store;
    store.per_skill_cap = j.value("per_skill_cap", 3);
    for (const auto& [skill, arr] : j.at("lessons").items()) {
        for (const auto& lj : arr) store.lessons[skill].push_back(FailureLesson::from_json(lj));
    }
    return store;
}

nlohmann::json PredictionRecord::to_json() const {
    return {{"id", id},
            {"skill", skill},
            {"instruction", instruction},
            {"scene_ref", scene_ref},
            {"subtask", subtask},
            {"predicted_value", predicted_value}};
}

PredictionRecord PredictionRecord::from_json(const nlohmann::json& j) {
    PredictionRecord r;
    r.id = j.at("id").get<std::string>();
    r.skill = j.at("skill").get<std::string>();
    r.instruction = j.value("instruction", "");
    r.scene_ref = j.value("scene_ref", "");
    r.subtask = j.value("subtask", "");
    r.predicted_value = j.at("predicted_value").get<std::string>();
    return r;
}

LongTermStore curate_lessons(const std::vector<PredictionRecord>& log,
                             const std::map<std::string, std::string>& ground_truth,
                             const AnalysisFn& analyze, int per_skill_cap) {
    LongTermStore store;
    store.per_skill_cap = per_skill_cap;
    for (const auto& pred : log) {
        auto it = ground_truth.find(pred.id);
        if (it == ground_truth.end()) {
            throw std::invalid_argument("missing ground-truth annotation for prediction " +
                                        pred.id);
        }
        if (pred.predicted_value == it->second) continue;  // only mistakes are retained
        auto& group = store.lessons[pred.skill];
        if (static_cast<int>(group.size()) >= per_skill_cap) continue;  // keep earliest
        FailureLesson lesson;
        lesson.id = pred.id;
        lesson.skill = pred.skill;
        lesson.instruction = pred.instruction;
        lesson.scene_ref = pred.scene_ref;
        lesson.predicted_subtask = pred.subtask;
        lesson.predicted_skill = pred.skill == "skill_selection" ? pred.predicted_value : "";
        lesson.predicted_value = pred.predicted_value;
        lesson.ground_truth = it->second;
        lesson.analysis = analyze ? analyze(lesson) : "";
        group.push_back(std::move(lesson));
    }
    // Drop groups that ended up empty for determinism of equality checks.
    for (auto it = store.lessons.begin(); it != store.lessons.end();) {
        it = it->second.empty() ? store.lessons.erase(it) : std::next(it);
    }
    return store;
}

std::vector<PredictionRecord> load_prediction_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<PredictionRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(PredictionRecord::from_json(nlohmann::json::parse(line)));
    }
    return out;
}

std::map<std::string, std::string> load_ground_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    std::map<std::string, std::string> out;
    for (const auto& [id, v] : j.items()) out[id] = v.get<std::string>();
    return out;
}

}  // namespace moma
