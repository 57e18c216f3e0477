#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "moma/skills.hpp"

namespace moma {

struct StepRecord {
    int step = 0;  // 1-based, contiguous
    std::string scene_ref;    // path of the rendered scene, empty when not logged
    std::string scene_table;  // text twin of the scene
    std::string subtask;
    std::string skill;
    std::vector<ResolvedParam> params;
    Outcome outcome;
    std::string reasoning;

    nlohmann::json to_json() const;
    static StepRecord from_json(const nlohmann::json& j);
};

struct ShortTermMemory {
    std::vector<StepRecord> steps;

    void append(StepRecord record);
    // Full text log; scene images attached only for the most recent
    // `image_budget` steps.
    std::string render(int image_budget = 3,
                       std::vector<std::string>* image_refs = nullptr) const;
};

struct FailureLesson {
    std::string id;
    std::string skill;  // skill name or "skill_selection"
    std::string instruction;
    std::string scene_ref;
    std::string predicted_subtask;
    std::string predicted_skill;
    std::string predicted_value;
    std::string ground_truth;
    std::string analysis;

    bool operator==(const FailureLesson&) const = default;

    nlohmann::json to_json() const;
    static FailureLesson from_json(const nlohmann::json& j);
};

struct LongTermStore {
    std::map<std::string, std::vector<FailureLesson>> lessons;  // keyed by skill
    int per_skill_cap = 3;

    std::vector<FailureLesson> retrieve(const std::string& skill_or_stage) const;
    void save(const std::string& path) const;
    static LongTermStore load(const std::string& path);

    bool operator==(const LongTermStore&) const = default;
};

struct PredictionRecord {
    std::string id;
    std::string skill;  // skill name or "skill_selection"
    std::string instruction;
    std::string scene_ref;
    std::string subtask;
    std::string predicted_value;

    nlohmann::json to_json() const;
    static PredictionRecord from_json(const nlohmann::json& j);
};

// Produces the analysis text of one mismatch; backed by a model backend in
// production and by a canned function in tests.
using AnalysisFn = std::function<std::string(const FailureLesson&)>;

// Keeps only erroneous predictions, asks for an analysis of each, and caps
// lessons per skill keeping the earliest mismatches.
// Throws std::invalid_argument naming the prediction id when an annotation
// is missing.
LongTermStore curate_lessons(const std::vector<PredictionRecord>& log,
                             const std::map<std::string, std::string>& ground_truth,
                             const AnalysisFn& analyze, int per_skill_cap = 3);

std::vector<PredictionRecord> load_prediction_log(const std::string& path);
std::map<std::string, std::string> load_ground_truth(const std::string& path);

}  // namespace moma
