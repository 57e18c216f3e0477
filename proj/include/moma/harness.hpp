#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "moma/backend.hpp"
#include "moma/engine.hpp"

namespace moma {

// --- tasks ------------------------------------------------------------------

struct TaskSpec {
    std::string id;  // retrieve_marker, retrieve_soda, rearrange_chairs
    TaskGoal::Kind kind = TaskGoal::Kind::Retrieve;
    std::vector<std::string> phrasings;  // three wordings of the same request
    std::string target_category;
    std::map<std::string, std::string> target_filter;
};

TaskSpec builtin_task(const std::string& id);  // throws on unknown id
std::vector<TaskSpec> builtin_tasks();

// --- buildings and scenarios ------------------------------------------------

std::vector<std::string> builtin_buildings();
// Scenario config JSON (see configs/README.md) for an empty builtin building.
nlohmann::json builtin_building_config(const std::string& name);

struct ScenarioOptions {
    std::optional<bool> door;         // closed door across the target room entrance
    std::optional<bool> box;          // pushable box on the corridor path
    std::optional<bool> wet_sign;     // wet floor sign on the corridor path
    std::optional<bool> cross_floor;  // start on a different floor than the target
};

struct Scenario {
    nlohmann::json config;  // full world config; same seed => identical bytes
    WorldState ws;
    TaskGoal goal;
    std::string task_id;
    int distractors = 0;
    bool door = false;
    bool box = false;
    bool wet_sign = false;
    bool cross_floor = false;
    int solver_steps = 0;  // step count of the validating reference run
};

// Deterministic per (building, task, seed). Unset options are drawn from the
// seed. Throws std::runtime_error("degenerate scenario") when 100 attempts
// fail to produce a world the reference policy solves within 23 steps.
Scenario randomize_scenario(const std::string& building, const TaskSpec& task, uint64_t seed,
                            const ScenarioOptions& opts = {});

// --- trial results and failure categories -----------------------------------

enum class FailureCategory {
    None,
    WrongObject,
    WrongButton,
    CollisionReasoning,
    NavigationStuck,
    SensorFault,
    StepBudget,
    SemanticViolation,
};

std::string failure_category_name(FailureCategory c);

// Precedence: wrong-object, wrong-button, collision-reasoning,
// navigation-stuck, sensor-fault, semantic-violation, step-budget.
// Throws std::invalid_argument("not a failure") when success is true.
FailureCategory categorize_failure(const ShortTermMemory& stm, const WorldState& final_ws,
                                   const TaskGoal& goal, bool success);

struct TrialResult {
    std::string task;
    int phrasing = 0;
    uint64_t seed = 0;
    bool success = false;
    int steps = 0;
    FailureCategory category = FailureCategory::None;
    double wall_time_s = 0;
    uint64_t final_state_hash = 0;
    std::vector<SkillInvocation> invocations;
};

// --- benchmark --------------------------------------------------------------

struct BenchmarkConfig {
    std::string building = "building_a";
    Mode mode = Mode::Full;
    Backend* backend = nullptr;
    int trials = 10;  // seeds per phrasing
    uint64_t seed = 1;
    int max_steps = 25;
    const LongTermStore* ltm = nullptr;
    PerceptionNoiseConfig noise;
    double ik_failure_rate = 0;
    std::string out_dir;  // when set: per-trial logs plus report.txt / report.csv
};

struct BenchmarkReport {
    std::vector<TrialResult> trials;

    double task_rate(const std::string& task) const;
    double overall_rate() const;
    std::map<std::string, int> failure_histogram() const;
    std::string text() const;
    std::string csv() const;
};

TrialResult run_scenario_trial(const Scenario& scenario, const std::string& instruction,
                               const BenchmarkConfig& config, const std::string& log_dir = {});

BenchmarkReport run_benchmark(const std::vector<TaskSpec>& tasks, const BenchmarkConfig& config);

// Renders a report from per-trial summary.json files under `runs_dir`.
BenchmarkReport collect_report(const std::string& runs_dir);

// --- offline skill-parameter evaluation -------------------------------------

// Groups: pickup_low (5-10 distractors), pickup_high (20-25), push,
// call_elevator. Instances regenerate their worlds from the stored seed.
struct OfflineInstance {
    std::string id;
    std::string skill;
    std::string group;
    uint64_t seed = 0;

    nlohmann::json to_json() const;
    static OfflineInstance from_json(const nlohmann::json& j);
};

struct MaterializedInstance {
    WorldState ws;
    std::string skill;
    std::string slot;
    int slot_index = 0;
    std::vector<std::string> resolved_prefix;
    std::string ground_truth;
    std::string group;
};

// Throws std::invalid_argument when the ground truth is not a candidate.
MaterializedInstance materialize_instance(const OfflineInstance& inst);

std::vector<OfflineInstance> generate_offline_dataset(int per_group, uint64_t seed);
void save_offline_dataset(const std::string& path, const std::vector<OfflineInstance>& instances);
// Validates every instance on load.
std::vector<OfflineInstance> load_offline_dataset(const std::string& path);

struct OfflineReport {
    std::map<std::string, std::pair<int, int>> per_group;  // correct, total

    double rate(const std::string& group) const;
    double average_rate() const;
    std::string text() const;
    std::string csv() const;
};

OfflineReport run_offline_eval(const std::vector<OfflineInstance>& instances, Mode mode,
                               Backend& backend);

}  // namespace moma
