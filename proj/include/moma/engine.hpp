#pragma once

#include <optional>
#include <string>
#include <vector>

#include "moma/backend.hpp"
#include "moma/memory.hpp"
#include "moma/prompt.hpp"
#include "moma/skills.hpp"
#include "moma/solver.hpp"

namespace moma {

struct EngineConfig {
    Mode mode = Mode::Full;
    int max_steps = 25;
    Backend* backend = nullptr;
    PerceptionNoiseConfig noise;
    const LongTermStore* ltm = nullptr;  // ignored in Come/Im modes
    double ik_failure_rate = 0;
    std::string log_dir;  // empty disables scene/transcript logging
    uint64_t seed = 0;
    int prompt_char_budget = 20000;
};

struct Decision {
    std::string stage1_reasoning;
    std::string subtask;
    std::string skill;
    std::string stage2_reasoning;
    std::vector<ResolvedParam> params;
};

// --- prompt construction ----------------------------------------------------

Prompt build_stage1_prompt(const std::string& instruction, const WorldState& ws,
                           const Observation& obs, const AnnotatedScene& scene,
                           const std::string& skill_descriptions, const ShortTermMemory& stm,
                           const LongTermStore* ltm, const EngineConfig& config);

Prompt build_stage2_prompt(const std::string& subtask, const std::string& skill,
                           const std::string& slot, const Observation& obs,
                           const AnnotatedScene& scene, const LongTermStore* ltm,
                           const EngineConfig& config);

// --- response parsing -------------------------------------------------------

std::optional<std::pair<std::string, std::string>> parse_stage1(const std::string& response);
std::optional<int> parse_stage2_marker(const std::string& response);
std::optional<std::string> parse_stage2_description(const std::string& response);

// Instance-blind resolution of a free-text description: the first candidate
// in marker order whose detector label's words all appear in the description.
const Candidate* resolve_description(const MarkerSet& markers, const std::string& desc);

// --- decision loop ----------------------------------------------------------

struct TrialState {
    WorldState ws;
    ShortTermMemory stm;
    std::vector<SkillInvocation> invocations;
    std::vector<LoggedExchange> exchanges;
    std::vector<Prompt> prompts;  // every prompt sent, for contract checks
    int step = 0;
    bool done = false;
};

// One full perceive -> stage-1 -> stage-2 -> execute -> record iteration.
StepRecord decide_and_act(TrialState& trial, const TaskGoal& goal, const std::string& instruction,
                          const EngineConfig& config);

struct TrialRun {
    bool success = false;
    int steps = 0;
    ShortTermMemory stm;
    std::vector<SkillInvocation> invocations;
    std::vector<LoggedExchange> exchanges;
    std::vector<Prompt> prompts;
    uint64_t final_state_hash = 0;
    WorldState final_ws;
};

TrialRun run_trial(const WorldState& start, const TaskGoal& goal, const std::string& instruction,
                   const EngineConfig& config);

}  // namespace moma
