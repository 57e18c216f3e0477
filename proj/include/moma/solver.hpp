#pragma once

#include <optional>
#include <string>
#include <vector>

#include "moma/memory.hpp"
#include "moma/percept.hpp"
#include "moma/world.hpp"

namespace moma {

struct SolverDecision {
    bool done = false;
    std::string subtask;
    std::string skill;
    std::vector<std::string> param_values;  // desired resolved value per slot
};

// Scripted ground-truth policy with full world access. It is reactive: each
// call looks at the current state plus the last outcome and emits the next
// correct parameterized skill.
class Solver {
public:
    Solver(TaskGoal goal) : goal_(std::move(goal)) {}

    SolverDecision next(const WorldState& ws, const ShortTermMemory& stm) const;

    const TaskGoal& goal() const { return goal_; }

    // Target object for retrieval goals (smallest matching id).
    std::optional<std::string> pick_target(const WorldState& ws) const;

private:
    TaskGoal goal_;
};

struct DryRunResult {
    bool success = false;
    int steps = 0;
    ShortTermMemory stm;
};

// Simulates the solver policy directly through the skill executors, without
// the prompt/backend machinery. Used as the minimal-plan reference.
DryRunResult solver_dry_run(WorldState ws, const TaskGoal& goal, int max_steps = 25,
                            const PerceptionNoiseConfig& noise = {});

}  // namespace moma
