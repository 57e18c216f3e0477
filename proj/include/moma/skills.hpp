#pragma once

#include <functional>
#include <string>
#include <vector>

#include "moma/nav.hpp"
#include "moma/percept.hpp"
#include "moma/world.hpp"

namespace moma {

struct SkillExecArgs {
    WorldState& ws;
    const Observation& obs;
    std::vector<std::string> params;  // resolved values, one per slot
    double ik_failure_rate = 0;
    uint64_t seed = 0;
    int step = 0;
};

struct SkillSpec {
    std::string name;
    std::string arguments;
    std::string description;
    // Slot kinds, in query order: "landmark", "object", "direction", "side", "button".
    std::vector<std::string> slots;
    std::function<std::vector<Candidate>(const WorldState&, const Observation&,
                                         const std::vector<std::string>& resolved)>
        candidates;
    std::function<Outcome(SkillExecArgs&)> execute;
};

struct ResolvedParam {
    int marker_id = 0;
    std::string value;
    std::string slot;
};

struct SkillInvocation {
    std::string skill;
    std::vector<ResolvedParam> params;
    std::string subtask;
    int step = 0;
};

class SkillRegistry {
public:
    void add(SkillSpec spec);  // throws std::invalid_argument on duplicate name
    const SkillSpec* find(const std::string& name) const;
    const std::vector<SkillSpec>& all() const { return skills_; }

    // Stage-1 skill description block; throws when the registry is empty.
    std::string describe_all() const;

private:
    std::vector<SkillSpec> skills_;
};

// The eight built-in skills.
SkillRegistry default_registry();

std::vector<Candidate> candidates_for(const SkillSpec& skill, const WorldState& ws,
                                      const Observation& obs,
                                      const std::vector<std::string>& resolved = {});

Outcome execute_skill(const SkillSpec& skill, SkillExecArgs& args);

}  // namespace moma
