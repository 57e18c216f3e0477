#include "moma/solver.hpp"

#include <algorithm>
#include <cmath>

#include "moma/nav.hpp"
#include "moma/skills.hpp"

namespace moma {

namespace {

bool object_matches(const Object& obj, const TaskGoal& goal) {
    if (obj.category != goal.target_category) return false;
    for (const auto& [k, v] : goal.target_filter) {
        auto it = obj.attributes.find(k);
        if (it == obj.attributes.end() || it->second != v) return false;
    }
    return true;
}

const Elevator* elevator_between(const WorldState& ws, int from, int to) {
    for (const auto& [id, el] : ws.elevators) {
        bool has_from = std::count(el.served_floors.begin(), el.served_floors.end(), from);
        bool has_to = std::count(el.served_floors.begin(), el.served_floors.end(), to);
        if (has_from && has_to) return &el;
    }
    return nullptr;
}

const Elevator* cab_containing(const WorldState& ws) {
    for (const auto& [id, el] : ws.elevators) {
        auto it = el.cab_cell.find(ws.robot.floor_id);
        if (it != el.cab_cell.end() && it->second == ws.robot.cell &&
            el.current_floor == ws.robot.floor_id) {
            return &el;
        }
    }
    return nullptr;
}

const Landmark* elevator_landmark(const WorldState& ws, int floor) {
    for (const Landmark* lm : ws.building.landmarks.on_floor(floor)) {
        if (lm->elevator) return lm;
    }
    return nullptr;
}

// Landmark of the room containing `cell`, else the nearest landmark.
const Landmark* landmark_near(const WorldState& ws, int floor, Cell cell) {
    const FloorMap* fm = ws.building.floor(floor);
    std::string room;
    for (const auto& [name, cells] : fm->rooms) {
        if (cells.count(cell)) {
            room = name;
            break;
        }
    }
    const Landmark* best = nullptr;
    double best_d = 1e18;
    for (const Landmark* lm : ws.building.landmarks.on_floor(floor)) {
        if (lm->elevator) continue;
        if (!room.empty() && fm->rooms.count(room) && fm->rooms.at(room).count(lm->cell)) {
            return lm;
        }
        double d = cell_distance(lm->cell, cell);
        if (d < best_d) {
            best_d = d;
            best = lm;
        }
    }
    return best;
}

bool visible_zero_noise(const WorldState& ws, const std::string& object_id) {
    Observation obs = observe(ws, {}, 0);
    for (const auto& det : obs.detections) {
        if (det.entity_id == object_id) return true;
    }
    return false;
}

std::optional<RelDir> relative_of(Heading base, Heading target) {
    if (target == base) return RelDir::Forward;
    if (target == rotate_left(base)) return RelDir::Left;
    if (target == rotate_right(base)) return RelDir::Right;
    return std::nullopt;  // backward: push cannot pull
}

// Pick a push direction for `id` that actually clears, preferring sideways.
std::optional<RelDir> clear_push_dir(const WorldState& ws, const std::string& id) {
    for (RelDir rel : {RelDir::Left, RelDir::Right, RelDir::Forward}) {
        WorldState copy = ws;
        Observation obs = observe(copy, {}, 0);
        SkillExecArgs real{copy, obs, {id, rel_dir_name(rel)}};
        const SkillRegistry reg = default_registry();
        Outcome out = execute_skill(*reg.find("push_object_on_ground"), real);
        if (out.success) return rel;
    }
    return std::nullopt;
}

SolverDecision decide_elevator_leg(const WorldState& ws, int target_floor) {
    SolverDecision d;
    int cur = ws.robot.floor_id;
    if (const Elevator* cab = cab_containing(ws)) {
        for (const Button& b : cab->cab_panel.buttons) {
            if (b.target_floor == target_floor) {
                d.subtask = "Ride the elevator to floor " + std::to_string(target_floor) + ".";
                d.skill = "use_elevator";
                d.param_values = {b.id};
                return d;
            }
        }
    }
    const Elevator* el = elevator_between(ws, cur, target_floor);
    if (!el) {
        d.done = true;  // unreachable goal; nothing sensible to do
        return d;
    }
    Cell panel = el->panel_cell.at(cur);
    if (cell_distance(ws.robot.cell, panel) <= 0.6) {
        std::string dir = target_floor > cur ? "up" : "down";
        for (const Button& b : el->call_panel.at(cur).buttons) {
            if (b.call_direction == dir) {
                d.subtask = "Call the elevator to go from floor " + std::to_string(cur) +
                            " to floor " + std::to_string(target_floor) + ".";
                d.skill = "call_elevator";
                d.param_values = {b.id};
                return d;
            }
        }
    }
    const Landmark* lm = elevator_landmark(ws, cur);
    d.subtask = "Go to the elevator on floor " + std::to_string(cur) + ".";
    d.skill = "goto_landmark";
    d.param_values = {lm ? lm->id : ""};
    return d;
}

}  // namespace

std::optional<std::string> Solver::pick_target(const WorldState& ws) const {
    for (const auto& [id, obj] : ws.objects) {
        if (object_matches(obj, goal_)) return id;
    }
    return std::nullopt;
}

SolverDecision Solver::next(const WorldState& ws, const ShortTermMemory& stm) const {
    SolverDecision d;
    if (check_task_success(ws, goal_)) {
        d.done = true;
        return d;
    }

    const StepRecord* last = stm.steps.empty() ? nullptr : &stm.steps.back();

    // Recoveries keyed on the previous failure.
    if (last && !last->outcome.success) {
        const std::string& code = last->outcome.code;
        if (code == "blocked") {
            const std::string prefix = "path blocked by ";
            std::string blocker;
            if (last->outcome.message.rfind(prefix, 0) == 0) {
                blocker = last->outcome.message.substr(prefix.size());
            }
            if (const Door* door = ws.door(blocker); door && !door->open) {
                d.subtask = "Open the door blocking the way.";
                d.skill = "open_door";
                d.param_values = {door->hinge == "left" ? "right" : "left"};
                return d;
            }
            if (const Object* obj = ws.object(blocker); obj && obj->pushable) {
                if (auto rel = clear_push_dir(ws, blocker)) {
                    d.subtask = "Push the " + obj->category + " out of the way.";
                    d.skill = "push_object_on_ground";
                    d.param_values = {blocker, rel_dir_name(*rel)};
                    return d;
                }
            }
        } else if (code == "sensor_fault" && last->skill == "pick_up_object" &&
                   !last->params.empty()) {
            // Nudge the base and retry the grasp from a slightly different pose.
            const Object* target = ws.object(last->params.front().value);
            for (RelDir rel : {RelDir::Left, RelDir::Right, RelDir::Backward, RelDir::Forward}) {
                Cell cell = ws.robot.cell + heading_delta(apply_rel_dir(ws.robot.heading, rel));
                if (ws.cell_blocked(ws.robot.floor_id, cell, "", true)) continue;
                if (target && cell_distance(cell, target->anchor) > ws.robot.arm_reach) continue;
                d.subtask = "Adjust the base before retrying the grasp.";
                d.skill = "move_base";
                d.param_values = {rel_dir_name(rel)};
                return d;
            }
        }
    }

    if (goal_.kind == TaskGoal::Kind::Retrieve) {
        auto target_id = pick_target(ws);
        bool holding = ws.robot.held_object && target_id &&
                       *ws.robot.held_object == *target_id;
        if (holding) {
            const Landmark* lm = ws.building.landmarks.find(goal_.deliver_landmark);
            if (ws.robot.floor_id != lm->floor_id) {
                return decide_elevator_leg(ws, lm->floor_id);
            }
            d.subtask = "Return to the " + lm->label + " to deliver the item.";
            d.skill = "goto_landmark";
            d.param_values = {lm->id};
            return d;
        }
        if (!target_id) {
            d.done = true;  // no matching object exists
            return d;
        }
        const Object* target = ws.object(*target_id);
        if (ws.robot.floor_id != target->floor_id) {
            return decide_elevator_leg(ws, target->floor_id);
        }
        double dist = cell_distance(ws.robot.cell, target->anchor);
        if (dist <= ws.robot.arm_reach && visible_zero_noise(ws, *target_id)) {
            d.subtask = "Pick up the " + target->category + ".";
            d.skill = "pick_up_object";
            d.param_values = {*target_id};
            return d;
        }
        if (visible_zero_noise(ws, *target_id) && nearest_ground_point(ws, *target_id)) {
            d.subtask = "Move next to the " + target->category + ".";
            d.skill = "navigate_to_point_on_ground";
            d.param_values = {*target_id};
            return d;
        }
        const Landmark* lm = landmark_near(ws, target->floor_id, target->anchor);
        d.subtask = "Go to the " + (lm ? lm->label : "target area") + " to find the " +
                    target->category + ".";
        d.skill = "goto_landmark";
        d.param_values = {lm ? lm->id : ""};
        return d;
    }

    // Rearrangement: push each stray chair into the goal region.
    if (ws.robot.floor_id != goal_.goal_floor) {
        return decide_elevator_leg(ws, goal_.goal_floor);
    }
    const Object* chair = nullptr;
    for (const auto& [id, obj] : ws.objects) {
        if (obj.category != goal_.rearrange_category || obj.grasped) continue;
        bool inside = obj.floor_id == goal_.goal_floor;
        for (Cell c : obj.footprint()) {
            if (!goal_.goal_region.count(c)) inside = false;
        }
        if (!inside) {
            chair = &obj;
            break;
        }
    }
    if (!chair) {
        d.done = true;
        return d;
    }
    bool chair_visible = visible_zero_noise(ws, chair->id);
    if (cell_distance(ws.robot.cell, chair->anchor) > 3.0 || !chair_visible) {
        if (chair_visible && nearest_ground_point(ws, chair->id)) {
            d.subtask = "Move near the " + chair->category + " to rearrange it.";
            d.skill = "navigate_to_point_on_ground";
            d.param_values = {chair->id};
            return d;
        }
        const Landmark* lm = landmark_near(ws, goal_.goal_floor, chair->anchor);
        d.subtask = "Go to the " + (lm ? lm->label : "goal area") + ".";
        d.skill = "goto_landmark";
        d.param_values = {lm ? lm->id : ""};
        return d;
    }
    // Direction that moves the chair toward the region centroid.
    double cr = 0, cc = 0;
    for (Cell c : goal_.goal_region) {
        cr += c.row;
        cc += c.col;
    }
    cr /= goal_.goal_region.size();
    cc /= goal_.goal_region.size();
    double dr = cr - chair->anchor.row;
    double dc = cc - chair->anchor.col;
    Heading want;
    if (std::abs(dr) >= std::abs(dc)) {
        want = dr < 0 ? Heading::North : Heading::South;
    } else {
        want = dc > 0 ? Heading::East : Heading::West;
    }
    auto rel = relative_of(ws.robot.heading, want);
    if (!rel) {
        // Re-approach so the chair is in front of the robot.
        d.subtask = "Move near the " + chair->category + " to rearrange it.";
        d.skill = "navigate_to_point_on_ground";
        d.param_values = {chair->id};
        return d;
    }
    d.subtask = "Push the " + chair->category + " into the goal area.";
    d.skill = "push_object_on_ground";
    d.param_values = {chair->id, rel_dir_name(*rel)};
    return d;
}

DryRunResult solver_dry_run(WorldState ws, const TaskGoal& goal, int max_steps,
                            const PerceptionNoiseConfig& noise) {
    Solver solver(goal);
    const SkillRegistry reg = default_registry();
    DryRunResult result;
    for (int step = 1; step <= max_steps; ++step) {
        SolverDecision d = solver.next(ws, result.stm);
        if (d.done) break;
        Observation obs = observe(ws, noise, step);
        const SkillSpec* skill = reg.find(d.skill);
        if (!skill) break;
        SkillExecArgs args{ws, obs, d.param_values, 0, ws.rng_seed, step};
        Outcome out = execute_skill(*skill, args);
        StepRecord rec;
        rec.step = step;
        rec.subtask = d.subtask;
        rec.skill = d.skill;
        for (size_t i = 0; i < d.param_values.size(); ++i) {
            rec.params.push_back({0, d.param_values[i], skill->slots[i]});
        }
        rec.outcome = out;
        result.stm.append(std::move(rec));
        result.steps = step;
        if (check_task_success(ws, goal)) {
            result.success = true;
            break;
        }
    }
    result.success = result.success || check_task_success(ws, goal);
    return result;
}

}  // namespace moma
