#include "moma/skills.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace moma {

namespace {

Candidate detection_candidate(const Detection& det) {
    Candidate c;
    c.label = det.label;
    c.resolved_value = det.entity_id;
    c.detection = det;
    c.sort_distance = det.distance;
    c.sort_bearing = det.bearing_deg;
    c.marker_cell = det.cell;
    return c;
}

std::vector<Candidate> object_candidates(const WorldState&, const Observation& obs,
                                         const std::vector<std::string>&) {
    std::vector<Candidate> out;
    for (const auto& det : detector_query(obs, "all objects")) {
        out.push_back(detection_candidate(det));
    }
    return out;
}

std::vector<Candidate> button_candidates(const WorldState&, const Observation& obs,
                                         const std::vector<std::string>&) {
    std::vector<Candidate> out;
    for (const auto& det : detector_query(obs, "buttons")) {
        out.push_back(detection_candidate(det));
    }
    return out;
}

std::vector<Candidate> direction_candidates(const WorldState& ws, const Observation&,
                                            const std::vector<std::string>&, bool with_backward) {
    std::vector<Candidate> out;
    std::vector<std::pair<RelDir, double>> dirs = {
        {RelDir::Forward, 0}, {RelDir::Left, -90}, {RelDir::Right, 90}};
    if (with_backward) dirs.push_back({RelDir::Backward, 180});
    for (auto [d, bearing] : dirs) {
        Candidate c;
        c.label = rel_dir_name(d);
        c.resolved_value = rel_dir_name(d);
        c.sort_distance = 0.3;
        c.sort_bearing = bearing;
        Cell delta = heading_delta(apply_rel_dir(ws.robot.heading, d));
        c.marker_cell = ws.robot.cell + delta;
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<Candidate> side_candidates(const WorldState& ws, const Observation&,
                                       const std::vector<std::string>&) {
    std::vector<Candidate> out;
    for (auto [side, bearing, d] :
         {std::tuple{"left", -90.0, RelDir::Left}, std::tuple{"right", 90.0, RelDir::Right}}) {
        Candidate c;
        c.label = side;
        c.resolved_value = side;
        c.sort_distance = 0.5;
        c.sort_bearing = bearing;
        c.marker_cell = ws.robot.cell + heading_delta(apply_rel_dir(ws.robot.heading, d));
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<Candidate> landmark_candidates(const WorldState& ws, const Observation&,
                                           const std::vector<std::string>&) {
    std::vector<Candidate> out;
    for (const Landmark* lm : ws.building.landmarks.on_floor(ws.robot.floor_id)) {
        Candidate c;
        c.label = lm->label;
        c.resolved_value = lm->id;
        c.sort_distance = cell_distance(ws.robot.cell, lm->cell);
        c.marker_cell = lm->cell;
        out.push_back(std::move(c));
    }
    return out;
}

// Path planning used by skills: wet floor signs are kept out of any plan.
std::optional<Path> plan_avoiding(const WorldState& ws, Cell goal,
                                  const std::set<Cell>& extra = {}) {
    const FloorMap* fm = ws.building.floor(ws.robot.floor_id);
    std::set<Cell> blocked = semantic_avoid_cells(ws, ws.robot.floor_id);
    blocked.insert(extra.begin(), extra.end());
    blocked.erase(ws.robot.cell);
    return plan_global(*fm, ws.robot.cell, goal, blocked);
}

Outcome exec_goto_landmark(SkillExecArgs& a) {
    const Landmark* lm = a.ws.building.landmarks.find(a.params.at(0));
    if (!lm) return Outcome::fail("unknown_landmark", "no landmark " + a.params.at(0));
    if (lm->floor_id != a.ws.robot.floor_id) {
        return Outcome::fail("wrong_floor", lm->id + " is on another floor");
    }
    auto path = plan_avoiding(a.ws, lm->cell);
    if (!path) return Outcome::fail("unreachable", lm->id + " is unreachable");
    Outcome out = traverse(a.ws, *path);
    if (out.success) a.ws.robot.heading = lm->heading;
    return out;
}

Outcome exec_navigate_near(SkillExecArgs& a) {
    const std::string& id = a.params.at(0);
    GroundPointError err;
    auto goal = nearest_ground_point(a.ws, id, &err);
    if (!goal) return Outcome::fail(err.code, err.message);
    const Object* obj = a.ws.object(id);
    std::set<Cell> extra;
    for (Cell c : obj->footprint()) extra.insert(c);
    auto path = plan_avoiding(a.ws, *goal, extra);
    if (!path) return Outcome::fail("unreachable", id + " is unreachable");
    Outcome out = traverse(a.ws, *path);
    if (out.success) a.ws.robot.heading = bearing_heading(a.ws.robot.cell, obj->anchor);
    return out;
}

Outcome exec_move_base(SkillExecArgs& a) {
    RelDir d = rel_dir_from_name(a.params.at(0));
    Cell target = a.ws.robot.cell + heading_delta(apply_rel_dir(a.ws.robot.heading, d));
    if (a.ws.cell_blocked(a.ws.robot.floor_id, target, "", true)) {
        return Outcome::fail("target_occupied", "target cell is occupied");
    }
    a.ws.robot.cell = target;
    a.ws.check_invariants();
    return Outcome::ok();
}

Outcome exec_pick_up(SkillExecArgs& a) {
    const std::string& id = a.params.at(0);
    double dist = std::nan("");
    bool seen = false;
    for (const auto& det : a.obs.detections) {
        if (det.entity_id == id) {
            dist = det.distance;
            seen = true;
            break;
        }
    }
    if (!seen) return Outcome::fail("object_missing", id + " is not visible");
    if (!std::isnan(dist) && a.ik_failure_rate > 0) {
        uint64_t h = hash_combine(hash_combine(a.seed, a.step), fnv1a("ik"));
        if (unit_draw(h) < a.ik_failure_rate) {
            return Outcome::fail("ik_failure", "no valid arm configuration for " + id);
        }
    }
    return pick_up(a.ws, id, dist);
}

Outcome exec_push(SkillExecArgs& a) {
    const std::string& id = a.params.at(0);
    RelDir rel = rel_dir_from_name(a.params.at(1));
    const Object* obj = a.ws.object(id);
    if (!obj || obj->grasped || obj->floor_id != a.ws.robot.floor_id) {
        return Outcome::fail("object_missing", "no object " + id + " on this floor");
    }
    if (cell_distance(a.ws.robot.cell, obj->anchor) > 3.0) {
        return Outcome::fail("out_of_range", id + " is out of push range");
    }
    Heading dir = apply_rel_dir(a.ws.robot.heading, rel);
    // Approach the cell behind the object relative to the push direction.
    Cell d = heading_delta(dir);
    Cell rear = obj->footprint().front();
    for (Cell c : obj->footprint()) {
        int score = c.row * d.row + c.col * d.col;
        int best = rear.row * d.row + rear.col * d.col;
        if (score < best || (score == best && c < rear)) rear = c;
    }
    Cell approach = rear - d;
    if (a.ws.robot.cell != approach) {
        if (a.ws.cell_blocked(a.ws.robot.floor_id, approach, "", true)) {
            return Outcome::fail("no_push_pose", "no free cell behind " + id);
        }
        std::set<Cell> extra;
        for (Cell c : obj->footprint()) extra.insert(c);
        auto path = plan_avoiding(a.ws, approach, extra);
        if (!path) return Outcome::fail("unreachable", "cannot reach push pose for " + id);
        Outcome out = traverse(a.ws, *path);
        if (!out.success) return out;
    }
    a.ws.robot.heading = dir;
    return apply_push(a.ws, id, dir);
}

// Doors are opened on the nearest closed door in range.
const Door* nearest_closed_door(const WorldState& ws, double max_dist) {
    const Door* best = nullptr;
    double best_d = max_dist;
    for (const auto& [id, d] : ws.doors) {
        if (d.open || d.floor_id != ws.robot.floor_id) continue;
        for (Cell c : d.cells) {
            double cd = cell_distance(ws.robot.cell, c);
            if (cd <= best_d) {
                best_d = cd;
                best = &ws.doors.at(id);
            }
        }
    }
    return best;
}

Outcome exec_open_door(SkillExecArgs& a) {
    const Door* door = nearest_closed_door(a.ws, 3.0);
    if (!door) return Outcome::fail("no_door", "no closed door nearby");
    // Approach a free cell adjacent to the door.
    const FloorMap* fm = a.ws.building.floor(a.ws.robot.floor_id);
    std::optional<Cell> approach;
    double best = 1e18;
    for (Cell dc : door->cells) {
        for (Cell delta : {Cell{-1, 0}, Cell{0, -1}, Cell{0, 1}, Cell{1, 0}}) {
            Cell c = dc + delta;
            if (!fm->is_free(c) || a.ws.cell_blocked(a.ws.robot.floor_id, c, "", true)) continue;
            double cd = cell_distance(a.ws.robot.cell, c);
            if (cd < best || (cd == best && (!approach || c < *approach))) {
                std::set<Cell> extra;
                for (Cell x : door->cells) extra.insert(x);
                if (c != a.ws.robot.cell && !plan_avoiding(a.ws, c, extra)) continue;
                best = cd;
                approach = c;
            }
        }
    }
    if (!approach) return Outcome::fail("unreachable", door->id + " is unapproachable");
    if (a.ws.robot.cell != *approach) {
        std::set<Cell> extra;
        for (Cell x : door->cells) extra.insert(x);
        auto path = plan_avoiding(a.ws, *approach, extra);
        if (!path) return Outcome::fail("unreachable", door->id + " is unapproachable");
        Outcome out = traverse(a.ws, *path);
        if (!out.success) return out;
    }
    Cell nearest = door->cells.front();
    double nd = 1e18;
    for (Cell c : door->cells) {
        double cd = cell_distance(a.ws.robot.cell, c);
        if (cd < nd) {
            nd = cd;
            nearest = c;
        }
    }
    a.ws.robot.heading = bearing_heading(a.ws.robot.cell, nearest);
    return apply_open_door(a.ws, door->id, a.params.at(0));
}

std::string elevator_of_button(const std::string& button_id) {
    auto pos = button_id.find(':');
    return pos == std::string::npos ? button_id : button_id.substr(0, pos);
}

Outcome exec_call_elevator(SkillExecArgs& a) {
    const std::string& button = a.params.at(0);
    return press_button(a.ws, elevator_of_button(button), button);
}

Outcome exec_use_elevator(SkillExecArgs& a) {
    const std::string& button = a.params.at(0);
    std::string elevator = elevator_of_button(button);
    Outcome pressed = press_button(a.ws, elevator, button);
    if (!pressed.success) return pressed;
    return elevator_transition(a.ws, elevator);
}

}  // namespace

void SkillRegistry::add(SkillSpec spec) {
    if (spec.name.empty()) throw std::invalid_argument("skill name must be non-empty");
    if (spec.description.empty()) throw std::invalid_argument("skill description must be non-empty");
    if (find(spec.name)) throw std::invalid_argument("duplicate skill name: " + spec.name);
    skills_.push_back(std::move(spec));
}

const SkillSpec* SkillRegistry::find(const std::string& name) const {
    for (const auto& s : skills_) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

std::string SkillRegistry::describe_all() const {
    if (skills_.empty()) throw std::logic_error("no skills registered");
    std::string out;
    for (const auto& s : skills_) {
        out += "skill_name: " + s.name + "\n";
        out += "arguments: " + s.arguments + "\n";
        out += "description: " + s.description + "\n\n";
    }
    return out;
}

SkillRegistry default_registry() {
    SkillRegistry reg;
    reg.add({"goto_landmark", "selected landmark from the available options",
             "Navigates to the selected landmark in the building, for instance an office, "
             "kitchen, or the elevator area on the current floor.",
             {"landmark"},
             landmark_candidates,
             exec_goto_landmark});
    reg.add({"navigate_to_point_on_ground", "object",
             "Moves the robot to a point on the ground near the selected object, for example "
             "next to a table before manipulating something on it.",
             {"object"},
             object_candidates,
             exec_navigate_near});
    reg.add({"move_base", "direction",
             "Moves the robot base forward, backward, left, or right by a small step relative "
             "to the camera view. Use it only for final adjustments near a target, not to "
             "travel between rooms.",
             {"direction"},
             [](const WorldState& ws, const Observation& obs,
                const std::vector<std::string>& resolved) {
                 return direction_candidates(ws, obs, resolved, true);
             },
             exec_move_base});
    reg.add({"pick_up_object", "object_of_interest",
             "Picks up the selected object with the arm. Only objects within arm reach can be "
             "picked up; the base does not move. Heavy items such as chairs or tables cannot "
             "be lifted.",
             {"object"},
             object_candidates,
             exec_pick_up});
    reg.add({"push_object_on_ground", "object, direction",
             "Pushes an object standing on the ground in the chosen direction. Objects up to "
             "about 3 meters away can be pushed. Useful for clearing a blocked pathway or "
             "rearranging furniture.",
             {"object", "direction"},
             [](const WorldState& ws, const Observation& obs,
                const std::vector<std::string>& resolved) -> std::vector<Candidate> {
                 if (resolved.empty()) return object_candidates(ws, obs, resolved);
                 return direction_candidates(ws, obs, resolved, false);
             },
             exec_push});
    reg.add({"open_door", "door_side",
             "Opens a push-door by driving forward with one arm extended on the chosen side "
             "(left or right) of the door.",
             {"side"},
             side_candidates,
             exec_open_door});
    reg.add({"call_elevator", "call button, up or down depending on the destination floor",
             "Presses the selected call button to summon the elevator to the current floor "
             "and moves inside the cab. The subtask should name the current and destination "
             "floors.",
             {"button"},
             button_candidates,
             exec_call_elevator});
    reg.add({"use_elevator", "button of the destination floor",
             "Presses the selected in-cab floor button and rides the elevator, then steps "
             "out on the new floor. Use it after calling the elevator.",
             {"button"},
             button_candidates,
             exec_use_elevator});
    return reg;
}

std::vector<Candidate> candidates_for(const SkillSpec& skill, const WorldState& ws,
                                      const Observation& obs,
                                      const std::vector<std::string>& resolved) {
    return skill.candidates(ws, obs, resolved);
}

Outcome execute_skill(const SkillSpec& skill, SkillExecArgs& args) {
    if (args.params.size() != skill.slots.size()) {
        return Outcome::fail("bad_params", "expected " + std::to_string(skill.slots.size()) +
                                               " parameters for " + skill.name);
    }
    return skill.execute(args);
}

}  // namespace moma
