#include "moma/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace moma {

namespace {

Cell parse_cell(const nlohmann::json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
        throw ConfigError(field + ": expected [row, col]");
    }
    return {j[0].get<int>(), j[1].get<int>()};
}

const nlohmann::json& require(const nlohmann::json& j, const std::string& key,
                              const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(where + ": missing field '" + key + "'");
    return *it;
}

}  // namespace

const Landmark* LandmarkGraph::find(const std::string& id) const {
    for (const auto& n : nodes) {
        if (n.id == id) return &n;
    }
    return nullptr;
}

std::vector<const Landmark*> LandmarkGraph::on_floor(int floor_id) const {
    std::vector<const Landmark*> out;
    for (const auto& n : nodes) {
        if (n.floor_id == floor_id) out.push_back(&n);
    }
    return out;
}

std::vector<Cell> Object::footprint() const {
    std::vector<Cell> out;
    out.reserve(footprint_offsets.size());
    for (Cell off : footprint_offsets) out.push_back(anchor + off);
    return out;
}

std::string Object::matchable_text() const {
    std::string text = category;
    auto it = attributes.find("brand");
    if (it != attributes.end()) text += " " + it->second;
    return text;
}

std::string Object::display_text() const {
    std::string text = category;
    if (!attributes.empty()) {
        text += " (";
        bool first = true;
        for (const auto& [k, v] : attributes) {
            if (!first) text += ", ";
            first = false;
            text += k + "=" + v;
        }
        text += ")";
    }
    return text;
}

const FloorMap* Building::floor(int floor_id) const {
    for (const auto& f : floors) {
        if (f.floor_id == floor_id) return &f;
    }
    return nullptr;
}

const Object* WorldState::object(const std::string& id) const {
    auto it = objects.find(id);
    return it == objects.end() ? nullptr : &it->second;
}
Object* WorldState::object(const std::string& id) {
    auto it = objects.find(id);
    return it == objects.end() ? nullptr : &it->second;
}
const Door* WorldState::door(const std::string& id) const {
    auto it = doors.find(id);
    return it == doors.end() ? nullptr : &it->second;
}
Door* WorldState::door(const std::string& id) {
    auto it = doors.find(id);
    return it == doors.end() ? nullptr : &it->second;
}
const Elevator* WorldState::elevator(const std::string& id) const {
    auto it = elevators.find(id);
    return it == elevators.end() ? nullptr : &it->second;
}
Elevator* WorldState::elevator(const std::string& id) {
    auto it = elevators.find(id);
    return it == elevators.end() ? nullptr : &it->second;
}

std::optional<std::string> WorldState::blocking_entity(int floor_id, Cell c,
                                                       const std::string& ignore_entity) const {
    const FloorMap* fm = building.floor(floor_id);
    if (!fm || !fm->in_bounds(c) || fm->at(c) != CellKind::Free) return "wall";
    for (const auto& [id, obj] : objects) {
        if (id == ignore_entity || obj.grasped || obj.floor_id != floor_id) continue;
        for (Cell fc : obj.footprint()) {
            if (fc == c) return id;
        }
    }
    for (const auto& [id, d] : doors) {
        if (id == ignore_entity || d.open || d.floor_id != floor_id) continue;
        for (Cell dc : d.cells) {
            if (dc == c) return id;
        }
    }
    return std::nullopt;
}

bool WorldState::cell_blocked(int floor_id, Cell c, const std::string& ignore_entity,
                              bool ignore_robot) const {
    if (blocking_entity(floor_id, c, ignore_entity)) return true;
    if (!ignore_robot && robot.floor_id == floor_id && robot.cell == c) return true;
    return false;
}

void WorldState::check_invariants() const {
    std::map<std::pair<int, Cell>, std::string> occupied;
    for (const auto& [id, obj] : objects) {
        if (obj.grasped) continue;
        const FloorMap* fm = building.floor(obj.floor_id);
        if (!fm) throw std::logic_error("object " + id + " on unknown floor");
        for (Cell c : obj.footprint()) {
            if (!fm->is_free(c)) throw std::logic_error("object " + id + " on occupied grid cell");
            auto key = std::make_pair(obj.floor_id, c);
            auto [it, inserted] = occupied.emplace(key, id);
            if (!inserted) {
                throw std::logic_error("footprint overlap between " + it->second + " and " + id);
            }
        }
    }
    const FloorMap* rf = building.floor(robot.floor_id);
    if (!rf || !rf->is_free(robot.cell)) throw std::logic_error("robot on occupied grid cell");
    auto rkey = std::make_pair(robot.floor_id, robot.cell);
    if (occupied.count(rkey)) throw std::logic_error("robot inside object footprint");
    if (robot.held_object) {
        const Object* held = object(*robot.held_object);
        if (!held || !held->grasped) throw std::logic_error("held object not marked grasped");
    }
}

nlohmann::json WorldState::to_json() const {
    nlohmann::json j;
    nlohmann::json objs = nlohmann::json::object();
    for (const auto& [id, obj] : objects) {
        objs[id] = {{"category", obj.category},
                    {"attributes", obj.attributes},
                    {"floor", obj.floor_id},
                    {"cell", {obj.anchor.row, obj.anchor.col}},
                    {"heading", heading_name(obj.heading)},
                    {"grasped", obj.grasped}};
    }
    j["objects"] = objs;
    nlohmann::json drs = nlohmann::json::object();
    for (const auto& [id, d] : doors) drs[id] = {{"open", d.open}};
    j["doors"] = drs;
    nlohmann::json els = nlohmann::json::object();
    for (const auto& [id, e] : elevators) {
        els[id] = {{"floor", e.current_floor},
                   {"selected", e.selected_floor ? nlohmann::json(*e.selected_floor)
                                                 : nlohmann::json()},
                   {"committed", e.committed_direction}};
    }
    j["elevators"] = els;
    j["robot"] = {{"floor", robot.floor_id},
                  {"cell", {robot.cell.row, robot.cell.col}},
                  {"heading", heading_name(robot.heading)},
                  {"held", robot.held_object ? nlohmann::json(*robot.held_object)
                                             : nlohmann::json()}};
    return j;
}

uint64_t WorldState::state_hash() const { return fnv1a(to_json().dump()); }

// --- loading ----------------------------------------------------------------

WorldState load_world(const nlohmann::json& config) {
    WorldState ws;
    ws.rng_seed = config.value("seed", 0ull);

    const auto& floors = require(config, "floors", "config");
    if (!floors.is_array() || floors.empty()) throw ConfigError("floors: expected non-empty array");
    for (size_t fi = 0; fi < floors.size(); ++fi) {
        const std::string where = "floors[" + std::to_string(fi) + "]";
        const auto& fj = floors[fi];
        FloorMap fm;
        fm.floor_id = require(fj, "id", where).get<int>();
        const auto& grid = require(fj, "grid", where);
        if (!grid.is_array() || grid.empty()) throw ConfigError(where + ".grid: expected rows");
        fm.rows = static_cast<int>(grid.size());
        fm.cols = static_cast<int>(grid[0].get<std::string>().size());
        for (const auto& rowj : grid) {
            std::string row = rowj.get<std::string>();
            if (static_cast<int>(row.size()) != fm.cols) {
                throw ConfigError(where + ".grid: rows have unequal length");
            }
            for (char c : row) {
                switch (c) {
                    case '.': fm.cells.push_back(CellKind::Free); break;
                    case '#': fm.cells.push_back(CellKind::Wall); break;
                    case 'o': fm.cells.push_back(CellKind::StaticObstacle); break;
                    default:
                        throw ConfigError(where + ".grid: unknown cell char '" +
                                          std::string(1, c) + "'");
                }
            }
        }
        if (fj.contains("rooms")) {
            std::set<Cell> claimed;
            for (const auto& [name, rect] : fj.at("rooms").items()) {
                if (!rect.is_array() || rect.size() != 4) {
                    throw ConfigError(where + ".rooms." + name + ": expected [r0,c0,r1,c1]");
                }
                std::set<Cell> cells;
                for (int r = rect[0].get<int>(); r <= rect[2].get<int>(); ++r) {
                    for (int c = rect[1].get<int>(); c <= rect[3].get<int>(); ++c) {
                        Cell cc{r, c};
                        if (!fm.is_free(cc)) continue;
                        if (claimed.count(cc)) {
                            throw ConfigError(where + ".rooms." + name + ": overlaps another room");
                        }
                        claimed.insert(cc);
                        cells.insert(cc);
                    }
                }
                fm.rooms[name] = std::move(cells);
            }
        }
        ws.building.floors.push_back(std::move(fm));
    }

    for (size_t i = 0; config.contains("landmarks") && i < config.at("landmarks").size(); ++i) {
        const std::string where = "landmarks[" + std::to_string(i) + "]";
        const auto& lj = config.at("landmarks")[i];
        Landmark lm;
        lm.id = require(lj, "id", where).get<std::string>();
        lm.floor_id = require(lj, "floor", where).get<int>();
        lm.cell = parse_cell(require(lj, "cell", where), where + ".cell");
        lm.heading = heading_from_name(lj.value("heading", "N"));
        lm.label = lj.value("label", lm.id);
        lm.elevator = lj.value("elevator", false);
        const FloorMap* fm = ws.building.floor(lm.floor_id);
        if (!fm) throw ConfigError(where + ".floor: unknown floor");
        if (!fm->is_free(lm.cell)) throw ConfigError(where + ".cell: not a free cell");
        if (ws.building.landmarks.find(lm.id)) throw ConfigError(where + ".id: duplicate");
        ws.building.landmarks.nodes.push_back(std::move(lm));
    }

    for (size_t i = 0; config.contains("elevators") && i < config.at("elevators").size(); ++i) {
        const std::string where = "elevators[" + std::to_string(i) + "]";
        const auto& ej = config.at("elevators")[i];
        Elevator el;
        el.id = require(ej, "id", where).get<std::string>();
        for (const auto& f : require(ej, "floors", where)) el.served_floors.push_back(f.get<int>());
        if (el.served_floors.size() < 2) throw ConfigError(where + ".floors: needs >= 2 floors");
        auto parse_per_floor = [&](const char* key) {
            std::map<int, Cell> out;
            const auto& m = require(ej, key, where);
            for (const auto& [fs, cj] : m.items()) {
                out[std::stoi(fs)] = parse_cell(cj, where + "." + key);
            }
            for (int f : el.served_floors) {
                if (!out.count(f)) {
                    throw ConfigError(where + "." + key + ": missing floor " + std::to_string(f));
                }
            }
            return out;
        };
        el.cab_cell = parse_per_floor("cab_cell");
        el.panel_cell = parse_per_floor("panel_cell");
        el.exit_cell = parse_per_floor("exit_cell");
        int lowest = *std::min_element(el.served_floors.begin(), el.served_floors.end());
        int highest = *std::max_element(el.served_floors.begin(), el.served_floors.end());
        for (int f : el.served_floors) {
            ButtonPanel panel;
            if (f < highest) {
                panel.buttons.push_back({el.id + ":call" + std::to_string(f) + ":up", "up", 0.0,
                                         0.1, true, "up", 0});
            }
            if (f > lowest) {
                panel.buttons.push_back({el.id + ":call" + std::to_string(f) + ":down", "down",
                                         0.0, -0.1, true, "down", 0});
            }
            el.call_panel[f] = std::move(panel);
        }
        for (int f : el.served_floors) {
            el.cab_panel.buttons.push_back({el.id + ":cab:" + std::to_string(f),
                                            std::to_string(f), 0.0, 0.1 * f, false, "", f});
        }
        el.current_floor = lowest;
        for (int f : el.served_floors) {
            const FloorMap* fm = ws.building.floor(f);
            if (!fm) throw ConfigError(where + ": serves unknown floor " + std::to_string(f));
            if (!fm->is_free(el.cab_cell[f])) throw ConfigError(where + ".cab_cell: not free");
            if (!fm->is_free(el.exit_cell[f])) throw ConfigError(where + ".exit_cell: not free");
        }
        ws.elevators[el.id] = std::move(el);
    }

    for (size_t i = 0; config.contains("doors") && i < config.at("doors").size(); ++i) {
        const std::string where = "doors[" + std::to_string(i) + "]";
        const auto& dj = config.at("doors")[i];
        Door d;
        d.id = require(dj, "id", where).get<std::string>();
        d.floor_id = require(dj, "floor", where).get<int>();
        for (const auto& cj : require(dj, "cells", where)) {
            d.cells.push_back(parse_cell(cj, where + ".cells"));
        }
        d.open = dj.value("state", "closed") == "open";
        d.hinge = dj.value("hinge", "left");
        if (d.hinge != "left" && d.hinge != "right") {
            throw ConfigError(where + ".hinge: expected left or right");
        }
        const FloorMap* fm = ws.building.floor(d.floor_id);
        if (!fm) throw ConfigError(where + ".floor: unknown floor");
        for (Cell c : d.cells) {
            if (!fm->is_free(c)) throw ConfigError(where + ".cells: not a free cell");
        }
        ws.building.doors.push_back(d);
        ws.doors[d.id] = d;
    }

    for (size_t i = 0; config.contains("objects") && i < config.at("objects").size(); ++i) {
        const std::string where = "objects[" + std::to_string(i) + "]";
        const auto& oj = config.at("objects")[i];
        Object obj;
        obj.id = require(oj, "id", where).get<std::string>();
        obj.category = require(oj, "category", where).get<std::string>();
        if (oj.contains("attributes")) {
            for (const auto& [k, v] : oj.at("attributes").items()) {
                obj.attributes[k] = v.get<std::string>();
            }
        }
        obj.floor_id = require(oj, "floor", where).get<int>();
        obj.anchor = parse_cell(require(oj, "cell", where), where + ".cell");
        if (oj.contains("footprint")) {
            obj.footprint_offsets.clear();
            for (const auto& cj : oj.at("footprint")) {
                obj.footprint_offsets.push_back(parse_cell(cj, where + ".footprint"));
            }
        }
        obj.heading = heading_from_name(oj.value("heading", "N"));
        obj.graspable = oj.value("graspable", true);
        obj.heavy = oj.value("heavy", false);
        obj.delicate = oj.value("delicate", false);
        obj.pushable = oj.value("pushable", true);
        if (obj.heavy && obj.graspable) {
            throw ConfigError(where + ": heavy objects cannot be graspable");
        }
        if (ws.objects.count(obj.id)) throw ConfigError(where + ".id: duplicate");
        ws.objects[obj.id] = std::move(obj);
    }

    const auto& rj = require(config, "robot_start", "config");
    ws.robot.floor_id = require(rj, "floor", "robot_start").get<int>();
    ws.robot.cell = parse_cell(require(rj, "cell", "robot_start"), "robot_start.cell");
    ws.robot.heading = heading_from_name(rj.value("heading", "N"));
    ws.robot.arm_reach = rj.value("arm_reach", 0.8);

    try {
        ws.check_invariants();
    } catch (const std::logic_error& e) {
        throw ConfigError(e.what());
    }
    return ws;
}

WorldState load_world_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    in >> j;
    return load_world(j);
}

// --- transition rules -------------------------------------------------------

Outcome apply_push(WorldState& ws, const std::string& object_id, Heading dir, double distance) {
    Object* obj = ws.object(object_id);
    if (!obj || obj->grasped || obj->floor_id != ws.robot.floor_id) {
        return Outcome::fail("object_missing", "no object " + object_id + " on this floor");
    }
    if (!obj->pushable) {
        return Outcome::fail("not_pushable", object_id + " cannot be pushed");
    }
    double range = cell_distance(ws.robot.cell, obj->anchor);
    if (range > 3.0) {
        return Outcome::fail("out_of_range", object_id + " is out of push range");
    }
    Cell d = heading_delta(dir);
    int steps = std::max(1, static_cast<int>(std::lround(distance / kCellSize)));

    std::set<Cell> own;
    for (Cell c : obj->footprint()) own.insert(c);
    for (int k = 1; k <= steps; ++k) {
        for (Cell off : obj->footprint_offsets) {
            Cell target = obj->anchor + Cell{off.row + k * d.row, off.col + k * d.col};
            if (own.count(target)) continue;
            auto blocker = ws.blocking_entity(obj->floor_id, target, object_id);
            if (blocker) {
                std::string name = *blocker;
                if (name != "wall") {
                    name = ws.doors.count(name) ? "door " + name : "object " + name;
                }
                return Outcome::fail("collision", "collision with " + name);
            }
            if (ws.robot.floor_id == obj->floor_id && ws.robot.cell == target) {
                return Outcome::fail("collision", "collision with robot");
            }
        }
    }

    Cell old_anchor = obj->anchor;
    obj->anchor = {old_anchor.row + steps * d.row, old_anchor.col + steps * d.col};
    // Reposition the robot behind the moved object.
    Cell rear = obj->footprint().front();
    for (Cell c : obj->footprint()) {
        int score = c.row * d.row + c.col * d.col;
        int best = rear.row * d.row + rear.col * d.col;
        if (score < best || (score == best && c < rear)) rear = c;
    }
    Cell behind = rear - d;
    if (!ws.cell_blocked(obj->floor_id, behind, object_id, true)) {
        ws.robot.cell = behind;
    }
    ws.robot.heading = dir;
    Outcome out = Outcome::ok();
    out.semantic_violation = obj->delicate;
    ws.check_invariants();
    return out;
}

Outcome apply_push(WorldState& ws, const std::string& object_id, RelDir dir, double distance) {
    return apply_push(ws, object_id, apply_rel_dir(ws.robot.heading, dir), distance);
}

Outcome apply_open_door(WorldState& ws, const std::string& door_id, const std::string& side) {
    Door* d = ws.door(door_id);
    if (!d) return Outcome::fail("door_missing", "no door " + door_id);
    if (d->floor_id != ws.robot.floor_id) {
        return Outcome::fail("door_missing", door_id + " is on another floor");
    }
    if (d->open) return Outcome::ok();
    double dist = 1e9;
    Cell nearest = d->cells.front();
    for (Cell c : d->cells) {
        double cd = cell_distance(ws.robot.cell, c);
        if (cd < dist) {
            dist = cd;
            nearest = c;
        }
    }
    if (dist > 1.0) return Outcome::fail("too_far", "too far from " + door_id);
    if (bearing_heading(ws.robot.cell, nearest) != ws.robot.heading) {
        return Outcome::fail("not_facing", "robot is not facing " + door_id);
    }
    if (side != "left" && side != "right") {
        return Outcome::fail("bad_side", "side must be left or right");
    }
    // Pushing on the side opposite the hinge swings the door open.
    if (side == d->hinge) {
        return Outcome::fail("wrong_side", "wrong side: door did not move");
    }
    d->open = true;
    ws.check_invariants();
    return Outcome::ok();
}

Outcome press_button(WorldState& ws, const std::string& elevator_id, const std::string& button_id) {
    Elevator* el = ws.elevator(elevator_id);
    if (!el) return Outcome::fail("elevator_missing", "no elevator " + elevator_id);

    for (auto& [floor, panel] : el->call_panel) {
        for (const Button& b : panel.buttons) {
            if (b.id != button_id) continue;
            if (ws.robot.floor_id != floor ||
                cell_distance(ws.robot.cell, el->panel_cell.at(floor)) > 0.6) {
                return Outcome::fail("wrong_panel", "robot is not at the call panel");
            }
            el->current_floor = floor;
            el->committed_direction = b.call_direction;
            el->selected_floor.reset();
            // The robot enters the cab after calling.
            ws.robot.cell = el->cab_cell.at(floor);
            ws.robot.heading = bearing_heading(ws.robot.cell, el->exit_cell.at(floor));
            ws.check_invariants();
            return Outcome::ok();
        }
    }
    for (const Button& b : el->cab_panel.buttons) {
        if (b.id != button_id) continue;
        if (ws.robot.cell != el->cab_cell.at(ws.robot.floor_id) ||
            el->current_floor != ws.robot.floor_id) {
            return Outcome::fail("wrong_panel", "robot is not inside the cab");
        }
        el->selected_floor = b.target_floor;
        return Outcome::ok();
    }
    return Outcome::fail("button_missing", "no button " + button_id);
}

Outcome elevator_transition(WorldState& ws, const std::string& elevator_id) {
    Elevator* el = ws.elevator(elevator_id);
    if (!el) return Outcome::fail("elevator_missing", "no elevator " + elevator_id);
    if (ws.robot.cell != el->cab_cell.at(ws.robot.floor_id) ||
        el->current_floor != ws.robot.floor_id) {
        return Outcome::fail("not_in_cab", "robot is not inside the cab");
    }
    if (!el->selected_floor) {
        return Outcome::fail("no_floor_selected", "no floor selected");
    }
    int target = *el->selected_floor;
    el->selected_floor.reset();
    if (target == el->current_floor) {
        el->committed_direction.clear();
        ws.robot.cell = el->exit_cell.at(el->current_floor);
        return Outcome::fail("wrong_button", "pressed the current floor button");
    }
    std::string needed = target > el->current_floor ? "up" : "down";
    if (!el->committed_direction.empty() && el->committed_direction != needed) {
        el->committed_direction.clear();
        ws.robot.cell = el->exit_cell.at(el->current_floor);
        return Outcome::fail("wrong_button", "the cab was called to go " +
                                                 (needed == "up" ? std::string("down")
                                                                 : std::string("up")));
    }
    el->committed_direction.clear();
    el->current_floor = target;
    ws.robot.floor_id = target;
    ws.robot.cell = el->exit_cell.at(target);
    ws.robot.heading = bearing_heading(el->cab_cell.at(target), el->exit_cell.at(target));
    ws.check_invariants();
    return Outcome::ok();
}

Outcome pick_up(WorldState& ws, const std::string& object_id, double known_distance) {
    if (std::isnan(known_distance)) {
        return Outcome::fail("sensor_fault", "sensor fault: unknown depth for " + object_id);
    }
    Object* obj = ws.object(object_id);
    if (!obj || obj->grasped || obj->floor_id != ws.robot.floor_id) {
        return Outcome::fail("object_missing", "no object " + object_id + " on this floor");
    }
    if (ws.robot.held_object) {
        return Outcome::fail("hand_full", "already holding " + *ws.robot.held_object);
    }
    if (obj->heavy) return Outcome::fail("too_heavy", object_id + " is too heavy to pick up");
    if (!obj->graspable) return Outcome::fail("not_graspable", object_id + " cannot be grasped");
    if (known_distance > ws.robot.arm_reach) {
        return Outcome::fail("out_of_reach", object_id + " is beyond arm reach");
    }
    obj->grasped = true;
    ws.robot.held_object = object_id;
    ws.check_invariants();
    return Outcome::ok();
}

bool check_task_success(const WorldState& ws, const TaskGoal& goal) {
    if (goal.kind == TaskGoal::Kind::Retrieve) {
        if (!ws.robot.held_object) return false;
        const Object* held = ws.object(*ws.robot.held_object);
        if (!held || held->category != goal.target_category) return false;
        for (const auto& [k, v] : goal.target_filter) {
            auto it = held->attributes.find(k);
            if (it == held->attributes.end() || it->second != v) return false;
        }
        const Landmark* lm = ws.building.landmarks.find(goal.deliver_landmark);
        if (!lm) throw std::invalid_argument("unknown landmark " + goal.deliver_landmark);
        return ws.robot.floor_id == lm->floor_id && ws.robot.cell == lm->cell;
    }
    // Rearrangement: all instances of the category inside the region, aligned.
    std::optional<Heading> heading;
    bool any = false;
    for (const auto& [id, obj] : ws.objects) {
        if (obj.category != goal.rearrange_category || obj.grasped) continue;
        any = true;
        if (obj.floor_id != goal.goal_floor) return false;
        for (Cell c : obj.footprint()) {
            if (!goal.goal_region.count(c)) return false;
        }
        if (heading && *heading != obj.heading) return false;
        heading = obj.heading;
    }
    return any;
}

}  // namespace moma
