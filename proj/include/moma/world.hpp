#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "moma/core.hpp"
#include <nlohmann/json.hpp>

namespace moma {

enum class CellKind { Free, Wall, StaticObstacle };

struct FloorMap {
    int floor_id = 0;
    int rows = 0;
    int cols = 0;
    std::vector<CellKind> cells;
    std::map<std::string, std::set<Cell>> rooms;

    bool in_bounds(Cell c) const {
        return c.row >= 0 && c.row < rows && c.col >= 0 && c.col < cols;
    }
    CellKind at(Cell c) const { return cells[c.row * cols + c.col]; }
    bool is_free(Cell c) const { return in_bounds(c) && at(c) == CellKind::Free; }
};

struct Landmark {
    std::string id;
    int floor_id = 0;
    Cell cell;
    Heading heading = Heading::North;
    std::string label;
    bool elevator = false;
};

struct LandmarkGraph {
    std::vector<Landmark> nodes;

    const Landmark* find(const std::string& id) const;
    std::vector<const Landmark*> on_floor(int floor_id) const;
};

struct Object {
    std::string id;
    std::string category;
    std::map<std::string, std::string> attributes;  // brand, color, diet, ...
    int floor_id = 0;
    Cell anchor;                       // meaningless while grasped
    std::vector<Cell> footprint_offsets = {{0, 0}};
    Heading heading = Heading::North;
    bool graspable = true;
    bool heavy = false;
    bool delicate = false;
    bool pushable = true;
    bool grasped = false;

    std::vector<Cell> footprint() const;
    // Text the simulated detector can match on: category plus brand alias.
    std::string matchable_text() const;
    // What a scene annotation shows (category plus visible attributes).
    std::string display_text() const;
};

struct Door {
    std::string id;
    int floor_id = 0;
    std::vector<Cell> cells;
    bool open = false;
    std::string hinge = "left";  // side of the hinge as seen on approach
};

struct Button {
    std::string id;      // e.g. "elev1:call2:up" or "elev1:cab:3"
    std::string label;   // "up", "down", "3"
    double panel_x = 0;  // panel-local coordinates, meters
    double panel_y = 0;
    bool is_call = false;
    std::string call_direction;  // "up"/"down" for call buttons
    int target_floor = 0;        // for cab buttons
};

struct ButtonPanel {
    std::vector<Button> buttons;
};

struct Elevator {
    std::string id;
    std::vector<int> served_floors;
    std::map<int, Cell> cab_cell;    // per floor
    std::map<int, Cell> panel_cell;  // call panel anchor per floor
    std::map<int, Cell> exit_cell;   // where the robot ends after leaving
    std::map<int, ButtonPanel> call_panel;
    ButtonPanel cab_panel;
    int current_floor = 0;
    std::optional<int> selected_floor;
    std::string committed_direction;  // direction of the accepted call
};

struct RobotState {
    int floor_id = 0;
    Cell cell;
    Heading heading = Heading::North;
    std::optional<std::string> held_object;
    double arm_reach = 0.8;
};

struct Building {
    std::vector<FloorMap> floors;
    LandmarkGraph landmarks;
    std::vector<Elevator> elevators;
    std::vector<Door> doors;  // static definition; live state kept in WorldState

    const FloorMap* floor(int floor_id) const;
};

// Goal predicate parameters, resolved by the harness from a task id.
struct TaskGoal {
    enum class Kind { Retrieve, Rearrange };
    Kind kind = Kind::Retrieve;
    std::string target_category;                        // retrieval
    std::map<std::string, std::string> target_filter;   // retrieval attributes
    std::string deliver_landmark;                       // retrieval drop point
    std::string rearrange_category = "chair";           // rearrangement
    int goal_floor = 0;
    std::set<Cell> goal_region;
};

struct WorldState {
    Building building;
    std::map<std::string, Object> objects;
    std::map<std::string, Door> doors;
    std::map<std::string, Elevator> elevators;
    RobotState robot;
    uint64_t rng_seed = 0;

    const Object* object(const std::string& id) const;
    Object* object(const std::string& id);
    const Door* door(const std::string& id) const;
    Door* door(const std::string& id);
    const Elevator* elevator(const std::string& id) const;
    Elevator* elevator(const std::string& id);

    // Cell occupancy including objects, closed doors and the robot.
    bool cell_blocked(int floor_id, Cell c, const std::string& ignore_entity = {},
                      bool ignore_robot = false) const;
    // Entity occupying a cell, if any ("wall", object id, or door id).
    std::optional<std::string> blocking_entity(int floor_id, Cell c,
                                               const std::string& ignore_entity = {}) const;

    nlohmann::json to_json() const;
    uint64_t state_hash() const;
    void check_invariants() const;  // throws std::logic_error on violation
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Parses and validates a scenario config (see configs/README in repo root).
WorldState load_world(const nlohmann::json& config);
WorldState load_world_file(const std::string& path);

// --- transition rules -------------------------------------------------------

// Pushes an object by `distance` meters along world direction `dir`.
// On collision the world is left unchanged.
Outcome apply_push(WorldState& ws, const std::string& object_id, Heading dir,
                   double distance = 0.5);

// Direction given in the robot camera frame.
Outcome apply_push(WorldState& ws, const std::string& object_id, RelDir dir,
                   double distance = 0.5);

Outcome apply_open_door(WorldState& ws, const std::string& door_id, const std::string& side);

Outcome press_button(WorldState& ws, const std::string& elevator_id, const std::string& button_id);

Outcome elevator_transition(WorldState& ws, const std::string& elevator_id);

Outcome pick_up(WorldState& ws, const std::string& object_id, double known_distance);

bool check_task_success(const WorldState& ws, const TaskGoal& goal);

}  // namespace moma
