#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "moma/world.hpp"

namespace moma {

struct Path {
    std::vector<Cell> cells;  // start..goal inclusive; empty when start == goal
    double length_m = 0;
};

// A* over the static occupancy grid, 4-connected, unit cost.
// Expansion ties broken by lexicographic (row, col) order.
// `extra_blocked` lets callers overlay known impassable cells.
std::optional<Path> plan_global(const FloorMap& grid, Cell start, Cell goal,
                                const std::set<Cell>& extra_blocked = {});

// Breadth-first shortest path length, used as an independent check of the
// planner. Returns nullopt when unreachable.
std::optional<int> bfs_path_length(const FloorMap& grid, Cell start, Cell goal,
                                   const std::set<Cell>& extra_blocked = {});

inline constexpr double kLocalHorizon = 2.0;  // meters

// Advances the robot cell-by-cell. Halts when a movable object or closed
// door intersects the remaining path within the local horizon and reports
// the blocking entity id.
Outcome traverse(WorldState& ws, const Path& path);

// Free cell adjacent to the object footprint, nearest to the robot,
// reachable; ties broken by (row, col).
struct GroundPointError {
    std::string code;
    std::string message;
};
std::optional<Cell> nearest_ground_point(const WorldState& ws, const std::string& object_id,
                                         GroundPointError* err = nullptr);

// Cells the planner must treat as occupied for semantic reasons
// (wet floor signs are never pushed or driven over).
std::set<Cell> semantic_avoid_cells(const WorldState& ws, int floor_id);

}  // namespace moma
