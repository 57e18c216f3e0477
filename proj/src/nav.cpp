#include "moma/nav.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <queue>

namespace moma {

namespace {

const Cell kNeighborOrder[4] = {{-1, 0}, {0, -1}, {0, 1}, {1, 0}};  // lexicographic

bool passable(const FloorMap& grid, const std::set<Cell>& extra, Cell c) {
    return grid.is_free(c) && !extra.count(c);
}

}  // namespace

std::optional<Path> plan_global(const FloorMap& grid, Cell start, Cell goal,
                                const std::set<Cell>& extra_blocked) {
    if (!passable(grid, extra_blocked, start) || !passable(grid, extra_blocked, goal)) {
        return std::nullopt;
    }
    if (start == goal) return Path{};

    auto h = [&](Cell c) { return std::abs(c.row - goal.row) + std::abs(c.col - goal.col); };
    // Priority: (f, g-tiebreak by lexicographic cell) keeps expansion order
    // deterministic across runs.
    using Entry = std::tuple<int, Cell>;
    auto cmp = [](const Entry& a, const Entry& b) { return a > b; };
    std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> open(cmp);

    std::map<Cell, int> g;
    std::map<Cell, Cell> parent;
    g[start] = 0;
    open.emplace(h(start), start);

    while (!open.empty()) {
        auto [f, cur] = open.top();
        open.pop();
        int gc = g[cur];
        if (f != gc + h(cur)) continue;  // stale entry
        if (cur == goal) break;
        for (Cell d : kNeighborOrder) {
            Cell next = cur + d;
            if (!passable(grid, extra_blocked, next)) continue;
            int ng = gc + 1;
            auto it = g.find(next);
            if (it == g.end() || ng < it->second) {
                g[next] = ng;
                parent[next] = cur;
                open.emplace(ng + h(next), next);
            }
        }
    }
    if (!g.count(goal)) return std::nullopt;

    Path p;
    Cell cur = goal;
    while (cur != start) {
        p.cells.push_back(cur);
        cur = parent.at(cur);
    }
    p.cells.push_back(start);
    std::reverse(p.cells.begin(), p.cells.end());
    p.length_m = (p.cells.size() - 1) * kCellSize;
    return p;
}

std::optional<int> bfs_path_length(const FloorMap& grid, Cell start, Cell goal,
                                   const std::set<Cell>& extra_blocked) {
    if (!passable(grid, extra_blocked, start) || !passable(grid, extra_blocked, goal)) {
        return std::nullopt;
    }
    if (start == goal) return 0;
    std::map<Cell, int> dist;
    dist[start] = 0;
    std::deque<Cell> q{start};
    while (!q.empty()) {
        Cell cur = q.front();
        q.pop_front();
        for (Cell d : kNeighborOrder) {
            Cell next = cur + d;
            if (!passable(grid, extra_blocked, next) || dist.count(next)) continue;
            dist[next] = dist[cur] + 1;
            if (next == goal) return dist[next];
            q.push_back(next);
        }
    }
    return std::nullopt;
}

Outcome traverse(WorldState& ws, const Path& path) {
    if (path.cells.empty()) return Outcome::ok();
    const int horizon_cells = static_cast<int>(kLocalHorizon / kCellSize);

    // Index of the robot's cell on the path (paths start at the robot).
    size_t pos = 0;
    if (path.cells[0] != ws.robot.cell) {
        return Outcome::fail("bad_path", "path does not start at the robot");
    }
    while (pos + 1 < path.cells.size()) {
        // Look ahead along the remaining path within the local horizon.
        for (size_t k = pos + 1; k <= pos + horizon_cells && k < path.cells.size(); ++k) {
            auto blocker = ws.blocking_entity(ws.robot.floor_id, path.cells[k]);
            if (blocker) {
                // Halt facing the obstruction so it is in view for recovery.
                if (path.cells[k] != ws.robot.cell) {
                    ws.robot.heading = bearing_heading(ws.robot.cell, path.cells[k]);
                }
                return Outcome::fail("blocked", "path blocked by " + *blocker);
            }
        }
        Cell next = path.cells[pos + 1];
        ws.robot.heading = bearing_heading(ws.robot.cell, next);
        ws.robot.cell = next;
        ++pos;
    }
    ws.check_invariants();
    return Outcome::ok();
}

std::optional<Cell> nearest_ground_point(const WorldState& ws, const std::string& object_id,
                                         GroundPointError* err) {
    const Object* obj = ws.object(object_id);
    if (!obj || obj->grasped || obj->floor_id != ws.robot.floor_id) {
        if (err) *err = {"object_missing", "no object " + object_id + " on this floor"};
        return std::nullopt;
    }
    const FloorMap* fm = ws.building.floor(obj->floor_id);
    std::set<Cell> avoid = semantic_avoid_cells(ws, obj->floor_id);

    std::vector<Cell> candidates;
    for (Cell c : obj->footprint()) {
        for (Cell d : kNeighborOrder) {
            Cell adj = c + d;
            if (!fm->is_free(adj)) continue;
            if (ws.cell_blocked(obj->floor_id, adj, "", true)) continue;
            candidates.push_back(adj);
        }
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    std::optional<Cell> best;
    double best_dist = 0;
    for (Cell c : candidates) {
        if (c != ws.robot.cell) {
            std::set<Cell> blocked = avoid;
            for (Cell fc : obj->footprint()) blocked.insert(fc);
            if (!bfs_path_length(*fm, ws.robot.cell, c, blocked)) continue;
        }
        double d = cell_distance(ws.robot.cell, c);
        if (!best || d < best_dist || (d == best_dist && c < *best)) {
            best = c;
            best_dist = d;
        }
    }
    if (!best && err) *err = {"unapproachable", "object " + object_id + " is unapproachable"};
    return best;
}

std::set<Cell> semantic_avoid_cells(const WorldState& ws, int floor_id) {
    std::set<Cell> out;
    for (const auto& [id, obj] : ws.objects) {
        if (obj.grasped || obj.floor_id != floor_id) continue;
        if (obj.category == "wet floor sign") {
            for (Cell c : obj.footprint()) out.insert(c);
        }
    }
    return out;
}

}  // namespace moma
