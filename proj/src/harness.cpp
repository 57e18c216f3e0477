#include "moma/harness.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "moma/solver.hpp"

namespace moma {

namespace {

// --- builtin tasks ----------------------------------------------------------

const std::vector<TaskSpec>& task_table() {
    static const std::vector<TaskSpec> tasks = {
        {"retrieve_marker",
         TaskGoal::Kind::Retrieve,
         {"Please fetch the whiteboard marker and bring it back here.",
          "I left a marker somewhere in the building - find it and bring it to me.",
          "Grab the marker for me and return to this spot."},
         "marker",
         {}},
        {"retrieve_soda",
         TaskGoal::Kind::Retrieve,
         {"Could you get me a diet soda and bring it back here?",
          "I'd like a sugar-free soda - please find one and come back.",
          "Bring me a diet soda can, please, and return to this spot."},
         "soda can",
         {{"diet", "true"}}},
        {"rearrange_chairs",
         TaskGoal::Kind::Rearrange,
         {"Please push the chairs into the marked area so they line up.",
          "Tidy the room by moving all chairs into the target area.",
          "Arrange the chairs inside the highlighted region."},
         "chair",
         {}},
    };
    return tasks;
}

// --- builtin buildings ------------------------------------------------------

struct RoomDef {
    std::string name;
    int r0, c0, r1, c1;
    bool top;  // rooms above the corridor open through row 7, below through 12
};

constexpr int kRows = 20;
constexpr int kCols = 28;
constexpr int kFloors = 2;

const std::vector<RoomDef>& room_defs() {
    static const std::vector<RoomDef> rooms = {
        {"T1", 1, 1, 6, 8, true},    {"T2", 1, 10, 6, 17, true},
        {"T3", 1, 19, 6, 26, true},  {"B1", 13, 1, 18, 8, false},
        {"B2", 13, 10, 18, 17, false}, {"B3", 13, 19, 18, 26, false},
    };
    return rooms;
}

int building_delta(const std::string& name) {
    if (name == "building_a") return 0;
    if (name == "building_b") return 1;
    if (name == "building_c") return 2;
    throw std::invalid_argument("unknown building: " + name);
}

// Column where the 4-cell opening of a room begins.
int opening_col(const RoomDef& room, int delta) { return room.c0 + 2 + delta; }

int opening_row(const RoomDef& room) { return room.top ? room.r0 + 6 : room.r0 - 1; }

Cell room_landmark_cell(const RoomDef& room, int delta) {
    return {room.top ? room.r1 : room.r0, opening_col(room, delta) + 1};
}

std::string room_landmark_id(int floor, const std::string& room) {
    return "f" + std::to_string(floor) + "_" + room;
}

const RoomDef& room_def(const std::string& name) {
    for (const auto& r : room_defs()) {
        if (r.name == name) return r;
    }
    throw std::invalid_argument("unknown room: " + name);
}

// Cells of a room guaranteed visible from its landmark pose (a 90-degree
// wedge, well inside the 120-degree field of view).
std::vector<Cell> room_wedge(const RoomDef& room, int delta) {
    Cell lm = room_landmark_cell(room, delta);
    std::vector<Cell> out;
    for (int depth = 2; depth <= 4; ++depth) {
        int row = room.top ? lm.row - depth : lm.row + depth;
        if (row < room.r0 || row > room.r1) continue;
        for (int col = lm.col - 2; col <= lm.col + 2; ++col) {
            if (col < room.c0 || col > room.c1) continue;
            if (std::abs(col - lm.col) > depth) continue;
            out.push_back({row, col});
        }
    }
    return out;
}

}  // namespace

TaskSpec builtin_task(const std::string& id) {
    for (const auto& t : task_table()) {
        if (t.id == id) return t;
    }
    throw std::invalid_argument("unknown task: " + id);
}

std::vector<TaskSpec> builtin_tasks() { return task_table(); }

std::vector<std::string> builtin_buildings() {
    return {"building_a", "building_b", "building_c"};
}

nlohmann::json builtin_building_config(const std::string& name) {
    int delta = building_delta(name);

    std::vector<std::string> grid(kRows, std::string(kCols, '.'));
    for (int c = 0; c < kCols; ++c) grid[0][c] = grid[kRows - 1][c] = '#';
    for (int r = 0; r < kRows; ++r) grid[r][0] = grid[r][kCols - 1] = '#';
    for (int c = 1; c < kCols - 1; ++c) grid[7][c] = grid[12][c] = '#';
    for (int r = 1; r <= 6; ++r) grid[r][9] = grid[r][18] = '#';
    for (int r = 13; r <= 18; ++r) grid[r][9] = grid[r][18] = '#';
    for (const auto& room : room_defs()) {
        int o = opening_col(room, delta);
        int row = opening_row(room);
        for (int c = o; c < o + 4; ++c) grid[row][c] = '.';
    }

    nlohmann::json floors = nlohmann::json::array();
    nlohmann::json landmarks = nlohmann::json::array();
    for (int f = 1; f <= kFloors; ++f) {
        nlohmann::json rooms = nlohmann::json::object();
        for (const auto& room : room_defs()) {
            rooms[room.name] = {room.r0, room.c0, room.r1, room.c1};
        }
        floors.push_back({{"id", f}, {"grid", grid}, {"rooms", rooms}});
        for (const auto& room : room_defs()) {
            Cell lm = room_landmark_cell(room, delta);
            landmarks.push_back({{"id", room_landmark_id(f, room.name)},
                                 {"floor", f},
                                 {"cell", {lm.row, lm.col}},
                                 {"heading", room.top ? "N" : "S"},
                                 {"label", "room " + room.name + " on floor " +
                                               std::to_string(f)}});
        }
        landmarks.push_back({{"id", "f" + std::to_string(f) + "_elev"},
                             {"floor", f},
                             {"cell", {10, 25}},
                             {"heading", "E"},
                             {"label", "elevator area on floor " + std::to_string(f)},
                             {"elevator", true}});
    }

    nlohmann::json per_floor_cab = nlohmann::json::object();
    nlohmann::json per_floor_panel = nlohmann::json::object();
    nlohmann::json per_floor_exit = nlohmann::json::object();
    nlohmann::json served = nlohmann::json::array();
    for (int f = 1; f <= kFloors; ++f) {
        std::string fs = std::to_string(f);
        per_floor_cab[fs] = {9, 26};
        per_floor_panel[fs] = {10, 26};
        per_floor_exit[fs] = {10, 25};
        served.push_back(f);
    }

    return {{"name", name},
            {"floors", floors},
            {"landmarks", landmarks},
            {"elevators", nlohmann::json::array({{{"id", "elev1"},
                                                  {"floors", served},
                                                  {"cab_cell", per_floor_cab},
                                                  {"panel_cell", per_floor_panel},
                                                  {"exit_cell", per_floor_exit}}})},
            {"robot_start", {{"floor", 1}, {"cell", {10, 25}}, {"heading", "E"}}}};
}

// --- scenario randomization -------------------------------------------------

namespace {

struct ScenarioDraw {
    uint64_t base;
    double operator()(const std::string& tag) const {
        return unit_draw(hash_combine(base, fnv1a(tag)));
    }
    int pick(const std::string& tag, int n) const {
        return static_cast<int>((*this)(tag) * n) % n;
    }
};

const char* kDistractorCategories[] = {"mug", "book", "plant", "bottle", "stapler"};
const char* kDistractorColors[] = {"red", "blue", "green", "black", "white"};

}  // namespace

Scenario randomize_scenario(const std::string& building, const TaskSpec& task, uint64_t seed,
                            const ScenarioOptions& opts) {
    nlohmann::json base = builtin_building_config(building);
    int delta = building_delta(building);
    const auto& rooms = room_defs();

    for (int attempt = 0; attempt < 100; ++attempt) {
        ScenarioDraw draw{hash_combine(
            hash_combine(fnv1a(building + "/" + task.id), seed), attempt)};

        Scenario scen;
        scen.task_id = task.id;
        scen.cross_floor =
            opts.cross_floor.value_or(task.kind == TaskGoal::Kind::Retrieve);
        scen.door = opts.door.value_or(draw("door") < 0.4);
        scen.box = opts.box.value_or(draw("box") < 0.4);
        scen.wet_sign = opts.wet_sign.value_or(draw("wet") < 0.3);

        int start_floor = scen.cross_floor ? 1 + draw.pick("startf", kFloors) : 1;
        int target_floor = scen.cross_floor
                               ? (start_floor == 1 ? 2 : 1)
                               : start_floor;

        const RoomDef* start_room = &rooms[draw.pick("startr", rooms.size())];
        const RoomDef* target_room;
        if (task.kind == TaskGoal::Kind::Rearrange) {
            target_room = &room_def("B2");  // chairs live in one fixed room
            while (!scen.cross_floor && start_room->name == target_room->name) {
                start_room = &rooms[(start_room - rooms.data() + 1) % rooms.size()];
            }
        } else {
            target_room = &rooms[draw.pick("targetr", rooms.size())];
            while (!scen.cross_floor && start_room->name == target_room->name) {
                target_room = &rooms[(target_room - rooms.data() + 1) % rooms.size()];
            }
        }

        nlohmann::json cfg = base;
        cfg["seed"] = hash_combine(seed, attempt);
        std::string start_lm = room_landmark_id(start_floor, start_room->name);
        Cell start_cell = room_landmark_cell(*start_room, delta);
        cfg["robot_start"] = {{"floor", start_floor},
                              {"cell", {start_cell.row, start_cell.col}},
                              {"heading", start_room->top ? "N" : "S"}};

        // Cells no sampled object may occupy, keyed by floor.
        std::map<int, std::set<Cell>> reserved;
        auto reserve = [&](int floor, Cell c) { reserved[floor].insert(c); };
        for (int f = 1; f <= kFloors; ++f) {
            for (const auto& room : rooms) {
                Cell lm = room_landmark_cell(room, delta);
                reserve(f, lm);
                // Keep the door approach cells on the room side clear.
                int o = opening_col(room, delta);
                int inner = room.top ? room.r1 : room.r0;
                for (int c = o; c < o + 4; ++c) reserve(f, {inner, c});
            }
        }

        nlohmann::json objects = nlohmann::json::array();
        TaskGoal goal;

        if (task.kind == TaskGoal::Kind::Retrieve) {
            goal.kind = TaskGoal::Kind::Retrieve;
            goal.target_category = task.target_category;
            goal.target_filter = task.target_filter;
            goal.deliver_landmark = start_lm;

            std::vector<Cell> wedge = room_wedge(*target_room, delta);
            Cell tc = wedge[draw.pick("targetc", wedge.size())];
            reserve(target_floor, tc);
            for (Cell d : {Cell{-1, 0}, Cell{0, -1}, Cell{0, 1}, Cell{1, 0}}) {
                reserve(target_floor, tc + d);
            }
            if (task.id == "retrieve_soda") {
                objects.push_back({{"id", "soda_target"},
                                   {"category", "soda can"},
                                   {"attributes", {{"brand", "sprizz"}, {"diet", "true"}}},
                                   {"floor", target_floor},
                                   {"cell", {tc.row, tc.col}}});
                int placed = 0;
                for (Cell c : wedge) {
                    if (placed >= 2 || reserved[target_floor].count(c)) continue;
                    reserve(target_floor, c);
                    objects.push_back({{"id", "soda_reg" + std::to_string(++placed)},
                                       {"category", "soda can"},
                                       {"attributes", {{"brand", "sprizz"}}},
                                       {"floor", target_floor},
                                       {"cell", {c.row, c.col}}});
                }
            } else {
                objects.push_back({{"id", "marker_target"},
                                   {"category", "marker"},
                                   {"attributes", {{"color", "blue"}}},
                                   {"floor", target_floor},
                                   {"cell", {tc.row, tc.col}}});
            }
        } else {
            goal.kind = TaskGoal::Kind::Rearrange;
            goal.rearrange_category = "chair";
            goal.goal_floor = target_floor;
            for (int r = 16; r <= 18; ++r) {
                for (int c = 12; c <= 14; ++c) goal.goal_region.insert({r, c});
            }
            // chair1 is pushed south into the region, chair2 east.
            const std::vector<std::pair<std::string, Cell>> chairs = {{"chair1", {14, 13}},
                                                                      {"chair2", {17, 11}}};
            for (const auto& [id, cell] : chairs) {
                objects.push_back({{"id", id},
                                   {"category", "chair"},
                                   {"floor", target_floor},
                                   {"cell", {cell.row, cell.col}},
                                   {"heavy", true},
                                   {"graspable", false}});
            }
            for (Cell c : goal.goal_region) reserve(target_floor, c);
            for (Cell c : {Cell{14, 13}, Cell{15, 13}, Cell{13, 13}, Cell{17, 10},
                           Cell{17, 11}, Cell{17, 12}}) {
                reserve(target_floor, c);
            }
        }

        // Obstacles along the nominal path from the floor entry to the target.
        WorldState shell = load_world(base);
        const FloorMap* fm = shell.building.floor(target_floor);
        Cell entry = scen.cross_floor ? Cell{10, 25} : start_cell;
        Cell goal_cell = room_landmark_cell(*target_room, delta);
        std::vector<Cell> corridor_path;
        if (auto path = plan_global(*fm, entry, goal_cell)) {
            for (Cell c : path->cells) {
                if (c.row >= 8 && c.row <= 11 && c.col <= 24 &&
                    cell_distance(c, entry) > 0.75) {
                    corridor_path.push_back(c);
                }
            }
        }

        nlohmann::json doors = nlohmann::json::array();
        if (scen.door) {
            int o = opening_col(*target_room, delta);
            int row = opening_row(*target_room);
            nlohmann::json cells = nlohmann::json::array();
            for (int c = o; c < o + 4; ++c) cells.push_back({row, c});
            doors.push_back({{"id", "door1"},
                             {"floor", target_floor},
                             {"cells", cells},
                             {"state", "closed"},
                             {"hinge", draw("hinge") < 0.5 ? "left" : "right"}});
        }
        if (scen.box && corridor_path.size() >= 3) {
            Cell bc = corridor_path[corridor_path.size() / 2];
            reserve(target_floor, bc);
            objects.push_back({{"id", "box1"},
                               {"category", "box"},
                               {"floor", target_floor},
                               {"cell", {bc.row, bc.col}},
                               {"heavy", true},
                               {"graspable", false}});
        } else {
            scen.box = false;
        }
        if (scen.wet_sign && corridor_path.size() >= 6) {
            Cell wc = corridor_path[corridor_path.size() / 4];
            if (!reserved[target_floor].count(wc)) {
                reserve(target_floor, wc);
                objects.push_back({{"id", "wet1"},
                                   {"category", "wet floor sign"},
                                   {"floor", target_floor},
                                   {"cell", {wc.row, wc.col}},
                                   {"heavy", true},
                                   {"graspable", false},
                                   {"pushable", false}});
            } else {
                scen.wet_sign = false;
            }
        } else {
            scen.wet_sign = false;
        }

        // Distractor clutter in the rooms.
        scen.distractors = 5 + draw.pick("nd", 21);
        int placed = 0;
        for (int i = 0; placed < scen.distractors && i < scen.distractors * 20; ++i) {
            std::string tag = "d" + std::to_string(i);
            int floor = draw(tag + "f") < 0.5 ? start_floor : target_floor;
            const RoomDef& room = rooms[draw.pick(tag + "r", rooms.size())];
            Cell c{room.r0 + draw.pick(tag + "row", room.r1 - room.r0 + 1),
                   room.c0 + draw.pick(tag + "col", room.c1 - room.c0 + 1)};
            if (!fm->is_free(c) || reserved[floor].count(c)) continue;
            reserve(floor, c);
            const char* cat =
                kDistractorCategories[draw.pick(tag + "cat", 5)];
            objects.push_back({{"id", "distractor" + std::to_string(++placed)},
                               {"category", cat},
                               {"attributes",
                                {{"color", kDistractorColors[draw.pick(tag + "color", 5)]}}},
                               {"floor", floor},
                               {"cell", {c.row, c.col}}});
        }

        cfg["objects"] = objects;
        cfg["doors"] = doors;

        WorldState ws;
        try {
            ws = load_world(cfg);
        } catch (const ConfigError&) {
            continue;
        }
        DryRunResult dry = solver_dry_run(ws, goal, 23);
        if (!dry.success) continue;

        scen.config = std::move(cfg);
        scen.ws = std::move(ws);
        scen.goal = std::move(goal);
        scen.solver_steps = dry.steps;
        return scen;
    }
    throw std::runtime_error("degenerate scenario");
}

// --- failure categorization -------------------------------------------------

std::string failure_category_name(FailureCategory c) {
    switch (c) {
        case FailureCategory::None: return "none";
        case FailureCategory::WrongObject: return "wrong-object";
        case FailureCategory::WrongButton: return "wrong-button";
        case FailureCategory::CollisionReasoning: return "collision-reasoning";
        case FailureCategory::NavigationStuck: return "navigation-stuck";
        case FailureCategory::SensorFault: return "sensor-fault";
        case FailureCategory::StepBudget: return "step-budget";
        case FailureCategory::SemanticViolation: return "semantic-violation";
    }
    return "none";
}

FailureCategory categorize_failure(const ShortTermMemory& stm, const WorldState& final_ws,
                                   const TaskGoal& goal, bool success) {
    if (success) throw std::invalid_argument("not a failure");

    if (goal.kind == TaskGoal::Kind::Retrieve && final_ws.robot.held_object) {
        const Object* held = final_ws.object(*final_ws.robot.held_object);
        bool matches = held && held->category == goal.target_category;
        if (matches) {
            for (const auto& [k, v] : goal.target_filter) {
                auto it = held->attributes.find(k);
                if (it == held->attributes.end() || it->second != v) matches = false;
            }
        }
        if (!matches) return FailureCategory::WrongObject;
    }
    for (const auto& step : stm.steps) {
        if (step.outcome.code == "wrong_button") return FailureCategory::WrongButton;
    }
    for (const auto& step : stm.steps) {
        if (step.outcome.code == "collision") return FailureCategory::CollisionReasoning;
    }
    static const std::set<std::string> nav_skills = {"goto_landmark",
                                                     "navigate_to_point_on_ground", "move_base"};
    int consecutive = 0;
    for (const auto& step : stm.steps) {
        if (!step.outcome.success && nav_skills.count(step.skill)) {
            if (++consecutive >= 3) return FailureCategory::NavigationStuck;
        } else {
            consecutive = 0;
        }
    }
    if (!stm.steps.empty() && stm.steps.back().outcome.code == "sensor_fault") {
        return FailureCategory::SensorFault;
    }
    for (const auto& step : stm.steps) {
        if (step.outcome.semantic_violation) return FailureCategory::SemanticViolation;
    }
    return FailureCategory::StepBudget;
}

// --- benchmark --------------------------------------------------------------

TrialResult run_scenario_trial(const Scenario& scenario, const std::string& instruction,
                               const BenchmarkConfig& config, const std::string& log_dir) {
    EngineConfig ec;
    ec.mode = config.mode;
    ec.max_steps = config.max_steps;
    ec.backend = config.backend;
    ec.noise = config.noise;
    ec.ltm = config.ltm;
    ec.ik_failure_rate = config.ik_failure_rate;
    ec.log_dir = log_dir;
    ec.seed = config.seed;

    auto start = std::chrono::steady_clock::now();
    TrialRun run = run_trial(scenario.ws, scenario.goal, instruction, ec);
    auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);

    TrialResult result;
    result.task = scenario.task_id;
    result.success = run.success;
    result.steps = run.steps;
    result.category = run.success
                          ? FailureCategory::None
                          : categorize_failure(run.stm, run.final_ws, scenario.goal, false);
    result.wall_time_s = elapsed.count();
    result.final_state_hash = run.final_state_hash;
    result.invocations = run.invocations;
    return result;
}

BenchmarkReport run_benchmark(const std::vector<TaskSpec>& tasks, const BenchmarkConfig& config) {
    if (config.trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (!config.backend) throw std::invalid_argument("benchmark needs a backend");

    BenchmarkReport report;
    for (const auto& task : tasks) {
        for (int t = 0; t < config.trials; ++t) {
            // The scenario depends only on the seed so that every phrasing of
            // a task runs against the same world.
            uint64_t scen_seed = config.seed + static_cast<uint64_t>(t);
            Scenario scenario = randomize_scenario(config.building, task, scen_seed);
            for (int p = 0; p < static_cast<int>(task.phrasings.size()); ++p) {
                std::string log_dir;
                if (!config.out_dir.empty()) {
                    log_dir = config.out_dir + "/" + task.id + "_p" + std::to_string(p) +
                              "_s" + std::to_string(t);
                }
                TrialResult result =
                    run_scenario_trial(scenario, task.phrasings[p], config, log_dir);
                result.phrasing = p;
                result.seed = scen_seed;
                if (!log_dir.empty()) {
                    std::filesystem::create_directories(log_dir);
                    nlohmann::json j = {{"task", result.task},
                                        {"phrasing", result.phrasing},
                                        {"seed", result.seed},
                                        {"success", result.success},
                                        {"steps", result.steps},
                                        {"category", failure_category_name(result.category)},
                                        {"final_state_hash", result.final_state_hash}};
                    std::ofstream(log_dir + "/trial.json") << j.dump(2) << "\n";
                }
                report.trials.push_back(std::move(result));
            }
        }
    }
    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        std::ofstream(config.out_dir + "/report.txt") << report.text();
        std::ofstream(config.out_dir + "/report.csv") << report.csv();
    }
    return report;
}

double BenchmarkReport::task_rate(const std::string& task) const {
    int total = 0, wins = 0;
    for (const auto& t : trials) {
        if (t.task != task) continue;
        ++total;
        wins += t.success ? 1 : 0;
    }
    return total == 0 ? 0.0 : 100.0 * wins / total;
}

double BenchmarkReport::overall_rate() const {
    if (trials.empty()) return 0.0;
    int wins = 0;
    for (const auto& t : trials) wins += t.success ? 1 : 0;
    return 100.0 * wins / static_cast<int>(trials.size());
}

std::map<std::string, int> BenchmarkReport::failure_histogram() const {
    std::map<std::string, int> out;
    for (const auto& t : trials) {
        if (!t.success) ++out[failure_category_name(t.category)];
    }
    return out;
}

std::string BenchmarkReport::text() const {
    std::ostringstream out;
    std::vector<std::string> tasks;
    for (const auto& t : trials) {
        if (std::find(tasks.begin(), tasks.end(), t.task) == tasks.end()) {
            tasks.push_back(t.task);
        }
    }
    char buf[128];
    out << "task                     trials  success rate\n";
    for (const auto& task : tasks) {
        int total = 0;
        for (const auto& t : trials) total += t.task == task ? 1 : 0;
        std::snprintf(buf, sizeof(buf), "%-24s %6d  %10.1f%%\n", task.c_str(), total,
                      task_rate(task));
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "%-24s %6zu  %10.1f%%\n", "overall", trials.size(),
                  overall_rate());
    out << buf;
    auto hist = failure_histogram();
    if (!hist.empty()) {
        out << "\nfailures by category:\n";
        for (const auto& [cat, n] : hist) out << "  " << cat << ": " << n << "\n";
    }
    return out.str();
}

std::string BenchmarkReport::csv() const {
    std::ostringstream out;
    out << "task,phrasing,seed,success,steps,category\n";
    for (const auto& t : trials) {
        out << t.task << "," << t.phrasing << "," << t.seed << "," << (t.success ? 1 : 0) << ","
            << t.steps << "," << failure_category_name(t.category) << "\n";
    }
    return out.str();
}

BenchmarkReport collect_report(const std::string& runs_dir) {
    BenchmarkReport report;
    if (!std::filesystem::exists(runs_dir)) {
        throw std::runtime_error("no such directory: " + runs_dir);
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(runs_dir)) {
        if (entry.path().filename() == "trial.json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::ifstream in(file);
        nlohmann::json j;
        in >> j;
        TrialResult t;
        t.task = j.value("task", "");
        t.phrasing = j.value("phrasing", 0);
        t.seed = j.value("seed", 0ull);
        t.success = j.value("success", false);
        t.steps = j.value("steps", 0);
        t.final_state_hash = j.value("final_state_hash", 0ull);
        std::string cat = j.value("category", "none");
        for (int c = 0; c <= static_cast<int>(FailureCategory::SemanticViolation); ++c) {
            if (failure_category_name(static_cast<FailureCategory>(c)) == cat) {
                t.category = static_cast<FailureCategory>(c);
            }
        }
        report.trials.push_back(std::move(t));
    }
    return report;
}

// --- offline skill-parameter evaluation -------------------------------------

namespace {

// Cells in front of an east-facing robot at (8,2) inside a 16x16 room, well
// within the field of view; ordered near to far.
std::vector<Cell> cone_cells() {
    std::vector<Cell> out;
    for (int col = 4; col <= 13; ++col) {
        int spread = std::min(col - 3, 5);
        for (int row = 8 - spread; row <= 8 + spread; ++row) {
            if (row < 1 || row > 14) continue;
            out.push_back({row, col});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](Cell a, Cell b) {
        return cell_distance({8, 2}, a) < cell_distance({8, 2}, b);
    });
    return out;
}

nlohmann::json room_world_config() {
    std::vector<std::string> grid(16, std::string(16, '.'));
    for (int c = 0; c < 16; ++c) grid[0][c] = grid[15][c] = '#';
    for (int r = 0; r < 16; ++r) grid[r][0] = grid[r][15] = '#';
    return {{"floors", nlohmann::json::array({{{"id", 1}, {"grid", grid}}})},
            {"robot_start", {{"floor", 1}, {"cell", {8, 2}}, {"heading", "E"}}}};
}

nlohmann::json elevator_world_config() {
    std::vector<std::string> grid(12, std::string(12, '.'));
    for (int c = 0; c < 12; ++c) grid[0][c] = grid[11][c] = '#';
    for (int r = 0; r < 12; ++r) grid[r][0] = grid[r][11] = '#';
    nlohmann::json floors = nlohmann::json::array();
    nlohmann::json cab = nlohmann::json::object();
    nlohmann::json panel = nlohmann::json::object();
    nlohmann::json exits = nlohmann::json::object();
    nlohmann::json served = nlohmann::json::array();
    for (int f = 1; f <= 3; ++f) {
        floors.push_back({{"id", f}, {"grid", grid}});
        std::string fs = std::to_string(f);
        cab[fs] = {5, 9};
        panel[fs] = {6, 9};
        exits[fs] = {6, 8};
        served.push_back(f);
    }
    return {{"floors", floors},
            {"elevators", nlohmann::json::array({{{"id", "elev1"},
                                                  {"floors", served},
                                                  {"cab_cell", cab},
                                                  {"panel_cell", panel},
                                                  {"exit_cell", exits}}})},
            {"robot_start", {{"floor", 2}, {"cell", {6, 8}}, {"heading", "E"}}}};
}

// Distinct clutter cells drawn from the visibility cone.
std::vector<Cell> sample_cone(const ScenarioDraw& draw, int n, const std::set<Cell>& taken) {
    static const std::vector<Cell> cone = cone_cells();
    std::vector<Cell> out;
    std::set<Cell> used = taken;
    for (int i = 0; static_cast<int>(out.size()) < n && i < n * 30; ++i) {
        Cell c = cone[draw.pick("cone" + std::to_string(i), cone.size())];
        if (used.count(c)) continue;
        used.insert(c);
        out.push_back(c);
    }
    return out;
}

}  // namespace

nlohmann::json OfflineInstance::to_json() const {
    return {{"id", id}, {"skill", skill}, {"group", group}, {"seed", seed}};
}

OfflineInstance OfflineInstance::from_json(const nlohmann::json& j) {
    return {j.at("id").get<std::string>(), j.at("skill").get<std::string>(),
            j.at("group").get<std::string>(), j.at("seed").get<uint64_t>()};
}

MaterializedInstance materialize_instance(const OfflineInstance& inst) {
    ScenarioDraw draw{hash_combine(fnv1a(inst.group), inst.seed)};
    MaterializedInstance mat;
    mat.skill = inst.skill;
    mat.group = inst.group;
    mat.slot_index = 0;

    if (inst.group == "pickup_low" || inst.group == "pickup_high") {
        mat.slot = "object";
        nlohmann::json cfg = room_world_config();
        nlohmann::json objects = nlohmann::json::array();
        int n = inst.group == "pickup_low" ? 5 + draw.pick("n", 6) : 20 + draw.pick("n", 6);
        std::vector<Cell> cells = sample_cone(draw, n + 2, {});
        if (static_cast<int>(cells.size()) < n + 2) {
            throw std::invalid_argument("clutter sampling failed for instance " + inst.id);
        }
        // A same-brand regular can sits closer to the camera than the target.
        objects.push_back({{"id", "soda_reg"},
                           {"category", "soda can"},
                           {"attributes", {{"brand", "sprizz"}}},
                           {"floor", 1},
                           {"cell", {cells[0].row, cells[0].col}}});
        objects.push_back({{"id", "soda_target"},
                           {"category", "soda can"},
                           {"attributes", {{"brand", "sprizz"}, {"diet", "true"}}},
                           {"floor", 1},
                           {"cell", {cells[1].row, cells[1].col}}});
        for (int i = 0; i < n; ++i) {
            Cell c = cells[i + 2];
            objects.push_back(
                {{"id", "distractor" + std::to_string(i + 1)},
                 {"category", kDistractorCategories[draw.pick("cat" + std::to_string(i), 5)]},
                 {"attributes",
                  {{"color", kDistractorColors[draw.pick("color" + std::to_string(i), 5)]}}},
                 {"floor", 1},
                 {"cell", {c.row, c.col}}});
        }
        cfg["objects"] = objects;
        mat.ws = load_world(cfg);
        mat.ground_truth = "soda_target";
    } else if (inst.group == "push") {
        mat.slot = "object";
        nlohmann::json cfg = room_world_config();
        nlohmann::json objects = nlohmann::json::array();
        objects.push_back({{"id", "box_target"},
                           {"category", "box"},
                           {"floor", 1},
                           {"cell", {8, 6}},
                           {"heavy", true},
                           {"graspable", false}});
        std::vector<Cell> cells = sample_cone(draw, 4, {{8, 6}, {8, 5}, {8, 7}});
        for (size_t i = 0; i < cells.size(); ++i) {
            objects.push_back(
                {{"id", "distractor" + std::to_string(i + 1)},
                 {"category", kDistractorCategories[draw.pick("cat" + std::to_string(i), 5)]},
                 {"floor", 1},
                 {"cell", {cells[i].row, cells[i].col}}});
        }
        cfg["objects"] = objects;
        mat.ws = load_world(cfg);
        mat.ground_truth = "box_target";
    } else if (inst.group == "call_elevator") {
        mat.slot = "button";
        mat.ws = load_world(elevator_world_config());
        mat.ground_truth =
            draw("dir") < 0.5 ? "elev1:call2:up" : "elev1:call2:down";
    } else {
        throw std::invalid_argument("unknown offline group: " + inst.group);
    }

    // Reject instances whose ground truth is not an offered candidate.
    static const SkillRegistry registry = default_registry();
    const SkillSpec* skill = registry.find(mat.skill);
    if (!skill) throw std::invalid_argument("unknown skill in instance " + inst.id);
    Observation obs = observe(mat.ws, {}, 1);
    bool found = false;
    for (const auto& c : candidates_for(*skill, mat.ws, obs, mat.resolved_prefix)) {
        if (c.resolved_value == mat.ground_truth) found = true;
    }
    if (!found) {
        throw std::invalid_argument("ground truth not among candidates for instance " + inst.id);
    }
    return mat;
}

std::vector<OfflineInstance> generate_offline_dataset(int per_group, uint64_t seed) {
    if (per_group < 1) throw std::invalid_argument("per_group must be >= 1");
    std::vector<OfflineInstance> out;
    const std::vector<std::pair<std::string, std::string>> groups = {
        {"pickup_low", "pick_up_object"},
        {"pickup_high", "pick_up_object"},
        {"push", "push_object_on_ground"},
        {"call_elevator", "call_elevator"},
    };
    for (const auto& [group, skill] : groups) {
        for (int i = 0; i < per_group; ++i) {
            OfflineInstance inst;
            inst.id = group + "_" + std::to_string(i + 1);
            inst.skill = skill;
            inst.group = group;
            inst.seed = hash_combine(seed, fnv1a(inst.id));
            materialize_instance(inst);  // fail fast on generation bugs
            out.push_back(std::move(inst));
        }
    }
    return out;
}

void save_offline_dataset(const std::string& path, const std::vector<OfflineInstance>& instances) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& inst : instances) arr.push_back(inst.to_json());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << nlohmann::json{{"instances", arr}}.dump(2) << "\n";
}

std::vector<OfflineInstance> load_offline_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    std::vector<OfflineInstance> out;
    for (const auto& ij : j.at("instances")) {
        OfflineInstance inst = OfflineInstance::from_json(ij);
        materialize_instance(inst);  // validates ground truth membership
        out.push_back(std::move(inst));
    }
    return out;
}

double OfflineReport::rate(const std::string& group) const {
    auto it = per_group.find(group);
    if (it == per_group.end() || it->second.second == 0) return 0.0;
    return 100.0 * it->second.first / it->second.second;
}

double OfflineReport::average_rate() const {
    if (per_group.empty()) return 0.0;
    double sum = 0;
    for (const auto& [group, _] : per_group) sum += rate(group);
    return sum / per_group.size();
}

std::string OfflineReport::text() const {
    std::ostringstream out;
    char buf[128];
    out << "group            correct   total    rate\n";
    for (const auto& [group, counts] : per_group) {
        std::snprintf(buf, sizeof(buf), "%-16s %7d %7d  %6.1f%%\n", group.c_str(), counts.first,
                      counts.second, rate(group));
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "%-16s %7s %7s  %6.1f%%\n", "average", "", "",
                  average_rate());
    out << buf;
    return out.str();
}

std::string OfflineReport::csv() const {
    std::ostringstream out;
    out << "group,correct,total,rate\n";
    for (const auto& [group, counts] : per_group) {
        out << group << "," << counts.first << "," << counts.second << "," << rate(group) << "\n";
    }
    return out.str();
}

OfflineReport run_offline_eval(const std::vector<OfflineInstance>& instances, Mode mode,
                               Backend& backend) {
    static const SkillRegistry registry = default_registry();
    OfflineReport report;
    EngineConfig ec;
    ec.mode = mode;

    for (const auto& inst : instances) {
        MaterializedInstance mat = materialize_instance(inst);
        const SkillSpec* skill = registry.find(mat.skill);
        Observation obs = observe(mat.ws, {}, 1);
        std::vector<Candidate> cands =
            candidates_for(*skill, mat.ws, obs, mat.resolved_prefix);
        AnnotatedScene scene = annotate_markers(obs, cands);

        BackendRequest req;
        req.prompt = build_stage2_prompt("pick the right parameter for the skill", mat.skill,
                                         mat.slot, obs, scene, nullptr, ec);
        req.ctx.ws = &mat.ws;
        req.ctx.stage = "stage2";
        req.ctx.skill = mat.skill;
        req.ctx.slot = mat.slot;
        req.ctx.slot_index = mat.slot_index;
        req.ctx.markers = &scene.markers;
        req.ctx.ground_truth = mat.ground_truth;
        req.ctx.group = mat.group;
        req.ctx.use_descriptions = mode == Mode::NoSom;

        std::string predicted;
        BackendResponse resp = backend.complete(req);
        if (mode == Mode::NoSom) {
            auto desc = parse_stage2_description(resp.text);
            const Candidate* c = desc ? resolve_description(scene.markers, *desc) : nullptr;
            if (c) predicted = c->resolved_value;
        } else {
            auto id = parse_stage2_marker(resp.text);
            const Marker* m = id ? scene.markers.by_id(*id) : nullptr;
            if (m) predicted = m->candidate.resolved_value;
        }

        auto& counts = report.per_group[mat.group];
        counts.first += predicted == mat.ground_truth ? 1 : 0;
        counts.second += 1;
    }
    return report;
}

}  // namespace moma
