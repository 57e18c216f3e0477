#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "moma/harness.hpp"

using namespace moma;
using nlohmann::json;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name)
        : path(std::filesystem::temp_directory_path() / ("moma_harness_" + name)) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

StepRecord failed_step(int n, const std::string& skill, const std::string& code) {
    StepRecord r;
    r.step = n;
    r.subtask = "sub";
    r.skill = skill;
    r.outcome = Outcome::fail(code, code);
    return r;
}

int count_with_prefix(const WorldState& ws, const std::string& prefix) {
    int n = 0;
    for (const auto& [id, obj] : ws.objects) n += id.rfind(prefix, 0) == 0 ? 1 : 0;
    return n;
}

}  // namespace

TEST_CASE("builtin tasks") {
    auto tasks = builtin_tasks();
    REQUIRE(tasks.size() == 3);
    for (const auto& t : tasks) {
        CHECK(t.phrasings.size() == 3);
        CHECK(builtin_task(t.id).id == t.id);
    }
    CHECK(builtin_task("retrieve_soda").target_filter.at("diet") == "true");
    CHECK(builtin_task("rearrange_chairs").kind == TaskGoal::Kind::Rearrange);
    CHECK_THROWS_AS(builtin_task("fold_laundry"), std::invalid_argument);
}

TEST_CASE("builtin buildings differ by door placement") {
    auto names = builtin_buildings();
    REQUIRE(names.size() == 3);
    std::vector<int> t1_cols;
    for (const auto& name : names) {
        json cfg = builtin_building_config(name);
        WorldState ws = load_world(cfg);
        CHECK(ws.building.floors.size() == 2);
        const Landmark* lm = ws.building.landmarks.find("f1_T1");
        REQUIRE(lm);
        t1_cols.push_back(lm->cell.col);
        CHECK(ws.building.landmarks.find("f2_elev") != nullptr);
        CHECK(ws.elevators.count("elev1") == 1);
    }
    // Each variant shifts the room openings (and their landmarks) by a column.
    CHECK(t1_cols[1] == t1_cols[0] + 1);
    CHECK(t1_cols[2] == t1_cols[0] + 2);
    CHECK_THROWS_AS(builtin_building_config("building_z"), std::invalid_argument);
}

TEST_CASE("randomize_scenario") {
    TaskSpec task = builtin_task("retrieve_soda");

    SUBCASE("the same seed reproduces the world byte for byte") {
        Scenario a = randomize_scenario("building_a", task, 7);
        Scenario b = randomize_scenario("building_a", task, 7);
        CHECK(a.config.dump() == b.config.dump());
        CHECK(a.ws.state_hash() == b.ws.state_hash());
        CHECK(a.solver_steps == b.solver_steps);
        Scenario c = randomize_scenario("building_a", task, 8);
        CHECK(a.config.dump() != c.config.dump());
    }
    SUBCASE("validated scenarios are solvable within the step budget") {
        for (uint64_t seed = 1; seed <= 5; ++seed) {
            Scenario s = randomize_scenario("building_b", task, seed);
            CHECK(s.solver_steps >= 1);
            CHECK(s.solver_steps <= 23);
            CHECK(s.distractors >= 5);
            CHECK(s.distractors <= 25);
        }
    }
    SUBCASE("options force obstacles into the world") {
        ScenarioOptions opts;
        opts.door = true;
        opts.box = true;
        opts.cross_floor = true;
        Scenario s = randomize_scenario("building_a", task, 4, opts);
        CHECK(s.door);
        CHECK(s.box);
        CHECK(s.cross_floor);
        CHECK(s.ws.doors.count("door1") == 1);
        CHECK(s.ws.objects.count("box1") == 1);
        CHECK(s.ws.robot.floor_id != s.ws.object("soda_target")->floor_id);
    }
    SUBCASE("rearrange scenarios place both chairs outside the goal region") {
        Scenario s = randomize_scenario("building_a", builtin_task("rearrange_chairs"), 3);
        REQUIRE(s.ws.objects.count("chair1") == 1);
        REQUIRE(s.ws.objects.count("chair2") == 1);
        CHECK(s.goal.goal_region.size() == 9);
        CHECK(!s.goal.goal_region.count(s.ws.object("chair1")->anchor));
        CHECK(!s.goal.goal_region.count(s.ws.object("chair2")->anchor));
    }
}

TEST_CASE("categorize_failure") {
    Scenario s = randomize_scenario("building_a", builtin_task("retrieve_soda"), 1);
    ShortTermMemory stm;

    SUBCASE("success is not a failure") {
        CHECK_THROWS_AS(categorize_failure(stm, s.ws, s.goal, true), std::invalid_argument);
    }
    SUBCASE("empty log on a failed retrieve is a step-budget failure") {
        CHECK(categorize_failure(stm, s.ws, s.goal, false) == FailureCategory::StepBudget);
    }
    SUBCASE("holding the wrong object dominates everything") {
        WorldState ws = s.ws;
        ws.robot.held_object = "soda_reg1";  // right category, wrong attributes
        stm.append(failed_step(1, "use_elevator", "wrong_button"));
        CHECK(categorize_failure(stm, ws, s.goal, false) == FailureCategory::WrongObject);
    }
    SUBCASE("wrong button outranks collisions") {
        stm.append(failed_step(1, "push_object_on_ground", "collision"));
        stm.append(failed_step(2, "use_elevator", "wrong_button"));
        CHECK(categorize_failure(stm, s.ws, s.goal, false) == FailureCategory::WrongButton);
    }
    SUBCASE("three consecutive failed navigation steps read as stuck") {
        stm.append(failed_step(1, "goto_landmark", "blocked"));
        stm.append(failed_step(2, "move_base", "target_occupied"));
        stm.append(failed_step(3, "navigate_to_point_on_ground", "blocked"));
        CHECK(categorize_failure(stm, s.ws, s.goal, false) == FailureCategory::NavigationStuck);
    }
    SUBCASE("a success in between resets the navigation streak") {
        stm.append(failed_step(1, "goto_landmark", "blocked"));
        StepRecord ok;
        ok.step = 2;
        ok.skill = "move_base";
        stm.append(ok);
        stm.append(failed_step(3, "goto_landmark", "blocked"));
        stm.append(failed_step(4, "goto_landmark", "blocked"));
        CHECK(categorize_failure(stm, s.ws, s.goal, false) == FailureCategory::StepBudget);
    }
    SUBCASE("a trailing sensor fault is its own category") {
        stm.append(failed_step(1, "pick_up_object", "sensor_fault"));
        CHECK(categorize_failure(stm, s.ws, s.goal, false) == FailureCategory::SensorFault);
    }
    SUBCASE("semantic violations beat the step budget") {
        StepRecord r = failed_step(1, "push_object_on_ground", "semantic");
        r.outcome.semantic_violation = true;
        stm.append(r);
        CHECK(categorize_failure(stm, s.ws, s.goal, false) ==
              FailureCategory::SemanticViolation);
    }
}

TEST_CASE("benchmark report arithmetic") {
    BenchmarkReport report;
    auto add = [&](const std::string& task, bool success, FailureCategory cat) {
        TrialResult t;
        t.task = task;
        t.success = success;
        t.category = cat;
        report.trials.push_back(t);
    };
    add("retrieve_soda", true, FailureCategory::None);
    add("retrieve_soda", false, FailureCategory::StepBudget);
    add("rearrange_chairs", false, FailureCategory::CollisionReasoning);
    add("rearrange_chairs", false, FailureCategory::StepBudget);

    CHECK(report.task_rate("retrieve_soda") == doctest::Approx(50.0));
    CHECK(report.task_rate("rearrange_chairs") == doctest::Approx(0.0));
    CHECK(report.task_rate("unknown") == doctest::Approx(0.0));
    CHECK(report.overall_rate() == doctest::Approx(25.0));
    auto hist = report.failure_histogram();
    CHECK(hist.at("step-budget") == 2);
    CHECK(hist.at("collision-reasoning") == 1);
    CHECK(report.text().find("overall") != std::string::npos);
    CHECK(report.csv().rfind("task,phrasing,seed,success,steps,category\n", 0) == 0);
}

TEST_CASE("run_benchmark writes logs that collect_report can rebuild") {
    TempDir dir("bench");
    OracleBackend backend;
    BenchmarkConfig cfg;
    cfg.backend = &backend;
    cfg.trials = 1;
    cfg.seed = 2;
    cfg.out_dir = dir.path.string();

    BenchmarkReport report = run_benchmark({builtin_task("retrieve_marker")}, cfg);
    REQUIRE(report.trials.size() == 3);  // one seed, three phrasings
    for (const auto& t : report.trials) CHECK(t.success);
    CHECK(std::filesystem::exists(dir.path / "report.txt"));
    CHECK(std::filesystem::exists(dir.path / "report.csv"));
    CHECK(std::filesystem::exists(dir.path / "retrieve_marker_p0_s0" / "trial.json"));
    CHECK(std::filesystem::exists(dir.path / "retrieve_marker_p1_s0" / "transcript.jsonl"));

    BenchmarkReport collected = collect_report(dir.path.string());
    REQUIRE(collected.trials.size() == report.trials.size());
    CHECK(collected.overall_rate() == doctest::Approx(report.overall_rate()));
    CHECK(collected.trials[0].final_state_hash != 0);
    CHECK_THROWS_AS(collect_report((dir.path / "missing").string()), std::runtime_error);
    CHECK_THROWS_AS(run_benchmark({}, BenchmarkConfig{}), std::invalid_argument);
}

TEST_CASE("offline dataset generation") {
    auto instances = generate_offline_dataset(3, 5);
    REQUIRE(instances.size() == 12);

    SUBCASE("ids, groups, and seeds are stable") {
        CHECK(instances[0].id == "pickup_low_1");
        CHECK(instances[0].skill == "pick_up_object");
        auto again = generate_offline_dataset(3, 5);
        for (size_t i = 0; i < instances.size(); ++i) {
            CHECK(instances[i].seed == again[i].seed);
        }
        CHECK_THROWS_AS(generate_offline_dataset(0, 5), std::invalid_argument);
    }
    SUBCASE("materialized clutter respects the group ranges") {
        for (const auto& inst : instances) {
            MaterializedInstance mat = materialize_instance(inst);
            int clutter = count_with_prefix(mat.ws, "distractor");
            if (inst.group == "pickup_low") {
                CHECK(clutter >= 5);
                CHECK(clutter <= 10);
                CHECK(mat.ground_truth == "soda_target");
            } else if (inst.group == "pickup_high") {
                CHECK(clutter >= 20);
                CHECK(clutter <= 25);
            } else if (inst.group == "push") {
                CHECK(mat.ground_truth == "box_target");
            } else {
                CHECK(mat.ground_truth.rfind("elev1:call2:", 0) == 0);
            }
        }
    }
    SUBCASE("unknown groups are rejected") {
        OfflineInstance bad{"x_1", "pick_up_object", "x", 1};
        CHECK_THROWS_AS(materialize_instance(bad), std::invalid_argument);
    }
    SUBCASE("save and load round-trip with validation") {
        TempDir dir("offline");
        std::string path = (dir.path / "dataset.json").string();
        save_offline_dataset(path, instances);
        auto back = load_offline_dataset(path);
        REQUIRE(back.size() == instances.size());
        CHECK(back[5].id == instances[5].id);
        CHECK(back[5].seed == instances[5].seed);
        CHECK_THROWS_AS(load_offline_dataset((dir.path / "no.json").string()),
                        std::runtime_error);
    }
}

TEST_CASE("offline eval scores a perfect oracle at 100 percent") {
    auto instances = generate_offline_dataset(4, 9);
    OracleBackend backend;
    OfflineReport report = run_offline_eval(instances, Mode::Full, backend);
    REQUIRE(report.per_group.size() == 4);
    for (const auto& [group, counts] : report.per_group) {
        CHECK(counts.second == 4);
        CHECK(report.rate(group) == doctest::Approx(100.0));
    }
    CHECK(report.average_rate() == doctest::Approx(100.0));
    CHECK(report.csv().rfind("group,correct,total,rate\n", 0) == 0);

    // Description answers resolve unambiguous groups but cannot separate the
    // two visually identical soda cans, so the pickup groups degrade.
    OfflineReport nosom = run_offline_eval(instances, Mode::NoSom, backend);
    CHECK(nosom.rate("push") == doctest::Approx(100.0));
    CHECK(nosom.rate("call_elevator") == doctest::Approx(100.0));
    CHECK(nosom.rate("pickup_low") < 100.0);
    CHECK(nosom.average_rate() < 100.0);
}
