#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "moma/world.hpp"

using namespace moma;
using nlohmann::json;

namespace {

// 10x10 single-floor room with border walls.
json small_config() {
    std::vector<std::string> grid(10, std::string(10, '.'));
    for (int c = 0; c < 10; ++c) grid[0][c] = grid[9][c] = '#';
    for (int r = 0; r < 10; ++r) grid[r][0] = grid[r][9] = '#';
    return {{"floors", json::array({{{"id", 1}, {"grid", grid}}})},
            {"robot_start", {{"floor", 1}, {"cell", {5, 2}}, {"heading", "E"}}}};
}

json with_object(json cfg, json obj) {
    if (!cfg.contains("objects")) cfg["objects"] = json::array();
    cfg["objects"].push_back(std::move(obj));
    return cfg;
}

json two_floor_elevator_config() {
    std::vector<std::string> grid(8, std::string(8, '.'));
    for (int c = 0; c < 8; ++c) grid[0][c] = grid[7][c] = '#';
    for (int r = 0; r < 8; ++r) grid[r][0] = grid[r][7] = '#';
    json floors = json::array();
    json cab = json::object(), panel = json::object(), exits = json::object();
    json served = json::array();
    for (int f = 1; f <= 2; ++f) {
        floors.push_back({{"id", f}, {"grid", grid}});
        std::string fs = std::to_string(f);
        cab[fs] = {3, 5};
        panel[fs] = {4, 5};
        exits[fs] = {4, 4};
        served.push_back(f);
    }
    return {{"floors", floors},
            {"elevators", json::array({{{"id", "elev1"},
                                        {"floors", served},
                                        {"cab_cell", cab},
                                        {"panel_cell", panel},
                                        {"exit_cell", exits}}})},
            {"robot_start", {{"floor", 1}, {"cell", {4, 5}}, {"heading", "N"}}}};
}

}  // namespace

TEST_CASE("load_world validates the config") {
    SUBCASE("missing floors") {
        CHECK_THROWS_AS(load_world(json{{"robot_start", {{"floor", 1}, {"cell", {1, 1}}}}}),
                        ConfigError);
    }
    SUBCASE("unknown grid character") {
        json cfg = small_config();
        cfg["floors"][0]["grid"][3] = "##x#######";
        CHECK_THROWS_AS(load_world(cfg), ConfigError);
    }
    SUBCASE("unequal row lengths") {
        json cfg = small_config();
        cfg["floors"][0]["grid"][3] = "###";
        CHECK_THROWS_AS(load_world(cfg), ConfigError);
    }
    SUBCASE("missing robot_start") {
        json cfg = small_config();
        cfg.erase("robot_start");
        CHECK_THROWS_AS(load_world(cfg), ConfigError);
    }
    SUBCASE("heavy objects cannot be graspable") {
        json cfg = with_object(small_config(), {{"id", "b"},
                                                {"category", "box"},
                                                {"floor", 1},
                                                {"cell", {4, 4}},
                                                {"heavy", true},
                                                {"graspable", true}});
        CHECK_THROWS_AS(load_world(cfg), ConfigError);
    }
    SUBCASE("duplicate object id") {
        json cfg = small_config();
        for (int i = 0; i < 2; ++i) {
            cfg = with_object(cfg, {{"id", "m"},
                                    {"category", "mug"},
                                    {"floor", 1},
                                    {"cell", {3, 3 + i}}});
        }
        CHECK_THROWS_AS(load_world(cfg), ConfigError);
    }
    SUBCASE("object on a wall cell") {
        json cfg = with_object(small_config(),
                               {{"id", "m"}, {"category", "mug"}, {"floor", 1}, {"cell", {0, 0}}});
        CHECK_THROWS_AS(load_world(cfg), ConfigError);
    }
    SUBCASE("robot inside an object footprint") {
        json cfg = with_object(small_config(),
                               {{"id", "m"}, {"category", "mug"}, {"floor", 1}, {"cell", {5, 2}}});
        CHECK_THROWS_AS(load_world(cfg), ConfigError);
    }
    SUBCASE("landmark on a wall cell") {
        json cfg = small_config();
        cfg["landmarks"] = json::array({{{"id", "lm"}, {"floor", 1}, {"cell", {0, 3}}}});
        CHECK_THROWS_AS(load_world(cfg), ConfigError);
    }
    SUBCASE("elevator needs at least two floors") {
        json cfg = two_floor_elevator_config();
        cfg["elevators"][0]["floors"] = json::array({1});
        CHECK_THROWS_AS(load_world(cfg), ConfigError);
    }
    SUBCASE("door hinge must be left or right") {
        json cfg = small_config();
        cfg["doors"] = json::array({{{"id", "d"},
                                     {"floor", 1},
                                     {"cells", json::array({{4, 4}})},
                                     {"hinge", "top"}}});
        CHECK_THROWS_AS(load_world(cfg), ConfigError);
    }
    SUBCASE("a valid config loads") {
        WorldState ws = load_world(small_config());
        CHECK(ws.robot.cell == Cell{5, 2});
        CHECK(ws.robot.heading == Heading::East);
        CHECK(ws.building.floor(1) != nullptr);
        CHECK(ws.building.floor(2) == nullptr);
    }
}

TEST_CASE("occupancy queries") {
    json cfg = with_object(small_config(),
                           {{"id", "m"}, {"category", "mug"}, {"floor", 1}, {"cell", {3, 3}}});
    cfg["doors"] = json::array(
        {{{"id", "d1"}, {"floor", 1}, {"cells", json::array({{4, 6}})}, {"state", "closed"}}});
    WorldState ws = load_world(cfg);

    CHECK(*ws.blocking_entity(1, {0, 0}) == "wall");
    CHECK(*ws.blocking_entity(1, {3, 3}) == "m");
    CHECK(*ws.blocking_entity(1, {4, 6}) == "d1");
    CHECK(!ws.blocking_entity(1, {5, 5}));
    CHECK(!ws.blocking_entity(1, {3, 3}, "m"));
    CHECK(ws.cell_blocked(1, {5, 2}));                  // the robot itself
    CHECK(!ws.cell_blocked(1, {5, 2}, "", true));
    ws.door("d1")->open = true;
    CHECK(!ws.blocking_entity(1, {4, 6}));
}

TEST_CASE("apply_push") {
    json cfg = with_object(small_config(),
                           {{"id", "box"},
                            {"category", "box"},
                            {"floor", 1},
                            {"cell", {5, 4}},
                            {"heavy", true},
                            {"graspable", false}});
    SUBCASE("moves object two cells and repositions the robot behind it") {
        WorldState ws = load_world(cfg);
        Outcome out = apply_push(ws, "box", Heading::East);
        CHECK(out.success);
        CHECK(ws.object("box")->anchor == Cell{5, 6});
        CHECK(ws.robot.cell == Cell{5, 5});
        CHECK(ws.robot.heading == Heading::East);
    }
    SUBCASE("collision with a wall leaves the world unchanged") {
        WorldState ws = load_world(cfg);
        ws.object("box")->anchor = {5, 8};
        Outcome out = apply_push(ws, "box", Heading::East);
        CHECK(!out.success);
        CHECK(out.code == "collision");
        CHECK(ws.object("box")->anchor == Cell{5, 8});
    }
    SUBCASE("collision with another object") {
        json cfg2 = with_object(cfg, {{"id", "m"},
                                      {"category", "mug"},
                                      {"floor", 1},
                                      {"cell", {5, 5}}});
        WorldState ws = load_world(cfg2);
        Outcome out = apply_push(ws, "box", Heading::East);
        CHECK(out.code == "collision");
        CHECK(out.message.find("object m") != std::string::npos);
    }
    SUBCASE("unpushable objects refuse") {
        json cfg2 = small_config();
        cfg2 = with_object(cfg2, {{"id", "sign"},
                                  {"category", "wet floor sign"},
                                  {"floor", 1},
                                  {"cell", {5, 4}},
                                  {"pushable", false}});
        WorldState ws = load_world(cfg2);
        CHECK(apply_push(ws, "sign", Heading::East).code == "not_pushable");
    }
    SUBCASE("out of range beyond 3 meters") {
        // A bigger room: the 10x10 grid cannot separate robot and object by 3 m.
        std::vector<std::string> grid(20, std::string(20, '.'));
        for (int c = 0; c < 20; ++c) grid[0][c] = grid[19][c] = '#';
        for (int r = 0; r < 20; ++r) grid[r][0] = grid[r][19] = '#';
        json big = {{"floors", json::array({{{"id", 1}, {"grid", grid}}})},
                    {"robot_start", {{"floor", 1}, {"cell", {1, 1}}, {"heading", "E"}}},
                    {"objects", json::array({{{"id", "box"},
                                              {"category", "box"},
                                              {"floor", 1},
                                              {"cell", {15, 15}},
                                              {"heavy", true},
                                              {"graspable", false}}})}};
        WorldState ws = load_world(big);
        CHECK(apply_push(ws, "box", Heading::East).code == "out_of_range");
    }
    SUBCASE("pushing delicate items flags a semantic violation") {
        json cfg2 = with_object(small_config(), {{"id", "vase"},
                                                 {"category", "vase"},
                                                 {"attributes", {{"delicate", "true"}}},
                                                 {"floor", 1},
                                                 {"cell", {5, 4}},
                                                 {"delicate", true}});
        WorldState ws = load_world(cfg2);
        Outcome out = apply_push(ws, "vase", Heading::East);
        CHECK(out.success);
        CHECK(out.semantic_violation);
    }
    SUBCASE("relative direction resolves against the robot heading") {
        WorldState ws = load_world(cfg);
        ws.robot.heading = Heading::North;
        Outcome out = apply_push(ws, "box", RelDir::Right);  // north + right = east
        CHECK(out.success);
        CHECK(ws.object("box")->anchor == Cell{5, 6});
    }
}

TEST_CASE("apply_open_door") {
    json cfg = small_config();
    cfg["doors"] = json::array({{{"id", "d1"},
                                 {"floor", 1},
                                 {"cells", json::array({{4, 4}})},
                                 {"state", "closed"},
                                 {"hinge", "left"}}});
    SUBCASE("too far") {
        WorldState ws = load_world(cfg);
        ws.robot.cell = {7, 7};
        CHECK(apply_open_door(ws, "d1", "right").code == "too_far");
    }
    SUBCASE("not facing the door") {
        WorldState ws = load_world(cfg);
        ws.robot.cell = {5, 4};
        ws.robot.heading = Heading::South;
        CHECK(apply_open_door(ws, "d1", "right").code == "not_facing");
    }
    SUBCASE("hinge side does not move the door") {
        WorldState ws = load_world(cfg);
        ws.robot.cell = {5, 4};
        ws.robot.heading = Heading::North;
        Outcome out = apply_open_door(ws, "d1", "left");
        CHECK(out.code == "wrong_side");
        CHECK(!ws.door("d1")->open);
    }
    SUBCASE("opposite side swings it open") {
        WorldState ws = load_world(cfg);
        ws.robot.cell = {5, 4};
        ws.robot.heading = Heading::North;
        CHECK(apply_open_door(ws, "d1", "right").success);
        CHECK(ws.door("d1")->open);
        CHECK(apply_open_door(ws, "d1", "left").success);  // already open
    }
}

TEST_CASE("elevator transitions") {
    json cfg = two_floor_elevator_config();

    SUBCASE("call buttons require standing at the panel") {
        WorldState ws = load_world(cfg);
        ws.robot.cell = {2, 2};
        CHECK(press_button(ws, "elev1", "elev1:call1:up").code == "wrong_panel");
    }
    SUBCASE("calling enters the cab; riding changes floors") {
        WorldState ws = load_world(cfg);
        CHECK(press_button(ws, "elev1", "elev1:call1:up").success);
        CHECK(ws.robot.cell == ws.elevator("elev1")->cab_cell.at(1));
        CHECK(ws.elevator("elev1")->committed_direction == "up");
        CHECK(press_button(ws, "elev1", "elev1:cab:2").success);
        CHECK(elevator_transition(ws, "elev1").success);
        CHECK(ws.robot.floor_id == 2);
        CHECK(ws.robot.cell == Cell{4, 4});
    }
    SUBCASE("pressing the current floor button is a wrong_button fault") {
        WorldState ws = load_world(cfg);
        REQUIRE(press_button(ws, "elev1", "elev1:call1:up").success);
        REQUIRE(press_button(ws, "elev1", "elev1:cab:1").success);
        Outcome out = elevator_transition(ws, "elev1");
        CHECK(out.code == "wrong_button");
        CHECK(ws.robot.floor_id == 1);
        CHECK(ws.robot.cell == Cell{4, 4});  // ejected at the exit cell
    }
    SUBCASE("riding against the committed call direction fails") {
        json cfg3 = cfg;
        cfg3["elevators"][0]["floors"].push_back(3);
        cfg3["floors"].push_back(cfg3["floors"][0]);
        cfg3["floors"][2]["id"] = 3;
        for (const char* key : {"cab_cell", "panel_cell", "exit_cell"}) {
            cfg3["elevators"][0][key]["3"] = cfg3["elevators"][0][key]["1"];
        }
        cfg3["robot_start"]["floor"] = 2;
        WorldState ws = load_world(cfg3);
        ws.elevator("elev1")->current_floor = 2;
        REQUIRE(press_button(ws, "elev1", "elev1:call2:up").success);
        REQUIRE(press_button(ws, "elev1", "elev1:cab:1").success);  // down, but called up
        Outcome out = elevator_transition(ws, "elev1");
        CHECK(out.code == "wrong_button");
        CHECK(ws.robot.floor_id == 2);
    }
    SUBCASE("unknown button") {
        WorldState ws = load_world(cfg);
        CHECK(press_button(ws, "elev1", "elev1:call1:sideways").code == "button_missing");
    }
}

TEST_CASE("pick_up") {
    json cfg = with_object(small_config(),
                           {{"id", "can"}, {"category", "soda can"}, {"floor", 1}, {"cell", {5, 4}}});
    SUBCASE("NaN depth is a sensor fault") {
        WorldState ws = load_world(cfg);
        CHECK(pick_up(ws, "can", std::nan("")).code == "sensor_fault");
    }
    SUBCASE("beyond arm reach") {
        WorldState ws = load_world(cfg);
        CHECK(pick_up(ws, "can", 2.5).code == "out_of_reach");
    }
    SUBCASE("heavy items cannot be lifted") {
        json cfg2 = with_object(small_config(), {{"id", "chair"},
                                                 {"category", "chair"},
                                                 {"floor", 1},
                                                 {"cell", {5, 4}},
                                                 {"heavy", true},
                                                 {"graspable", false}});
        WorldState ws = load_world(cfg2);
        CHECK(pick_up(ws, "chair", 0.5).code == "too_heavy");
    }
    SUBCASE("success marks the object grasped") {
        WorldState ws = load_world(cfg);
        CHECK(pick_up(ws, "can", 0.5).success);
        CHECK(ws.robot.held_object == "can");
        CHECK(ws.object("can")->grasped);
        CHECK(pick_up(ws, "can", 0.5).code == "object_missing");  // already held
    }
    SUBCASE("hand full") {
        json cfg2 = with_object(cfg, {{"id", "can2"},
                                      {"category", "soda can"},
                                      {"floor", 1},
                                      {"cell", {5, 5}}});
        WorldState ws = load_world(cfg2);
        REQUIRE(pick_up(ws, "can", 0.5).success);
        CHECK(pick_up(ws, "can2", 0.7).code == "hand_full");
    }
}

TEST_CASE("check_task_success") {
    json cfg = with_object(small_config(), {{"id", "can"},
                                            {"category", "soda can"},
                                            {"attributes", {{"diet", "true"}}},
                                            {"floor", 1},
                                            {"cell", {5, 4}}});
    cfg["landmarks"] = json::array({{{"id", "home"}, {"floor", 1}, {"cell", {2, 2}}}});

    SUBCASE("retrieval needs the matching object held at the landmark") {
        WorldState ws = load_world(cfg);
        TaskGoal goal;
        goal.kind = TaskGoal::Kind::Retrieve;
        goal.target_category = "soda can";
        goal.target_filter = {{"diet", "true"}};
        goal.deliver_landmark = "home";
        CHECK(!check_task_success(ws, goal));
        REQUIRE(pick_up(ws, "can", 0.5).success);
        CHECK(!check_task_success(ws, goal));  // not at the landmark yet
        ws.robot.cell = {2, 2};
        CHECK(check_task_success(ws, goal));
        goal.target_filter = {{"diet", "false"}};
        CHECK(!check_task_success(ws, goal));
    }
    SUBCASE("rearrangement needs all instances inside the region, aligned") {
        json cfg2 = small_config();
        for (int i = 0; i < 2; ++i) {
            cfg2 = with_object(cfg2, {{"id", "chair" + std::to_string(i + 1)},
                                      {"category", "chair"},
                                      {"floor", 1},
                                      {"cell", {3, 3 + i}},
                                      {"heavy", true},
                                      {"graspable", false}});
        }
        WorldState ws = load_world(cfg2);
        TaskGoal goal;
        goal.kind = TaskGoal::Kind::Rearrange;
        goal.rearrange_category = "chair";
        goal.goal_floor = 1;
        goal.goal_region = {{3, 3}, {3, 4}, {3, 5}};
        CHECK(check_task_success(ws, goal));
        ws.object("chair2")->heading = Heading::East;  // misaligned
        CHECK(!check_task_success(ws, goal));
        ws.object("chair2")->heading = Heading::North;
        ws.object("chair2")->anchor = {6, 6};  // outside the region
        CHECK(!check_task_success(ws, goal));
        goal.rearrange_category = "table";  // no instance exists
        CHECK(!check_task_success(ws, goal));
    }
}

TEST_CASE("state_hash is deterministic and state-sensitive") {
    json cfg = with_object(small_config(),
                           {{"id", "box"},
                            {"category", "box"},
                            {"floor", 1},
                            {"cell", {5, 4}},
                            {"heavy", true},
                            {"graspable", false}});
    WorldState a = load_world(cfg);
    WorldState b = load_world(cfg);
    CHECK(a.state_hash() == b.state_hash());
    REQUIRE(apply_push(b, "box", Heading::East).success);
    CHECK(a.state_hash() != b.state_hash());
}
