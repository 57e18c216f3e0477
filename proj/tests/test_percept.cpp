#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "moma/percept.hpp"

using namespace moma;
using nlohmann::json;

namespace {

json room_config() {
    std::vector<std::string> grid(12, std::string(12, '.'));
    for (int c = 0; c < 12; ++c) grid[0][c] = grid[11][c] = '#';
    for (int r = 0; r < 12; ++r) grid[r][0] = grid[r][11] = '#';
    return {{"floors", json::array({{{"id", 1}, {"grid", grid}}})},
            {"robot_start", {{"floor", 1}, {"cell", {6, 2}}, {"heading", "E"}}}};
}

json add_object(json cfg, const std::string& id, const std::string& category, Cell cell,
                json attributes = json::object()) {
    if (!cfg.contains("objects")) cfg["objects"] = json::array();
    cfg["objects"].push_back({{"id", id},
                              {"category", category},
                              {"attributes", attributes},
                              {"floor", 1},
                              {"cell", {cell.row, cell.col}}});
    return cfg;
}

bool detected(const Observation& obs, const std::string& id) {
    for (const auto& det : obs.detections) {
        if (det.entity_id == id) return true;
    }
    return false;
}

const Detection* find_det(const Observation& obs, const std::string& id) {
    for (const auto& det : obs.detections) {
        if (det.entity_id == id) return &det;
    }
    return nullptr;
}

}  // namespace

TEST_CASE("field of view and line of sight") {
    json cfg = room_config();
    cfg = add_object(cfg, "front", "mug", {6, 6});
    cfg = add_object(cfg, "behind", "mug", {6, 1});
    WorldState ws = load_world(cfg);

    SUBCASE("objects behind the robot are not seen") {
        Observation obs = observe(ws, {}, 1);
        CHECK(detected(obs, "front"));
        CHECK(!detected(obs, "behind"));
    }
    SUBCASE("turning around flips visibility") {
        ws.robot.heading = Heading::West;
        Observation obs = observe(ws, {}, 1);
        CHECK(!detected(obs, "front"));
        CHECK(detected(obs, "behind"));
    }
    SUBCASE("walls block sight") {
        json cfg2 = cfg;
        std::string row = cfg2["floors"][0]["grid"][6];
        row[4] = '#';
        cfg2["floors"][0]["grid"][6] = row;
        // Wall off the whole column so no diagonal sample slips through.
        for (int r = 1; r < 11; ++r) {
            std::string rr = cfg2["floors"][0]["grid"][r];
            rr[4] = '#';
            cfg2["floors"][0]["grid"][r] = rr;
        }
        WorldState ws2 = load_world(cfg2);
        Observation obs = observe(ws2, {}, 1);
        CHECK(!detected(obs, "front"));
    }
    SUBCASE("range limit") {
        // 6 m is 24 cells; everything in this small room is in range.
        Observation obs = observe(ws, {}, 1);
        const Detection* det = find_det(obs, "front");
        REQUIRE(det);
        CHECK(det->distance == doctest::Approx(4 * kCellSize));
        CHECK(det->bearing_deg == doctest::Approx(0));
    }
}

TEST_CASE("observations are deterministic per seed and step") {
    json cfg = add_object(room_config(), "m1", "mug", {5, 5});
    cfg = add_object(cfg, "m2", "mug", {7, 6});
    WorldState ws = load_world(cfg);
    PerceptionNoiseConfig noise;
    noise.false_negative_rate = 0.5;
    noise.seed = 9;

    Observation a = observe(ws, noise, 3);
    Observation b = observe(ws, noise, 3);
    REQUIRE(a.detections.size() == b.detections.size());
    for (size_t i = 0; i < a.detections.size(); ++i) {
        CHECK(a.detections[i].entity_id == b.detections[i].entity_id);
    }
    CHECK(a.scene_text == b.scene_text);
}

TEST_CASE("noise injection") {
    json cfg = add_object(room_config(), "m1", "mug", {5, 5});
    WorldState ws = load_world(cfg);

    SUBCASE("rates outside [0,1] are rejected") {
        PerceptionNoiseConfig noise;
        noise.false_negative_rate = 1.5;
        CHECK_THROWS_AS(observe(ws, noise, 1), std::invalid_argument);
    }
    SUBCASE("false negatives at rate 1 remove everything") {
        PerceptionNoiseConfig noise;
        noise.false_negative_rate = 1.0;
        CHECK(observe(ws, noise, 1).detections.empty());
    }
    SUBCASE("false positives add a low-confidence synthetic detection") {
        PerceptionNoiseConfig noise;
        noise.false_positive_rate = 1.0;
        Observation obs = observe(ws, noise, 1);
        bool ghost = false;
        for (const auto& det : obs.detections) ghost = ghost || det.synthetic;
        CHECK(ghost);
    }
    SUBCASE("label confusion swaps the label, not the identity") {
        PerceptionNoiseConfig noise;
        noise.label_confusion_rate = 1.0;
        Observation obs = observe(ws, noise, 1);
        const Detection* det = find_det(obs, "m1");
        REQUIRE(det);
        CHECK(det->label != "mug");
        CHECK(det->confidence == doctest::Approx(0.5));
    }
    SUBCASE("nan_steps blanks every depth on the chosen step") {
        PerceptionNoiseConfig noise;
        noise.nan_steps = {4};
        const Detection* det = find_det(observe(ws, noise, 4), "m1");
        REQUIRE(det);
        CHECK(std::isnan(det->distance));
        CHECK(observe(ws, noise, 4).scene_text.find("sensor fault") != std::string::npos);
        det = find_det(observe(ws, noise, 5), "m1");
        REQUIRE(det);
        CHECK(!std::isnan(det->distance));
    }
}

TEST_CASE("detector_query is instance-blind") {
    json cfg = add_object(room_config(), "soda_reg", "soda can", {5, 5},
                          {{"brand", "sprizz"}});
    cfg = add_object(cfg, "soda_diet", "soda can", {7, 6},
                     {{"brand", "sprizz"}, {"diet", "true"}});
    cfg = add_object(cfg, "m1", "mug", {6, 7});
    WorldState ws = load_world(cfg);
    Observation obs = observe(ws, {}, 1);

    SUBCASE("attribute words do not narrow the match") {
        auto hits = detector_query(obs, "diet soda can");
        CHECK(hits.size() == 2);  // both cans, attributes ignored
    }
    SUBCASE("category and brand words do") {
        CHECK(detector_query(obs, "sprizz").size() == 2);
        CHECK(detector_query(obs, "mug").size() == 1);
        CHECK(detector_query(obs, "stapler").empty());
    }
    SUBCASE("all objects returns everything visible") {
        CHECK(detector_query(obs, "all objects").size() == 3);
    }
    SUBCASE("empty prompt is rejected") {
        CHECK_THROWS_AS(detector_query(obs, ""), std::invalid_argument);
    }
    SUBCASE("button queries only return buttons") {
        CHECK(detector_query(obs, "buttons").empty());
    }
}

TEST_CASE("annotate_markers") {
    json cfg = add_object(room_config(), "near", "mug", {6, 4});
    cfg = add_object(cfg, "far", "mug", {6, 8});
    cfg = add_object(cfg, "side", "mug", {4, 4});
    WorldState ws = load_world(cfg);
    Observation obs = observe(ws, {}, 1);

    std::vector<Candidate> cands;
    for (const auto& det : detector_query(obs, "all objects")) {
        Candidate c;
        c.label = det.label;
        c.resolved_value = det.entity_id;
        c.detection = det;
        c.sort_distance = det.distance;
        c.sort_bearing = det.bearing_deg;
        c.marker_cell = det.cell;
        cands.push_back(std::move(c));
    }

    SUBCASE("ids are assigned by distance, then bearing, starting at 1") {
        AnnotatedScene scene = annotate_markers(obs, cands);
        REQUIRE(scene.markers.markers.size() == 3);
        CHECK(scene.markers.markers[0].id == 1);
        CHECK(scene.markers.markers[0].candidate.resolved_value == "near");
        CHECK(scene.markers.markers[2].candidate.resolved_value == "far");
        CHECK(scene.markers.by_id(2) != nullptr);
        CHECK(scene.markers.by_id(9) == nullptr);
        CHECK(scene.table.find("marker 1: mug") != std::string::npos);
    }
    SUBCASE("NaN distances sort last") {
        for (auto& c : cands) {
            if (c.resolved_value != "near") continue;
            c.sort_distance = std::nan("");
            c.detection->distance = std::nan("");
        }
        AnnotatedScene scene = annotate_markers(obs, cands);
        CHECK(scene.markers.markers.back().candidate.resolved_value == "near");
        CHECK(scene.markers.markers.back().annotation.find("sensor fault") != std::string::npos);
    }
    SUBCASE("more than 50 candidates overflow") {
        std::vector<Candidate> many(51);
        CHECK_THROWS_AS(annotate_markers(obs, many), MarkerOverflowError);
    }
    SUBCASE("the annotated raster differs from the plain scene") {
        AnnotatedScene scene = annotate_markers(obs, cands);
        CHECK(scene.raster.png() != obs.scene_raster.png());
    }
}
