#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "moma/raster.hpp"
#include "moma/world.hpp"

namespace moma {

inline constexpr double kFovDegrees = 120.0;
inline constexpr double kSensorRange = 6.0;  // meters

struct Detection {
    enum class Kind { Object, Button, Door };
    Kind kind = Kind::Object;
    std::string entity_id;    // synthetic id for false positives
    std::string label;        // detector output, instance-blind
    std::string display;      // visible detail (attributes), shown in annotations
    double distance = 0;      // meters, NaN on injected depth fault
    Cell cell;                // ground position (objects, doors)
    double panel_x = 0;       // panel coordinates (buttons)
    double panel_y = 0;
    double bearing_deg = 0;   // relative to robot heading
    double confidence = 1.0;
    bool synthetic = false;
};

struct PerceptionNoiseConfig {
    double false_negative_rate = 0;
    double false_positive_rate = 0;
    double label_confusion_rate = 0;
    double nan_depth_rate = 0;
    uint64_t seed = 0;
    std::set<int> nan_steps;  // steps where every object depth reads NaN

    void validate() const;
};

struct Observation {
    int floor_id = 0;
    Cell robot_cell;
    Heading robot_heading = Heading::North;
    int step = 0;
    std::vector<Detection> detections;
    std::string scene_text;  // structured twin of the rendered scene
    Raster scene_raster;
};

Observation observe(const WorldState& ws, const PerceptionNoiseConfig& noise, int step);

// Keyword-based filter mimicking an open-vocabulary detector. Category and
// brand words narrow the result; attribute words are ignored.
std::vector<Detection> detector_query(const Observation& obs, const std::string& prompt);

// One selectable option offered to the model at stage 2.
struct Candidate {
    std::string label;           // short name shown next to the marker
    std::string resolved_value;  // what the parameter resolves to (entity id, direction, ...)
    std::optional<Detection> detection;
    double sort_distance = 0;
    double sort_bearing = 0;
    Cell marker_cell;  // where the marker is drawn
};

struct Marker {
    int id = 0;
    Candidate candidate;
    std::string annotation;
};

struct MarkerSet {
    std::vector<Marker> markers;

    const Marker* by_id(int id) const;
};

class MarkerOverflowError : public std::runtime_error {
public:
    MarkerOverflowError() : std::runtime_error("marker overflow") {}
};

struct AnnotatedScene {
    MarkerSet markers;
    Raster raster;       // scene with drawn marker ids
    std::string table;   // text table, one line per marker
};

inline constexpr int kMaxMarkers = 50;

// Assigns deterministic marker ids (sorted by distance, then bearing) and
// renders both the annotated raster and the text table.
AnnotatedScene annotate_markers(const Observation& obs, const std::vector<Candidate>& candidates);

Raster render_scene(const WorldState& ws);

}  // namespace moma
