#include "moma/percept.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace moma {

namespace {

constexpr int kPix = 6;  // pixels per grid cell in renderings

const char* kDistractorVocab[] = {"stapler", "mug", "notebook", "plant", "umbrella"};

const std::set<std::string>& attribute_words() {
    static const std::set<std::string> words = {"diet",  "regular", "sugar", "free",  "low",
                                                "red",   "blue",    "green", "black", "white",
                                                "fresh", "fizzy",   "cold",  "new",   "delicate"};
    return words;
}

std::vector<std::string> tokens_of(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

double bearing_degrees(Cell robot, Heading heading, double tx, double ty) {
    double dx = tx - cell_x(robot);
    double dy = ty - cell_y(robot);
    if (dx == 0 && dy == 0) return 0;
    // Grid rows grow south; convert to a heading-relative angle.
    double ang = std::atan2(dx, -dy) * 180.0 / M_PI;  // 0 = north, 90 = east
    double head = 90.0 * static_cast<int>(heading);
    double rel = ang - head;
    while (rel > 180) rel -= 360;
    while (rel <= -180) rel += 360;
    return rel;
}

bool line_of_sight(const FloorMap& fm, Cell a, Cell b) {
    // Walk the segment between cell centers; walls block sight.
    int steps = std::max(std::abs(a.row - b.row), std::abs(a.col - b.col)) * 2;
    for (int i = 1; i < steps; ++i) {
        double t = static_cast<double>(i) / steps;
        int r = static_cast<int>(std::lround(a.row + t * (b.row - a.row)));
        int c = static_cast<int>(std::lround(a.col + t * (b.col - a.col)));
        Cell cc{r, c};
        if (cc == a || cc == b) continue;
        if (!fm.in_bounds(cc) || fm.at(cc) == CellKind::Wall) return false;
    }
    return true;
}

bool within_fov(Cell robot, Heading heading, Cell target, double* out_bearing) {
    double bearing = bearing_degrees(robot, heading, cell_x(target), cell_y(target));
    if (out_bearing) *out_bearing = bearing;
    if (robot == target) return true;
    return std::abs(bearing) <= kFovDegrees / 2.0;
}

Color category_color(const std::string& category) {
    uint64_t h = fnv1a(category);
    return {static_cast<uint8_t>(64 + (h % 160)), static_cast<uint8_t>(64 + ((h >> 8) % 160)),
            static_cast<uint8_t>(64 + ((h >> 16) % 160))};
}

}  // namespace

void PerceptionNoiseConfig::validate() const {
    for (double r : {false_negative_rate, false_positive_rate, label_confusion_rate,
                     nan_depth_rate}) {
        if (r < 0 || r > 1) throw std::invalid_argument("noise rates must be in [0,1]");
    }
}

const Marker* MarkerSet::by_id(int id) const {
    for (const auto& m : markers) {
        if (m.id == id) return &m;
    }
    return nullptr;
}

Raster render_scene(const WorldState& ws) {
    const FloorMap* fm = ws.building.floor(ws.robot.floor_id);
    Raster r(fm->cols * kPix, fm->rows * kPix, {245, 245, 245});
    for (int row = 0; row < fm->rows; ++row) {
        for (int col = 0; col < fm->cols; ++col) {
            CellKind k = fm->at({row, col});
            if (k == CellKind::Wall) {
                r.fill_rect(col * kPix, row * kPix, kPix, kPix, {30, 30, 30});
            } else if (k == CellKind::StaticObstacle) {
                r.fill_rect(col * kPix, row * kPix, kPix, kPix, {120, 120, 120});
            }
        }
    }
    for (const auto& [id, d] : ws.doors) {
        if (d.floor_id != ws.robot.floor_id) continue;
        Color c = d.open ? Color{120, 200, 120} : Color{150, 90, 40};
        for (Cell cc : d.cells) r.fill_rect(cc.col * kPix, cc.row * kPix, kPix, kPix, c);
    }
    for (const auto& [id, obj] : ws.objects) {
        if (obj.grasped || obj.floor_id != ws.robot.floor_id) continue;
        Color c = category_color(obj.category);
        for (Cell cc : obj.footprint()) {
            r.fill_rect(cc.col * kPix + 1, cc.row * kPix + 1, kPix - 2, kPix - 2, c);
        }
    }
    // Robot: blue cell with a heading tick.
    r.fill_rect(ws.robot.cell.col * kPix, ws.robot.cell.row * kPix, kPix, kPix, {40, 80, 220});
    Cell hd = heading_delta(ws.robot.heading);
    r.fill_rect(ws.robot.cell.col * kPix + 2 + hd.col * 2, ws.robot.cell.row * kPix + 2 + hd.row * 2,
                2, 2, {255, 255, 0});
    return r;
}

Observation observe(const WorldState& ws, const PerceptionNoiseConfig& noise, int step) {
    noise.validate();
    Observation obs;
    obs.floor_id = ws.robot.floor_id;
    obs.robot_cell = ws.robot.cell;
    obs.robot_heading = ws.robot.heading;
    obs.step = step;

    const FloorMap* fm = ws.building.floor(ws.robot.floor_id);
    uint64_t base = hash_combine(noise.seed, static_cast<uint64_t>(step));
    bool force_nan = noise.nan_steps.count(step) > 0;

    for (const auto& [id, obj] : ws.objects) {
        if (obj.grasped || obj.floor_id != ws.robot.floor_id) continue;
        double bearing = 0;
        if (!within_fov(ws.robot.cell, ws.robot.heading, obj.anchor, &bearing)) continue;
        double dist = cell_distance(ws.robot.cell, obj.anchor);
        if (dist > kSensorRange) continue;
        if (!line_of_sight(*fm, ws.robot.cell, obj.anchor)) continue;

        uint64_t eh = hash_combine(base, fnv1a(id));
        if (unit_draw(hash_combine(eh, 1)) < noise.false_negative_rate) continue;

        Detection det;
        det.kind = Detection::Kind::Object;
        det.entity_id = id;
        det.label = obj.matchable_text();
        det.display = obj.display_text();
        det.cell = obj.anchor;
        det.bearing_deg = bearing;
        det.distance = dist;
        if (force_nan || unit_draw(hash_combine(eh, 3)) < noise.nan_depth_rate) {
            det.distance = std::nan("");
        }
        if (unit_draw(hash_combine(eh, 2)) < noise.label_confusion_rate) {
            size_t n = std::size(kDistractorVocab);
            det.label = kDistractorVocab[hash_mix(hash_combine(eh, 4)) % n];
            det.confidence = 0.5;
        }
        obs.detections.push_back(std::move(det));
    }

    for (const auto& [id, d] : ws.doors) {
        if (d.floor_id != ws.robot.floor_id || d.open) continue;
        double bearing = 0;
        Cell c = d.cells.front();
        if (!within_fov(ws.robot.cell, ws.robot.heading, c, &bearing)) continue;
        double dist = cell_distance(ws.robot.cell, c);
        if (dist > kSensorRange || !line_of_sight(*fm, ws.robot.cell, c)) continue;
        Detection det;
        det.kind = Detection::Kind::Door;
        det.entity_id = id;
        det.label = "door";
        det.display = "closed door";
        det.cell = c;
        det.bearing_deg = bearing;
        det.distance = dist;
        obs.detections.push_back(std::move(det));
    }

    for (const auto& [eid, el] : ws.elevators) {
        bool in_cab = el.cab_cell.count(ws.robot.floor_id) &&
                      ws.robot.cell == el.cab_cell.at(ws.robot.floor_id) &&
                      el.current_floor == ws.robot.floor_id;
        if (in_cab) {
            for (const Button& b : el.cab_panel.buttons) {
                Detection det;
                det.kind = Detection::Kind::Button;
                det.entity_id = b.id;
                det.label = "button " + b.label;
                det.display = "cab button " + b.label;
                det.distance = 0.3;
                det.panel_x = b.panel_x;
                det.panel_y = b.panel_y;
                det.cell = ws.robot.cell;
                obs.detections.push_back(std::move(det));
            }
        } else if (el.panel_cell.count(ws.robot.floor_id)) {
            Cell pc = el.panel_cell.at(ws.robot.floor_id);
            double bearing = 0;
            if (!within_fov(ws.robot.cell, ws.robot.heading, pc, &bearing)) continue;
            double dist = cell_distance(ws.robot.cell, pc);
            if (dist > kSensorRange || !line_of_sight(*fm, ws.robot.cell, pc)) continue;
            for (const Button& b : el.call_panel.at(ws.robot.floor_id).buttons) {
                Detection det;
                det.kind = Detection::Kind::Button;
                det.entity_id = b.id;
                det.label = "button " + b.label;
                det.display = "call button " + b.label;
                det.distance = dist;
                det.panel_x = b.panel_x;
                det.panel_y = b.panel_y;
                det.cell = pc;
                det.bearing_deg = bearing;
                obs.detections.push_back(std::move(det));
            }
        }
    }

    if (unit_draw(hash_combine(base, 7)) < noise.false_positive_rate) {
        size_t n = std::size(kDistractorVocab);
        Detection det;
        det.kind = Detection::Kind::Object;
        det.synthetic = true;
        det.entity_id = "ghost_" + std::to_string(step);
        det.label = kDistractorVocab[hash_mix(hash_combine(base, 8)) % n];
        det.display = det.label;
        det.distance = 1.0 + 4.0 * unit_draw(hash_combine(base, 9));
        det.cell = ws.robot.cell;
        det.confidence = 0.4;
        obs.detections.push_back(std::move(det));
    }

    std::ostringstream text;
    text << "robot: floor " << obs.floor_id << ", cell (" << obs.robot_cell.row << ","
         << obs.robot_cell.col << "), facing " << heading_name(obs.robot_heading) << "\n";
    for (const auto& det : obs.detections) {
        text << "- " << det.display;
        if (std::isnan(det.distance)) {
            text << ", distance: unknown (sensor fault)";
        } else {
            text << " at " << format_meters(det.distance);
        }
        text << "\n";
    }
    obs.scene_text = text.str();
    obs.scene_raster = render_scene(ws);
    return obs;
}

std::vector<Detection> detector_query(const Observation& obs, const std::string& prompt) {
    if (prompt.empty()) throw std::invalid_argument("empty detector prompt");
    std::vector<std::string> toks = tokens_of(prompt);
    bool all_objects = prompt.find("all objects") != std::string::npos;
    bool want_buttons =
        std::find(toks.begin(), toks.end(), "buttons") != toks.end() ||
        std::find(toks.begin(), toks.end(), "button") != toks.end();

    std::vector<Detection> out;
    for (const auto& det : obs.detections) {
        if (want_buttons) {
            if (det.kind == Detection::Kind::Button) out.push_back(det);
            continue;
        }
        if (det.kind != Detection::Kind::Object) continue;
        if (all_objects) {
            out.push_back(det);
            continue;
        }
        // Instance-blind matching: only category/brand words count.
        std::vector<std::string> label_toks = tokens_of(det.label);
        bool hit = false;
        for (const auto& t : toks) {
            if (attribute_words().count(t)) continue;
            if (std::find(label_toks.begin(), label_toks.end(), t) != label_toks.end()) {
                hit = true;
                break;
            }
        }
        if (hit) out.push_back(det);
    }
    return out;
}

AnnotatedScene annotate_markers(const Observation& obs, const std::vector<Candidate>& candidates) {
    if (candidates.size() > kMaxMarkers) throw MarkerOverflowError();
    AnnotatedScene scene;
    scene.raster = obs.scene_raster;

    std::vector<size_t> order(candidates.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto key = [&](size_t i) {
        double d = candidates[i].sort_distance;
        if (std::isnan(d)) d = 1e18;
        return std::make_tuple(d, candidates[i].sort_bearing, i);
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return key(a) < key(b); });

    std::ostringstream table;
    int next_id = 1;
    for (size_t idx : order) {
        Marker m;
        m.id = next_id++;
        m.candidate = candidates[idx];
        std::ostringstream ann;
        ann << "marker " << m.id << ": " << m.candidate.label;
        if (m.candidate.detection) {
            const Detection& det = *m.candidate.detection;
            if (!det.display.empty() && det.display != m.candidate.label) {
                ann << " [" << det.display << "]";
            }
            if (std::isnan(det.distance)) {
                ann << ", distance: unknown (sensor fault)";
            } else {
                ann << " at " << format_meters(det.distance);
            }
        } else if (!std::isnan(m.candidate.sort_distance) && m.candidate.sort_distance > 0) {
            ann << " at " << format_meters(m.candidate.sort_distance);
        }
        m.annotation = ann.str();
        table << m.annotation << "\n";

        Cell mc = m.candidate.marker_cell;
        scene.raster.frame_rect(mc.col * kPix, mc.row * kPix, kPix, kPix, {220, 30, 30});
        scene.raster.draw_text(mc.col * kPix + 1, mc.row * kPix + 1, std::to_string(m.id),
                               {220, 30, 30});
        scene.markers.markers.push_back(std::move(m));
    }
    scene.table = table.str();
    return scene;
}

}  // namespace moma
