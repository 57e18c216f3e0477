#include "moma/core.hpp"

#include <cstdio>
#include <stdexcept>

namespace moma {

std::string heading_name(Heading h) {
    switch (h) {
        case Heading::North: return "N";
        case Heading::East: return "E";
        case Heading::South: return "S";
        case Heading::West: return "W";
    }
    return "?";
}

Heading heading_from_name(std::string_view name) {
    if (name == "N") return Heading::North;
    if (name == "E") return Heading::East;
    if (name == "S") return Heading::South;
    if (name == "W") return Heading::West;
    throw std::invalid_argument("unknown heading: " + std::string(name));
}

std::string rel_dir_name(RelDir d) {
    switch (d) {
        case RelDir::Forward: return "forward";
        case RelDir::Left: return "left";
        case RelDir::Right: return "right";
        case RelDir::Backward: return "backward";
    }
    return "?";
}

RelDir rel_dir_from_name(std::string_view name) {
    if (name == "forward") return RelDir::Forward;
    if (name == "left") return RelDir::Left;
    if (name == "right") return RelDir::Right;
    if (name == "backward") return RelDir::Backward;
    throw std::invalid_argument("unknown direction: " + std::string(name));
}

Heading bearing_heading(Cell from, Cell to) {
    int dr = to.row - from.row;
    int dc = to.col - from.col;
    if (std::abs(dr) >= std::abs(dc)) {
        return dr <= 0 ? Heading::North : Heading::South;
    }
    return dc > 0 ? Heading::East : Heading::West;
}

std::string format_meters(double m) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f m", m);
    return buf;
}

}  // namespace moma
