#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace moma {

inline constexpr double kCellSize = 0.25;  // meters per grid cell

struct Cell {
    int row = 0;
    int col = 0;

    bool operator==(const Cell&) const = default;
    auto operator<=>(const Cell&) const = default;
};

inline Cell operator+(Cell a, Cell b) { return {a.row + b.row, a.col + b.col}; }
inline Cell operator-(Cell a, Cell b) { return {a.row - b.row, a.col - b.col}; }

// Metric position of a cell center.
inline double cell_x(Cell c) { return (c.col + 0.5) * kCellSize; }
inline double cell_y(Cell c) { return (c.row + 0.5) * kCellSize; }

inline double cell_distance(Cell a, Cell b) {
    double dx = cell_x(a) - cell_x(b);
    double dy = cell_y(a) - cell_y(b);
    return std::sqrt(dx * dx + dy * dy);
}

enum class Heading { North, East, South, West };

inline Cell heading_delta(Heading h) {
    switch (h) {
        case Heading::North: return {-1, 0};
        case Heading::East: return {0, 1};
        case Heading::South: return {1, 0};
        case Heading::West: return {0, -1};
    }
    return {0, 0};
}

inline Heading rotate_left(Heading h) {
    return static_cast<Heading>((static_cast<int>(h) + 3) % 4);
}
inline Heading rotate_right(Heading h) {
    return static_cast<Heading>((static_cast<int>(h) + 1) % 4);
}
inline Heading opposite(Heading h) {
    return static_cast<Heading>((static_cast<int>(h) + 2) % 4);
}

std::string heading_name(Heading h);
Heading heading_from_name(std::string_view name);

// Directions relative to the robot camera frame.
enum class RelDir { Forward, Left, Right, Backward };

std::string rel_dir_name(RelDir d);
RelDir rel_dir_from_name(std::string_view name);

inline Heading apply_rel_dir(Heading h, RelDir d) {
    switch (d) {
        case RelDir::Forward: return h;
        case RelDir::Left: return rotate_left(h);
        case RelDir::Right: return rotate_right(h);
        case RelDir::Backward: return opposite(h);
    }
    return h;
}

// Snap a robot->target bearing to the nearest cardinal heading.
// Ties broken toward the vertical axis.
Heading bearing_heading(Cell from, Cell to);

struct Outcome {
    bool success = true;
    std::string code;     // machine-parsable, empty iff success
    std::string message;  // human-readable
    bool semantic_violation = false;

    static Outcome ok() { return {}; }
    static Outcome fail(std::string code, std::string message) {
        Outcome o;
        o.success = false;
        o.code = std::move(code);
        o.message = std::move(message);
        return o;
    }
};

// FNV-1a, used for request hashing and state fingerprints.
inline uint64_t fnv1a(std::string_view data, uint64_t seed = 1469598103934665603ull) {
    uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// splitmix64-style mixing for independent seeded draws.
inline uint64_t hash_mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return hash_mix(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
}

inline double unit_draw(uint64_t h) {
    return static_cast<double>(hash_mix(h) >> 11) * (1.0 / 9007199254740992.0);
}

std::string format_meters(double m);  // rounded to 0.1 m

}  // namespace moma
