#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ctsac/common.hpp"
#include "ctsac/rng.hpp"

namespace ctsac {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::sqrt(x * x + y * y); }
};

struct Rect {
    Vec2 lo;
    Vec2 hi;

    double width() const { return hi.x - lo.x; }
    double height() const { return hi.y - lo.y; }
    Vec2 center() const { return {(lo.x + hi.x) * 0.5, (lo.y + hi.y) * 0.5}; }
    bool contains(const Vec2& p, double margin = 0.0) const {
        return p.x >= lo.x + margin && p.x <= hi.x - margin &&
               p.y >= lo.y + margin && p.y <= hi.y - margin;
    }
};

enum class ObstacleShape { Rectangle, Circle };

// Axis-aligned rectangle or circle; moving obstacles patrol a segment with
// position folded back into the segment at the endpoints.
struct Obstacle {
    ObstacleShape shape = ObstacleShape::Rectangle;
    Vec2 center;
    Vec2 half_extents;   // rectangle only
    double radius = 0.0; // circle only

    bool dynamic = false;
    Vec2 patrol_a, patrol_b;
    double speed = 0.0; // m/s along the patrol segment
    int dir = 1;        // +1 toward patrol_b, -1 toward patrol_a

    // Signed distance from point to the obstacle surface (< 0 inside).
    double distance(const Vec2& p) const;
};

struct WorldModel {
    Rect bounds{{-10.0, -10.0}, {10.0, 10.0}};
    std::vector<Obstacle> obstacles;
    Rect start_region;
    Rect goal_region;
    int stage_id = 1;
    std::uint64_t rng_seed = 0;
};

// Builds the stage recipe world for stage_id in 1..6. Pure function of its
// arguments; the same (stage_id, rng_seed) always yields bitwise-equal
// geometry. Throws std::out_of_range on a bad stage and GenerationError if no
// feasible layout is found.
WorldModel generate_world(int stage_id, std::uint64_t rng_seed);

// Translates moving obstacles by speed*dt along their patrol segments,
// reflecting at the endpoints. Static obstacles are untouched.
WorldModel advance_dynamics(const WorldModel& world, double dt);

// True iff the disc of radius `inflation` at (x, y) stays inside bounds and
// intersects no obstacle.
bool point_free(const WorldModel& world, double x, double y, double inflation);

// Grid flood fill (resolution in meters) with obstacle inflation; used by the
// generator to enforce the reachability guarantee.
bool grid_reachable(const WorldModel& world, const Vec2& from, const Vec2& to,
                    double inflation, double resolution);

// ctsac-world/1 text format.
std::string world_to_text(const WorldModel& world);
WorldModel world_from_text(const std::string& text);
void save_world(const WorldModel& world, const std::string& path);
WorldModel load_world(const std::string& path);

}  // namespace ctsac
