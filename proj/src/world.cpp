#include "ctsac/world.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <deque>
#include <fstream>
#include <sstream>

namespace ctsac {

namespace {

constexpr double kRobotRadius = 0.2;

double clampd(double v, double lo, double hi) { return std::max(lo, std::min(hi, v)); }

// Rectangular keep-out zone used while placing obstacles.
struct Zone {
    Rect rect;
};

bool rect_overlaps_zone(const Vec2& c, const Vec2& half, const Rect& z, double margin) {
    return std::abs(c.x - z.center().x) <= half.x + z.width() * 0.5 + margin &&
           std::abs(c.y - z.center().y) <= half.y + z.height() * 0.5 + margin;
}

bool circle_overlaps_zone(const Vec2& c, double r, const Rect& z, double margin) {
    double qx = clampd(c.x, z.lo.x, z.hi.x);
    double qy = clampd(c.y, z.lo.y, z.hi.y);
    double dx = c.x - qx, dy = c.y - qy;
    return std::sqrt(dx * dx + dy * dy) <= r + margin;
}

bool obstacle_overlaps_zone(const Obstacle& o, const Rect& z, double margin) {
    if (o.shape == ObstacleShape::Rectangle)
        return rect_overlaps_zone(o.center, o.half_extents, z, margin);
    return circle_overlaps_zone(o.center, o.radius, z, margin);
}

bool placement_ok(const Obstacle& o, const std::vector<Zone>& zones, const Rect& bounds) {
    double extumax = o.shape == ObstacleShape::Rectangle
                         ? std::max(o.half_extents.x, o.half_extents.y)
                         : o.radius;
    if (!bounds.contains(o.center, extumax + 0.05)) return false;
    for (const auto& z : zones)
        if (obstacle_overlaps_zone(o, z.rect, kRobotRadius)) return false;
    return true;
}

// Patrol swaths must also respect the zones so reachability holds at all times.
bool patrol_ok(const Obstacle& o, const std::vector<Zone>& zones, const Rect& bounds) {
    Vec2 d = o.patrol_b - o.patrol_a;
    double len = d.norm();
    int steps = std::max(2, static_cast<int>(len / 0.05));
    for (int i = 0; i <= steps; ++i) {
        Vec2 p = o.patrol_a + d * (static_cast<double>(i) / steps);
        if (!bounds.contains(p, o.radius + 0.05)) return false;
        for (const auto& z : zones)
            if (circle_overlaps_zone(p, o.radius, z.rect, kRobotRadius)) return false;
    }
    return true;
}

Rect segment_capsule_rect(const Vec2& a, const Vec2& b, double half_width) {
    return Rect{{std::min(a.x, b.x) - half_width, std::min(a.y, b.y) - half_width},
                {std::max(a.x, b.x) + half_width, std::max(a.y, b.y) + half_width}};
}

Obstacle make_box(Vec2 c, Vec2 half) {
    Obstacle o;
    o.shape = ObstacleShape::Rectangle;
    o.center = c;
    o.half_extents = half;
    return o;
}

Obstacle make_circle(Vec2 c, double r) {
    Obstacle o;
    o.shape = ObstacleShape::Circle;
    o.center = c;
    o.radius = r;
    return o;
}

// U-shaped pocket: back wall plus two side walls, one open mouth. The 3 m x
// 3 m interior is roomy enough to enter and turn around in, yet reads as a
// concave region with a single opening.
std::vector<Obstacle> pocket_prefab(Vec2 center, int facing, double interior, double thickness) {
    double h = interior * 0.5;
    double t = thickness * 0.5;
    std::vector<Obstacle> walls;
    // facing: 0=+x mouth, 1=-x, 2=+y, 3=-y
    auto rot = [&](double dx, double dy) -> Vec2 {
        switch (facing) {
            case 0: return {center.x - dx, center.y + dy};
            case 1: return {center.x + dx, center.y + dy};
            case 2: return {center.x + dy, center.y - dx};
            default: return {center.x + dy, center.y + dx};
        }
    };
    auto ext = [&](double ex, double ey) -> Vec2 {
        return (facing < 2) ? Vec2{ex, ey} : Vec2{ey, ex};
    };
    walls.push_back(make_box(rot(h + t, 0.0), ext(t, h + thickness)));      // back
    walls.push_back(make_box(rot(0.0, h + t), ext(h + t, t)));              // side
    walls.push_back(make_box(rot(0.0, -(h + t)), ext(h + t, t)));           // side
    return walls;
}

struct StageRecipe {
    int min_boxes, max_boxes;
    double half_lo, half_hi;
    bool mixed_shapes;
    bool pocket;
    int corridor_pairs; // narrow-passage wall pairs
    int min_dynamic, max_dynamic;
    int blockers;
};

StageRecipe recipe_for(int stage) {
    switch (stage) {
        case 1: return {0, 0, 0, 0, false, false, 0, 0, 0, 0};
        case 2: return {3, 5, 0.8, 1.5, false, false, 0, 0, 0, 0};
        case 3: return {6, 10, 0.4, 1.2, true, false, 0, 0, 0, 0};
        case 4: return {6, 10, 0.4, 1.2, true, true, 0, 0, 0, 0};
        case 5: return {6, 10, 0.4, 1.2, true, true, 2, 0, 0, 0};
        default: return {6, 10, 0.4, 1.2, true, true, 2, 1, 3, 2};
    }
}

bool try_generate(int stage, std::uint64_t seed, Rng& rng, WorldModel& out) {
    WorldModel w;
    w.stage_id = stage;
    w.rng_seed = seed;

    const StageRecipe rec = recipe_for(stage);

    // Start and goal regions: 2.4 m squares, centers at least 8 m apart.
    const double rh = 1.2;
    Vec2 sc, gc;
    for (int k = 0; k < 64; ++k) {
        sc = {rng.uniform(-6.5, -2.0), rng.uniform(-6.5, 6.5)};
        gc = {rng.uniform(2.0, 6.5), rng.uniform(-6.5, 6.5)};
        if ((gc - sc).norm() >= 8.0) break;
    }
    w.start_region = {{sc.x - rh, sc.y - rh}, {sc.x + rh, sc.y + rh}};
    w.goal_region = {{gc.x - rh, gc.y - rh}, {gc.x + rh, gc.y + rh}};

    // Protected L-corridor start -> elbow -> goal. Width 1.1 m clears twice
    // the robot diameter; narrow-passage prefabs sit just outside it.
    const double cw = 0.55;
    Vec2 elbow{gc.x, sc.y};
    std::vector<Zone> zones;
    zones.push_back({w.start_region});
    zones.push_back({w.goal_region});
    zones.push_back({segment_capsule_rect(sc, elbow, cw)});
    zones.push_back({segment_capsule_rect(elbow, gc, cw)});

    auto try_place = [&](auto make_candidate) -> bool {
        for (int attempt = 0; attempt < 80; ++attempt) {
            Obstacle o = make_candidate();
            if (placement_ok(o, zones, w.bounds)) {
                w.obstacles.push_back(o);
                return true;
            }
        }
        return false;
    };

    // Narrow passages: two walls flanking a point of the protected corridor,
    // with a 1.2-1.6 m gap centered on the corridor axis.
    for (int i = 0; i < rec.corridor_pairs; ++i) {
        bool horizontal = rng.bernoulli(0.5);
        Vec2 axis_a = horizontal ? sc : elbow;
        Vec2 axis_b = horizontal ? elbow : gc;
        double len = (axis_b - axis_a).norm();
        if (len < 3.0) continue;
        double t = rng.uniform(0.25, 0.75);
        Vec2 at = axis_a + (axis_b - axis_a) * t;
        double gap = rng.uniform(1.2, 1.6);
        double wall_len = rng.uniform(1.2, 2.0);
        double th = 0.15;
        double off = gap * 0.5 + th;
        Vec2 c1, c2, half;
        if (horizontal) { // corridor along x; walls above/below
            c1 = {at.x, at.y + off};
            c2 = {at.x, at.y - off};
            half = {wall_len * 0.5, th};
        } else {
            c1 = {at.x + off, at.y};
            c2 = {at.x - off, at.y};
            half = {th, wall_len * 0.5};
        }
        for (Vec2 c : {c1, c2}) {
            Obstacle o = make_box(c, half);
            // The flanking walls intentionally hug the corridor, so only the
            // regions and bounds veto them.
            double ext = std::max(half.x, half.y);
            if (w.bounds.contains(c, ext + 0.05) &&
                !obstacle_overlaps_zone(o, w.start_region, kRobotRadius) &&
                !obstacle_overlaps_zone(o, w.goal_region, kRobotRadius))
                w.obstacles.push_back(o);
        }
    }

    // Dead-end pocket.
    if (rec.pocket) {
        bool placed = false;
        for (int attempt = 0; attempt < 80 && !placed; ++attempt) {
            Vec2 c{rng.uniform(-6.0, 6.0), rng.uniform(-6.0, 6.0)};
            int facing = rng.uniform_int(0, 3);
            auto walls = pocket_prefab(c, facing, 3.0, 0.3);
            bool ok = true;
            for (const auto& o : walls)
                if (!placement_ok(o, zones, w.bounds)) ok = false;
            // Keep the mouth area free so the pocket stays enterable.
            Rect mouth = segment_capsule_rect(c, c, 1.9);
            for (const auto& z : zones)
                if (rect_overlaps_zone(mouth.center(), {1.9, 1.9}, z.rect, 0.0)) ok = false;
            if (ok) {
                for (const auto& o : walls) w.obstacles.push_back(o);
                placed = true;
            }
        }
        if (!placed) return false;
    }

    // Random static clutter.
    int n_boxes = rec.min_boxes ? rng.uniform_int(rec.min_boxes, rec.max_boxes) : 0;
    int placed_clutter = 0;
    for (int i = 0; i < n_boxes; ++i) {
        bool circle = rec.mixed_shapes && rng.bernoulli(0.5);
        bool ok = try_place([&]() -> Obstacle {
            Vec2 c{rng.uniform(-8.5, 8.5), rng.uniform(-8.5, 8.5)};
            if (circle) return make_circle(c, rng.uniform(0.3, 1.0));
            return make_box(c, {rng.uniform(rec.half_lo, rec.half_hi),
                                rng.uniform(rec.half_lo, rec.half_hi)});
        });
        if (ok) ++placed_clutter;
    }
    if (placed_clutter < rec.min_boxes) return false;

    // Blocked passages: thin walls dropped anywhere legal off the corridor.
    for (int i = 0; i < rec.blockers; ++i) {
        try_place([&]() -> Obstacle {
            Vec2 c{rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0)};
            bool vertical = rng.bernoulli(0.5);
            Vec2 half = vertical ? Vec2{0.2, rng.uniform(0.8, 1.5)}
                                 : Vec2{rng.uniform(0.8, 1.5), 0.2};
            return make_box(c, half);
        });
    }

    // Dynamic obstacles with their whole patrol swath off the corridor.
    if (rec.max_dynamic > 0) {
        int want = rng.uniform_int(rec.min_dynamic, rec.max_dynamic);
        int placed = 0;
        for (int i = 0; i < want; ++i) {
            for (int attempt = 0; attempt < 80; ++attempt) {
                double r = rng.uniform(0.25, 0.4);
                Vec2 a{rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0)};
                double ang = rng.uniform(0.0, kTwoPi);
                double len = rng.uniform(2.0, 5.0);
                Vec2 b{a.x + len * std::cos(ang), a.y + len * std::sin(ang)};
                Obstacle o = make_circle(a, r);
                o.dynamic = true;
                o.patrol_a = a;
                o.patrol_b = b;
                o.speed = rng.uniform(0.3, 0.8);
                o.dir = 1;
                if (patrol_ok(o, zones, w.bounds)) {
                    w.obstacles.push_back(o);
                    ++placed;
                    break;
                }
            }
        }
        if (placed < rec.min_dynamic) return false;
    }

    if (!grid_reachable(w, sc, gc, kRobotRadius, 0.1)) return false;
    out = w;
    return true;
}

}  // namespace

double Obstacle::distance(const Vec2& p) const {
    if (shape == ObstacleShape::Circle) return (p - center).norm() - radius;
    double qx = std::abs(p.x - center.x) - half_extents.x;
    double qy = std::abs(p.y - center.y) - half_extents.y;
    double ox = std::max(qx, 0.0), oy = std::max(qy, 0.0);
    double outside = std::sqrt(ox * ox + oy * oy);
    double inside = std::min(std::max(qx, qy), 0.0);
    return outside + inside;
}

WorldModel generate_world(int stage_id, std::uint64_t rng_seed) {
    if (stage_id < 1 || stage_id > 6)
        throw std::out_of_range("generate_world: stage_id must be in 1..6, got " +
                                std::to_string(stage_id));
    for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
        Rng rng(mix_seed(mix_seed(rng_seed, static_cast<std::uint64_t>(stage_id)), attempt));
        WorldModel w;
        if (try_generate(stage_id, rng_seed, rng, w)) return w;
    }
    throw GenerationError("generate_world: no feasible layout for stage " +
                          std::to_string(stage_id) + " seed " + std::to_string(rng_seed));
}

WorldModel advance_dynamics(const WorldModel& world, double dt) {
    WorldModel out = world;
    for (auto& o : out.obstacles) {
        if (!o.dynamic || o.speed <= 0.0) continue;
        Vec2 d = o.patrol_b - o.patrol_a;
        double len = d.norm();
        if (len <= 1e-12) continue;
        Vec2 u = d * (1.0 / len);
        double s = clampd((o.center - o.patrol_a).dot(u), 0.0, len);
        s += o.dir * o.speed * dt;
        while (s < 0.0 || s > len) {
            if (s < 0.0) {
                s = -s;
                o.dir = 1;
            } else {
                s = 2.0 * len - s;
                o.dir = -1;
            }
        }
        o.center = o.patrol_a + u * s;
    }
    return out;
}

bool point_free(const WorldModel& world, double x, double y, double inflation) {
    const Vec2 p{x, y};
    if (x - inflation < world.bounds.lo.x || x + inflation > world.bounds.hi.x ||
        y - inflation < world.bounds.lo.y || y + inflation > world.bounds.hi.y)
        return false;
    for (const auto& o : world.obstacles)
        if (o.distance(p) < inflation) return false;
    return true;
}

bool grid_reachable(const WorldModel& world, const Vec2& from, const Vec2& to,
                    double inflation, double resolution) {
    int nx = static_cast<int>(std::ceil(world.bounds.width() / resolution));
    int ny = static_cast<int>(std::ceil(world.bounds.height() / resolution));
    auto cell_of = [&](const Vec2& p) {
        int cx = static_cast<int>((p.x - world.bounds.lo.x) / resolution);
        int cy = static_cast<int>((p.y - world.bounds.lo.y) / resolution);
        return std::pair<int, int>{std::clamp(cx, 0, nx - 1), std::clamp(cy, 0, ny - 1)};
    };
    auto center_of = [&](int cx, int cy) {
        return Vec2{world.bounds.lo.x + (cx + 0.5) * resolution,
                    world.bounds.lo.y + (cy + 0.5) * resolution};
    };
    std::vector<char> state(static_cast<size_t>(nx) * ny, 0); // 0 unknown, 1 open, 2 blocked
    auto free_cell = [&](int cx, int cy) {
        size_t idx = static_cast<size_t>(cy) * nx + cx;
        if (state[idx] == 0) {
            Vec2 c = center_of(cx, cy);
            state[idx] = point_free(world, c.x, c.y, inflation) ? 1 : 2;
        }
        return state[idx] == 1;
    };
    auto [sx, sy] = cell_of(from);
    auto [tx, ty] = cell_of(to);
    if (!free_cell(sx, sy) || !free_cell(tx, ty)) return false;
    std::vector<char> seen(static_cast<size_t>(nx) * ny, 0);
    std::deque<std::pair<int, int>> queue{{sx, sy}};
    seen[static_cast<size_t>(sy) * nx + sx] = 1;
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    while (!queue.empty()) {
        auto [cx, cy] = queue.front();
        queue.pop_front();
        if (cx == tx && cy == ty) return true;
        for (int k = 0; k < 4; ++k) {
            int mx = cx + dx[k], my = cy + dy[k];
            if (mx < 0 || my < 0 || mx >= nx || my >= ny) continue;
            size_t idx = static_cast<size_t>(my) * nx + mx;
            if (seen[idx] || !free_cell(mx, my)) continue;
            seen[idx] = 1;
            queue.emplace_back(mx, my);
        }
    }
    return false;
}

namespace {

std::string fmt_double(double v) { return format_double(v); }

}  // namespace

std::string world_to_text(const WorldModel& world) {
    std::ostringstream os;
    os << "ctsac-world/1\n";
    os << "bounds " << fmt_double(world.bounds.lo.x) << ' ' << fmt_double(world.bounds.lo.y)
       << ' ' << fmt_double(world.bounds.hi.x) << ' ' << fmt_double(world.bounds.hi.y) << '\n';
    os << "stage " << world.stage_id << '\n';
    os << "seed " << world.rng_seed << '\n';
    for (const Rect* r : {&world.start_region, &world.goal_region}) {
        os << (r == &world.start_region ? "start_region " : "goal_region ")
           << fmt_double(r->lo.x) << ' ' << fmt_double(r->lo.y) << ' ' << fmt_double(r->hi.x)
           << ' ' << fmt_double(r->hi.y) << '\n';
    }
    for (const auto& o : world.obstacles) {
        if (o.shape == ObstacleShape::Rectangle)
            os << "rect " << fmt_double(o.center.x) << ' ' << fmt_double(o.center.y) << ' '
               << fmt_double(o.half_extents.x) << ' ' << fmt_double(o.half_extents.y);
        else
            os << "circle " << fmt_double(o.center.x) << ' ' << fmt_double(o.center.y) << ' '
               << fmt_double(o.radius);
        if (o.dynamic)
            os << " patrol " << fmt_double(o.patrol_a.x) << ' ' << fmt_double(o.patrol_a.y)
               << ' ' << fmt_double(o.patrol_b.x) << ' ' << fmt_double(o.patrol_b.y) << ' '
               << fmt_double(o.speed) << ' ' << o.dir;
        os << '\n';
    }
    return os.str();
}

WorldModel world_from_text(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "ctsac-world/1")
        throw IoError("world file: missing ctsac-world/1 header");
    WorldModel w;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        auto need = [&](double& v) {
            if (!(ls >> v))
                throw IoError("world file line " + std::to_string(lineno) + ": malformed " + tok);
        };
        if (tok == "bounds") {
            need(w.bounds.lo.x); need(w.bounds.lo.y); need(w.bounds.hi.x); need(w.bounds.hi.y);
        } else if (tok == "stage") {
            if (!(ls >> w.stage_id))
                throw IoError("world file line " + std::to_string(lineno) + ": malformed stage");
        } else if (tok == "seed") {
            if (!(ls >> w.rng_seed))
                throw IoError("world file line " + std::to_string(lineno) + ": malformed seed");
        } else if (tok == "start_region" || tok == "goal_region") {
            Rect r;
            need(r.lo.x); need(r.lo.y); need(r.hi.x); need(r.hi.y);
            (tok[0] == 's' ? w.start_region : w.goal_region) = r;
        } else if (tok == "rect" || tok == "circle") {
            Obstacle o;
            if (tok == "rect") {
                o.shape = ObstacleShape::Rectangle;
                need(o.center.x); need(o.center.y); need(o.half_extents.x); need(o.half_extents.y);
            } else {
                o.shape = ObstacleShape::Circle;
                need(o.center.x); need(o.center.y); need(o.radius);
            }
            std::string patrol;
            if (ls >> patrol) {
                if (patrol != "patrol")
                    throw IoError("world file line " + std::to_string(lineno) +
                                  ": expected 'patrol', got '" + patrol + "'");
                o.dynamic = true;
                need(o.patrol_a.x); need(o.patrol_a.y); need(o.patrol_b.x); need(o.patrol_b.y);
                need(o.speed);
                if (!(ls >> o.dir))
                    throw IoError("world file line " + std::to_string(lineno) + ": missing dir");
            }
            w.obstacles.push_back(o);
        } else {
            throw IoError("world file line " + std::to_string(lineno) + ": unknown record '" +
                          tok + "'");
        }
    }
    return w;
}

void save_world(const WorldModel& world, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + path);
    out << world_to_text(world);
    if (!out) throw IoError("write failed: " + path);
}

WorldModel load_world(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return world_from_text(ss.str());
}

}  // namespace ctsac
