#pragma once

// Shared test machinery: a finite-difference gradient checker, an independent
// ray-marching range oracle, and a geometric dead-end detector. Everything
// here is deliberately implemented from first principles so it cannot share a
// bug with the library code it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ctsac/lidar.hpp"
#include "ctsac/tensor.hpp"
#include "ctsac/world.hpp"

namespace testutil {

// Relative error with a unit floor so near-zero gradients compare absolutely.
inline double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1.0});
}

struct FdReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
};

// Central-difference check of d(loss)/d(p) for every element of every listed
// tensor. `make_loss` must rebuild the graph from the tensors' current values
// on each call and must be deterministic.
inline FdReport fd_check(std::vector<std::pair<std::string, ctsac::grad::Tensor>> params,
                         const std::function<ctsac::grad::Tensor()>& make_loss,
                         double h = 1e-5) {
    using ctsac::grad::backward;
    using ctsac::grad::NoGrad;
    using ctsac::grad::Tensor;

    for (auto& [name, t] : params) t.zero_grad();
    Tensor loss = make_loss();
    backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& [name, t] : params) analytic.push_back(t.grad());

    auto eval_loss = [&]() {
        NoGrad frozen;
        return make_loss().item();
    };

    FdReport rep;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& t = params[pi].second;
        for (std::size_t i = 0; i < t.numel(); ++i) {
            const double saved = t.values()[i];
            t.values()[i] = saved + h;
            const double up = eval_loss();
            t.values()[i] = saved - h;
            const double down = eval_loss();
            t.values()[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double re = rel_err(analytic[pi][i], fd);
            ++rep.checked;
            if (re > rep.max_rel_err) {
                rep.max_rel_err = re;
                rep.worst_param = params[pi].first;
                rep.worst_index = i;
            }
        }
    }
    return rep;
}

// Reference first-hit distance along a ray: 1 mm marching on the scene's
// signed distance field with a bisection refinement of the bracketing step.
// Obstacles whose bounding circle stays clear of the ray line are skipped so
// the march stays fast; the skip test is conservative.
inline double march_ray(const ctsac::WorldModel& world, const ctsac::Vec2& origin,
                        double angle, double max_range) {
    using ctsac::Obstacle;
    using ctsac::ObstacleShape;
    using ctsac::Vec2;

    const Vec2 dir{std::cos(angle), std::sin(angle)};
    std::vector<const Obstacle*> candidates;
    for (const auto& o : world.obstacles) {
        const double bound = o.shape == ObstacleShape::Circle
                                 ? o.radius
                                 : std::hypot(o.half_extents.x, o.half_extents.y);
        const Vec2 rel = o.center - origin;
        const double along = rel.dot(dir);
        if (along < -bound || along - bound > max_range) continue;
        const double perp = std::fabs(rel.x * dir.y - rel.y * dir.x);
        if (perp > bound + 1e-9) continue;
        candidates.push_back(&o);
    }
    if (candidates.empty()) return max_range;

    auto sdf = [&](double t) {
        const Vec2 p{origin.x + dir.x * t, origin.y + dir.y * t};
        double d = 1e300;
        for (const Obstacle* o : candidates) d = std::min(d, o->distance(p));
        return d;
    };

    const double step = 1e-3;
    if (sdf(0.0) <= 0.0) return 0.0;
    double prev = 0.0;
    for (double t = step;; t += step) {
        const double tt = std::min(t, max_range);
        if (sdf(tt) <= 0.0) {
            double lo = prev, hi = tt;
            for (int k = 0; k < 40; ++k) {
                const double mid = 0.5 * (lo + hi);
                (sdf(mid) <= 0.0 ? hi : lo) = mid;
            }
            return std::min(0.5 * (lo + hi), max_range);
        }
        prev = tt;
        if (tt >= max_range) break;
    }
    return max_range;
}

// Samples a collision-free point with the given clearance, or returns false
// after `attempts` rejections.
inline bool sample_free_point(const ctsac::WorldModel& world, ctsac::Rng& rng,
                              double clearance, ctsac::Vec2& out, int attempts = 400) {
    for (int k = 0; k < attempts; ++k) {
        ctsac::Vec2 p{rng.uniform(world.bounds.lo.x + clearance, world.bounds.hi.x - clearance),
                      rng.uniform(world.bounds.lo.y + clearance, world.bounds.hi.y - clearance)};
        if (ctsac::point_free(world, p.x, p.y, clearance)) {
            out = p;
            return true;
        }
    }
    return false;
}

// Dead-end detector: a world contains a pocket if some free, start-reachable
// probe point can escape its 2.2 m neighbourhood only through a single
// contiguous fan of directions no wider than 80 degrees. Open ground escapes
// everywhere, a flat wall leaves ~180 degrees and an L-corner ~90, so only a
// three-sided enclosure trips this.
inline bool has_pocket(const ctsac::WorldModel& world) {
    using ctsac::Vec2;
    const double clearance = 0.2;
    const double reach = 2.2;
    const double res = 0.25;

    const int nx = static_cast<int>(world.bounds.width() / res);
    const int ny = static_cast<int>(world.bounds.height() / res);
    auto center_of = [&](int cx, int cy) {
        return Vec2{world.bounds.lo.x + (cx + 0.5) * res, world.bounds.lo.y + (cy + 0.5) * res};
    };
    std::vector<char> free_cell(static_cast<std::size_t>(nx) * ny, 0);
    for (int cy = 0; cy < ny; ++cy)
        for (int cx = 0; cx < nx; ++cx) {
            const Vec2 p = center_of(cx, cy);
            free_cell[static_cast<std::size_t>(cy) * nx + cx] =
                ctsac::point_free(world, p.x, p.y, clearance) ? 1 : 0;
        }

    // Flood fill from the start region so unreachable enclosed voids (e.g.
    // the inside of clutter clusters) are not counted as pockets.
    const Vec2 start = world.start_region.center();
    const int sx = std::clamp(static_cast<int>((start.x - world.bounds.lo.x) / res), 0, nx - 1);
    const int sy = std::clamp(static_cast<int>((start.y - world.bounds.lo.y) / res), 0, ny - 1);
    std::vector<char> reach_cell(free_cell.size(), 0);
    std::vector<std::pair<int, int>> stack{{sx, sy}};
    if (free_cell[static_cast<std::size_t>(sy) * nx + sx]) {
        reach_cell[static_cast<std::size_t>(sy) * nx + sx] = 1;
        while (!stack.empty()) {
            auto [cx, cy] = stack.back();
            stack.pop_back();
            const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
            for (int k = 0; k < 4; ++k) {
                const int mx = cx + dx[k], my = cy + dy[k];
                if (mx < 0 || my < 0 || mx >= nx || my >= ny) continue;
                const std::size_t idx = static_cast<std::size_t>(my) * nx + mx;
                if (!free_cell[idx] || reach_cell[idx]) continue;
                reach_cell[idx] = 1;
                stack.emplace_back(mx, my);
            }
        }
    }

    auto escape_open = [&](const Vec2& p, double a) {
        for (double t = 0.15; t <= reach; t += 0.1)
            if (!ctsac::point_free(world, p.x + t * std::cos(a), p.y + t * std::sin(a),
                                   clearance))
                return false;
        return true;
    };

    for (int cy = 0; cy < ny; ++cy) {
        for (int cx = 0; cx < nx; ++cx) {
            if (!reach_cell[static_cast<std::size_t>(cy) * nx + cx]) continue;
            const Vec2 p = center_of(cx, cy);
            // Cheap prefilter: an 80-degree mouth covers at most two of eight
            // 45-degree-spaced directions, so more than two coarse escapes
            // rules the cell out.
            int coarse = 0;
            for (int k = 0; k < 8 && coarse <= 2; ++k)
                if (escape_open(p, ctsac::kTwoPi * k / 8)) ++coarse;
            if (coarse > 2) continue;

            const int dirs = 72;
            std::vector<bool> open(dirs, false);
            int open_count = 0;
            for (int k = 0; k < dirs; ++k) {
                if (escape_open(p, ctsac::kTwoPi * k / dirs)) {
                    open[k] = true;
                    ++open_count;
                }
            }
            if (open_count == 0 || open_count > dirs * 80 / 360) continue;
            int transitions = 0;
            for (int k = 0; k < dirs; ++k)
                if (open[k] != open[(k + 1) % dirs]) ++transitions;
            if (transitions == 2) return true;
        }
    }
    return false;
}

}  // namespace testutil
