#pragma once

#include <vector>

#include "ctsac/common.hpp"
#include "ctsac/rng.hpp"
#include "ctsac/world.hpp"

namespace ctsac {

struct LidarConfig {
    int d = 32;               // segment count, divisible by 4
    double max_range = 6.0;   // m
    int rays_per_scan = 360;
    double noise_sigma = 0.01; // m, additive Gaussian per ray
    double dropout_prob = 0.0; // per-ray discard probability

    void validate() const;
};

// Direction-weighted angular segmentation: 3d/4 narrow spans cover a forward
// sector centered on the heading, d/4 wide spans cover the rear.
struct SegmentLayout {
    std::vector<double> spans;      // d angular widths, radians
    std::vector<double> boundaries; // d+1 cumulative angles, boundaries[0] = -forward/2

    int segment_of(double rel_angle) const; // rel_angle relative to heading
    double forward_width() const { return -2.0 * boundaries.front(); }
};

SegmentLayout segment_layout(const LidarConfig& config);

// Analytic first-hit distance along a single ray. Obstacles only; the world
// bounds are not ray targets (they act through collision checks instead).
// Returns max_range when nothing is hit.
double cast_ray(const WorldModel& world, const Vec2& origin, double angle, double max_range);

// Full scan: rays_per_scan rays at relative angles 2*pi*k/rays_per_scan, each
// clipped, optionally noised and dropped, then min-pooled per segment.
// Empty segments report max_range.
std::vector<double> scan(const WorldModel& world, const Vec2& position, double heading,
                         const LidarConfig& config, Rng& rng);

// Raw (noise-free, per-ray) distances, used for collision tests.
std::vector<double> raw_ray_distances(const WorldModel& world, const Vec2& position,
                                      double heading, const LidarConfig& config);

// Minimum element of a scan (min l_d).
double min_distance(const std::vector<double>& scan_values);

}  // namespace ctsac
