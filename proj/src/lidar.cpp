#include "ctsac/lidar.hpp"

#include <algorithm>
#include <limits>

namespace ctsac {

void LidarConfig::validate() const {
    if (d < 8 || d % 4 != 0)
        throw ConfigError("lidar.d must be >= 8 and divisible by 4, got " + std::to_string(d));
    if (max_range <= 0.0) throw ConfigError("lidar.max_range must be positive");
    if (rays_per_scan < d) throw ConfigError("lidar.rays_per_scan must be >= d");
    if (dropout_prob < 0.0 || dropout_prob >= 1.0)
        throw ConfigError("lidar.dropout_prob must be in [0, 1)");
    if (noise_sigma < 0.0) throw ConfigError("lidar.noise_sigma must be >= 0");
}

SegmentLayout segment_layout(const LidarConfig& config) {
    config.validate();
    const int d = config.d;
    const double narrow = 4.0 * kPi / (3.0 * d - 4.0);
    const double wide = 4.0 * kPi * (3.0 * d - 8.0) / (d * (3.0 * d - 4.0));
    SegmentLayout layout;
    layout.spans.resize(d);
    for (int m = 0; m < d; ++m) layout.spans[m] = (m < 3 * d / 4) ? narrow : wide;
    layout.boundaries.resize(d + 1);
    layout.boundaries[0] = -0.5 * narrow * (3.0 * d / 4.0);
    for (int m = 0; m < d; ++m) layout.boundaries[m + 1] = layout.boundaries[m] + layout.spans[m];
    return layout;
}

int SegmentLayout::segment_of(double rel_angle) const {
    const double b0 = boundaries.front();
    double a = rel_angle - b0;
    a -= kTwoPi * std::floor(a / kTwoPi); // [0, 2pi)
    a += b0;
    // boundaries are monotone; binary search for the containing half-open span
    auto it = std::upper_bound(boundaries.begin(), boundaries.end(), a);
    int idx = static_cast<int>(it - boundaries.begin()) - 1;
    return std::clamp(idx, 0, static_cast<int>(spans.size()) - 1);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double ray_circle(const Vec2& o, const Vec2& dir, const Vec2& c, double r) {
    Vec2 oc = o - c;
    double b = oc.dot(dir);
    double q = oc.dot(oc) - r * r;
    double disc = b * b - q;
    if (disc < 0.0) return kInf;
    double s = std::sqrt(disc);
    double t1 = -b - s;
    if (t1 >= 0.0) return t1;
    double t2 = -b + s;
    if (t2 >= 0.0) return 0.0; // origin inside
    return kInf;
}

double ray_rect(const Vec2& o, const Vec2& dir, const Vec2& c, const Vec2& h) {
    double tmin = -kInf, tmax = kInf;
    for (int ax = 0; ax < 2; ++ax) {
        double od = ax == 0 ? o.x - c.x : o.y - c.y;
        double dd = ax == 0 ? dir.x : dir.y;
        double e = ax == 0 ? h.x : h.y;
        if (std::abs(dd) < 1e-15) {
            if (std::abs(od) > e) return kInf;
            continue;
        }
        double t1 = (-e - od) / dd;
        double t2 = (e - od) / dd;
        if (t1 > t2) std::swap(t1, t2);
        tmin = std::max(tmin, t1);
        tmax = std::min(tmax, t2);
        if (tmin > tmax) return kInf;
    }
    if (tmax < 0.0) return kInf;
    return tmin >= 0.0 ? tmin : 0.0; // origin inside -> 0
}

}  // namespace

double cast_ray(const WorldModel& world, const Vec2& origin, double angle, double max_range) {
    const Vec2 dir{std::cos(angle), std::sin(angle)};
    double best = max_range;
    for (const auto& o : world.obstacles) {
        double t = o.shape == ObstacleShape::Circle
                       ? ray_circle(origin, dir, o.center, o.radius)
                       : ray_rect(origin, dir, o.center, o.half_extents);
        if (t < best) best = t;
    }
    return best;
}

std::vector<double> raw_ray_distances(const WorldModel& world, const Vec2& position,
                                      double heading, const LidarConfig& config) {
    std::vector<double> out(config.rays_per_scan);
    for (int k = 0; k < config.rays_per_scan; ++k) {
        double rel = kTwoPi * k / config.rays_per_scan;
        out[k] = cast_ray(world, position, heading + rel, config.max_range);
    }
    return out;
}

std::vector<double> scan(const WorldModel& world, const Vec2& position, double heading,
                         const LidarConfig& config, Rng& rng) {
    config.validate();
    const SegmentLayout layout = segment_layout(config);
    std::vector<double> pooled(config.d, config.max_range);
    for (int k = 0; k < config.rays_per_scan; ++k) {
        double rel = kTwoPi * k / config.rays_per_scan;
        if (config.dropout_prob > 0.0 && rng.bernoulli(config.dropout_prob)) continue;
        double dist = cast_ray(world, position, heading + rel, config.max_range);
        if (config.noise_sigma > 0.0)
            dist = std::clamp(dist + rng.normal(0.0, config.noise_sigma), 0.0, config.max_range);
        int seg = layout.segment_of(rel);
        pooled[seg] = std::min(pooled[seg], dist);
    }
    return pooled;
}

double min_distance(const std::vector<double>& scan_values) {
    if (scan_values.empty())
        throw std::invalid_argument("min_distance: empty scan");
    return *std::min_element(scan_values.begin(), scan_values.end());
}

}  // namespace ctsac
