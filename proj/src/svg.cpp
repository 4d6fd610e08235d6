#include "ctsac/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ctsac/common.hpp"

namespace ctsac::svg {
namespace {

constexpr double kMargin = 20.0;
constexpr double kInner = 800.0;

struct Canvas {
    double lo_x, hi_y, s;
    double x(double wx) const { return kMargin + (wx - lo_x) * s; }
    double y(double wy) const { return kMargin + (hi_y - wy) * s; }
};

Canvas canvas_for(const WorldModel& world) {
    const double w = world.bounds.hi.x - world.bounds.lo.x;
    const double h = world.bounds.hi.y - world.bounds.lo.y;
    return {world.bounds.lo.x, world.bounds.hi.y, kInner / std::max(w, h)};
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

void emit_obstacles(std::ostringstream& os, const WorldModel& world, const Canvas& c) {
    for (const auto& o : world.obstacles) {
        const char* fill = o.dynamic ? "#d08050" : "#606a75";
        if (o.shape == ObstacleShape::Rectangle) {
            os << "  <rect x=\"" << num(c.x(o.center.x - o.half_extents.x)) << "\" y=\""
               << num(c.y(o.center.y + o.half_extents.y)) << "\" width=\""
               << num(2 * o.half_extents.x * c.s) << "\" height=\""
               << num(2 * o.half_extents.y * c.s) << "\" fill=\"" << fill << "\"/>\n";
        } else {
            os << "  <circle cx=\"" << num(c.x(o.center.x)) << "\" cy=\""
               << num(c.y(o.center.y)) << "\" r=\"" << num(o.radius * c.s)
               << "\" fill=\"" << fill << "\"/>\n";
        }
        if (o.dynamic) {
            os << "  <line x1=\"" << num(c.x(o.patrol_a.x)) << "\" y1=\""
               << num(c.y(o.patrol_a.y)) << "\" x2=\"" << num(c.x(o.patrol_b.x))
               << "\" y2=\"" << num(c.y(o.patrol_b.y))
               << "\" stroke=\"#d08050\" stroke-dasharray=\"6 4\"/>\n";
        }
    }
}

void open_svg(std::ostringstream& os, double width, double height) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width)
       << "\" height=\"" << num(height) << "\" viewBox=\"0 0 " << num(width) << ' '
       << num(height) << "\">\n";
}

void emit_frame(std::ostringstream& os, const WorldModel& world, const Canvas& c) {
    os << "  <rect x=\"" << num(c.x(world.bounds.lo.x)) << "\" y=\""
       << num(c.y(world.bounds.hi.y)) << "\" width=\""
       << num((world.bounds.hi.x - world.bounds.lo.x) * c.s) << "\" height=\""
       << num((world.bounds.hi.y - world.bounds.lo.y) * c.s)
       << "\" fill=\"#f8f9fa\" stroke=\"#222\" stroke-width=\"2\"/>\n";
}

}  // namespace

std::string render_world(const WorldModel& world) {
    const Canvas c = canvas_for(world);
    std::ostringstream os;
    open_svg(os, kInner + 2 * kMargin, kInner + 2 * kMargin);
    emit_frame(os, world, c);
    emit_obstacles(os, world, c);
    // Region outlines.
    for (const Rect* r : {&world.start_region, &world.goal_region}) {
        os << "  <rect x=\"" << num(c.x(r->lo.x)) << "\" y=\"" << num(c.y(r->hi.y))
           << "\" width=\"" << num((r->hi.x - r->lo.x) * c.s) << "\" height=\""
           << num((r->hi.y - r->lo.y) * c.s)
           << "\" fill=\"none\" stroke=\"#4a90d9\" stroke-dasharray=\"4 4\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string render_trajectory(const eval::Trajectory& trajectory) {
    const Canvas c = canvas_for(trajectory.world);
    std::ostringstream os;
    open_svg(os, kInner + 2 * kMargin, kInner + 2 * kMargin);
    emit_frame(os, trajectory.world, c);
    emit_obstacles(os, trajectory.world, c);
    if (!trajectory.points.empty()) {
        os << "  <polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\" points=\"";
        os << num(c.x(trajectory.start.x)) << ',' << num(c.y(trajectory.start.y));
        for (const auto& p : trajectory.points) {
            os << ' ' << num(c.x(p.x)) << ',' << num(c.y(p.y));
        }
        os << "\"/>\n";
    }
    os << "  <circle cx=\"" << num(c.x(trajectory.start.x)) << "\" cy=\""
       << num(c.y(trajectory.start.y)) << "\" r=\"6\" fill=\"#2d9d3a\"/>\n";
    os << "  <circle cx=\"" << num(c.x(trajectory.goal.x)) << "\" cy=\""
       << num(c.y(trajectory.goal.y)) << "\" r=\"6\" fill=\"#c23b3b\"/>\n";
    os << "</svg>\n";
    return os.str();
}

std::string render_learning_curves(const std::vector<TrainLogRow>& rows) {
    if (rows.empty()) throw ConfigError("render_learning_curves: no rows");
    const double width = 960, height = 640, pad = 50;
    const double panel_h = (height - 3 * pad) / 2.0;
    std::ostringstream os;
    open_svg(os, width, height);

    double rmin = rows[0].reward, rmax = rows[0].reward;
    for (const auto& r : rows) {
        rmin = std::min(rmin, r.reward);
        rmax = std::max(rmax, r.reward);
    }
    if (rmax == rmin) rmax = rmin + 1.0;
    const double n = static_cast<double>(rows.size());
    auto ex = [&](std::size_t i) {
        return pad + (width - 2 * pad) * (n == 1 ? 0.5 : static_cast<double>(i) / (n - 1));
    };

    // Panel 1: per-episode reward.
    os << "  <rect x=\"" << num(pad) << "\" y=\"" << num(pad) << "\" width=\""
       << num(width - 2 * pad) << "\" height=\"" << num(panel_h)
       << "\" fill=\"#fcfcfc\" stroke=\"#999\"/>\n";
    os << "  <text x=\"" << num(pad) << "\" y=\"" << num(pad - 8)
       << "\" font-size=\"14\">episode reward</text>\n";
    os << "  <polyline fill=\"none\" stroke=\"#1f6fb2\" points=\"";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double fy = (rows[i].reward - rmin) / (rmax - rmin);
        os << (i ? " " : "") << num(ex(i)) << ',' << num(pad + panel_h * (1.0 - fy));
    }
    os << "\"/>\n";

    // Panel 2: trailing success rate (window 50) and stage / 6.
    const double top2 = 2 * pad + panel_h;
    os << "  <rect x=\"" << num(pad) << "\" y=\"" << num(top2) << "\" width=\""
       << num(width - 2 * pad) << "\" height=\"" << num(panel_h)
       << "\" fill=\"#fcfcfc\" stroke=\"#999\"/>\n";
    os << "  <text x=\"" << num(pad) << "\" y=\"" << num(top2 - 8)
       << "\" font-size=\"14\">trailing success rate (blue), stage/6 (orange)</text>\n";
    os << "  <polyline fill=\"none\" stroke=\"#1f6fb2\" points=\"";
    std::size_t hits = 0;
    std::vector<int> successes;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        successes.push_back(rows[i].success);
        hits += rows[i].success ? 1 : 0;
        if (successes.size() > 50) {
            hits -= successes[successes.size() - 51] ? 1 : 0;
        }
        const std::size_t denom = std::min<std::size_t>(successes.size(), 50);
        const double rate = static_cast<double>(hits) / static_cast<double>(denom);
        os << (i ? " " : "") << num(ex(i)) << ',' << num(top2 + panel_h * (1.0 - rate));
    }
    os << "\"/>\n";
    os << "  <polyline fill=\"none\" stroke=\"#d08050\" points=\"";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double f = static_cast<double>(rows[i].stage) / 6.0;
        os << (i ? " " : "") << num(ex(i)) << ',' << num(top2 + panel_h * (1.0 - f));
    }
    os << "\"/>\n";
    os << "</svg>\n";
    return os.str();
}

std::string render_eval_bars(const eval::EvalReport& report) {
    const std::size_t groups = report.worlds.size();
    if (groups == 0) throw ConfigError("render_eval_bars: empty report");
    const double group_w = 120, pad = 60, height = 420, panel_h = 300;
    const double width = pad * 2 + group_w * static_cast<double>(groups);
    double set_max = 1.0;
    for (const auto& w : report.worlds) {
        if (w.has_set) set_max = std::max(set_max, w.set_seconds + w.ci_half_width);
    }
    std::ostringstream os;
    open_svg(os, width, height);
    os << "  <text x=\"" << num(pad) << "\" y=\"24\" font-size=\"14\">"
       << "SR (blue, 0..1) and SET seconds (orange, 0.." << num(set_max)
       << ") per world; whiskers are 95% intervals</text>\n";
    const double base = 40 + panel_h;
    for (std::size_t i = 0; i < groups; ++i) {
        const auto& w = report.worlds[i];
        const double gx = pad + group_w * static_cast<double>(i);
        const double sr_h = panel_h * w.sr;
        os << "  <rect x=\"" << num(gx) << "\" y=\"" << num(base - sr_h)
           << "\" width=\"40\" height=\"" << num(sr_h) << "\" fill=\"#1f6fb2\">"
           << "<title>" << w.name << " sr " << format_double(w.sr) << "</title></rect>\n";
        if (w.has_set) {
            const double set_h = panel_h * (w.set_seconds / set_max);
            os << "  <rect x=\"" << num(gx + 48) << "\" y=\"" << num(base - set_h)
               << "\" width=\"40\" height=\"" << num(set_h) << "\" fill=\"#d08050\">"
               << "<title>" << w.name << " set " << format_double(w.set_seconds)
               << " ci " << format_double(w.ci_half_width) << "</title></rect>\n";
            const double ci_h = panel_h * (w.ci_half_width / set_max);
            const double cx = gx + 68;
            os << "  <line x1=\"" << num(cx) << "\" y1=\"" << num(base - set_h - ci_h)
               << "\" x2=\"" << num(cx) << "\" y2=\"" << num(base - set_h + ci_h)
               << "\" stroke=\"#222\"/>\n";
        }
        os << "  <text x=\"" << num(gx) << "\" y=\"" << num(base + 18)
           << "\" font-size=\"12\">" << w.name << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << content;
    if (!os) throw IoError("failed while writing '" + path + "'");
}

}  // namespace ctsac::svg
