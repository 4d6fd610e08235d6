#include "ctsac/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ctsac/common.hpp"

namespace ctsac::eval {

Action StraightLinePolicy::act(const RobotState& observation) {
    Action a;
    a.omega_c = std::clamp(2.0 * observation.theta_t, -1.0, 1.0);
    a.v_c = std::abs(observation.theta_t) < 0.3 ? 1.0 : 0.2;
    return a;
}

SacPolicy::SacPolicy(sac::SacEngine& engine)
    : engine_(engine), rng_(mix_seed(engine.config().seed, 0xde7e)) {}

void SacPolicy::reset() { history_.clear(); }

Action SacPolicy::act(const RobotState& observation) {
    history_.push_back(observation.features());
    const std::size_t t = engine_.net_config().seq_len;
    if (history_.size() > t) {
        history_.erase(history_.begin(), history_.end() - static_cast<std::ptrdiff_t>(t));
    }
    return engine_.act(history_, /*stochastic=*/false, rng_);
}

FixedEpisodeSetup fixed_setup(const WorldModel& world, const EnvConfig& env_config) {
    Rng rng(mix_seed(world.rng_seed, 0x5e7f1eedULL));
    const double inflation = env_config.robot_radius;
    auto sample_point = [&](const Rect& region) -> Vec2 {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            Vec2 p{rng.uniform(region.lo.x, region.hi.x),
                   rng.uniform(region.lo.y, region.hi.y)};
            if (point_free(world, p.x, p.y, inflation)) return p;
        }
        throw GenerationError("fixed_setup: no collision-free placement after 1000 attempts");
    };
    FixedEpisodeSetup setup;
    setup.start = sample_point(world.start_region);
    setup.goal = sample_point(world.goal_region);
    const Vec2 rel = setup.goal - setup.start;
    setup.heading = std::atan2(rel.y, rel.x);
    return setup;
}

WorldStats compute_stats(std::string name, const std::vector<double>& success_times,
                         std::size_t runs) {
    WorldStats s;
    s.name = std::move(name);
    s.runs = runs;
    s.successes = success_times.size();
    s.sr = runs ? static_cast<double>(s.successes) / static_cast<double>(runs) : 0.0;
    if (!success_times.empty()) {
        s.has_set = true;
        double sum = 0.0;
        for (double t : success_times) sum += t;
        s.mean_success_time = sum / static_cast<double>(success_times.size());
        s.set_seconds = s.mean_success_time / s.sr;
        if (success_times.size() >= 2) {
            double sq = 0.0;
            for (double t : success_times) {
                sq += (t - s.mean_success_time) * (t - s.mean_success_time);
            }
            const double n = static_cast<double>(success_times.size());
            const double sd = std::sqrt(sq / (n - 1.0));
            s.ci_half_width = student_t_quantile(0.975, n - 1.0) * sd / std::sqrt(n);
        }
    }
    return s;
}

EvalReport evaluate(Policy& policy, const std::vector<WorldModel>& worlds,
                    std::size_t runs_per_world, std::uint64_t seed,
                    const EnvConfig& env_config, const RewardConfig& reward_config,
                    const LidarConfig& lidar_config) {
    if (worlds.empty()) throw ConfigError("evaluate: no worlds given");
    if (runs_per_world == 0) throw ConfigError("evaluate: runs_per_world must be positive");

    EvalReport report;
    std::vector<double> all_success_times;

    for (std::size_t wi = 0; wi < worlds.size(); ++wi) {
        const WorldModel& world = worlds[wi];
        const FixedEpisodeSetup setup = fixed_setup(world, env_config);
        std::vector<double> success_times;

        for (std::size_t run = 0; run < runs_per_world; ++run) {
            // Per-run stream: drives observation noise and dynamic obstacles.
            Rng rng(mix_seed(mix_seed(seed, wi), run));
            ExploreEnv env(world, env_config, reward_config, lidar_config);
            RobotState obs = env.reset_to(setup.start, setup.heading, setup.goal, rng);
            policy.reset();

            Trajectory traj;
            const bool keep_traj = (run == 0);
            if (keep_traj) {
                traj.world = world;
                traj.start = setup.start;
                traj.goal = setup.goal;
            }

            EpisodeRecord rec;
            rec.world_index = wi;
            rec.run = run;
            while (true) {
                const Action action = policy.act(obs);
                const StepResult sr = env.step(action, rng);
                obs = sr.observation;
                ++rec.steps;
                if (keep_traj) {
                    const EpisodeState& ep = env.episode();
                    traj.points.push_back({static_cast<int>(rec.steps), ep.position.x,
                                           ep.position.y, ep.heading, ep.v_r, ep.omega_r,
                                           sr.reward, sr.cause});
                }
                if (sr.done) {
                    rec.cause = sr.cause;
                    break;
                }
            }
            rec.time_s = static_cast<double>(rec.steps) * env_config.dt;
            rec.success = rec.cause == TerminationCause::Goal;
            if (rec.success) {
                success_times.push_back(rec.time_s);
                all_success_times.push_back(rec.time_s);
            }
            report.episodes.push_back(rec);
            if (keep_traj) report.sample_trajectories.push_back(std::move(traj));
        }
        report.worlds.push_back(
            compute_stats("world" + std::to_string(wi), success_times, runs_per_world));
    }
    report.overall =
        compute_stats("overall", all_success_times, runs_per_world * worlds.size());
    return report;
}

// ---------------------------------------------------------------------------
// Student-t quantile via the regularized incomplete beta function.

namespace {

// Continued-fraction evaluation (Lentz) of I_x(a, b).
double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const bool swap = x > (a + 1.0) / (a + b + 2.0);
    if (swap) return 1.0 - incomplete_beta(b, a, 1.0 - x);

    const double tiny = 1e-300;
    double c = 1.0, d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double f = d;
    for (int m = 1; m <= 300; ++m) {
        const double dm = static_cast<double>(m);
        double num = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        f *= d * c;
        num = -(a + dm) * (a + b + dm) * x / ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-14) break;
    }
    return std::exp(ln_front) * f / a;
}

double student_t_cdf(double t, double dof) {
    if (t == 0.0) return 0.5;
    const double x = dof / (dof + t * t);
    const double tail = 0.5 * incomplete_beta(dof / 2.0, 0.5, x);
    return t > 0.0 ? 1.0 - tail : tail;
}

}  // namespace

double student_t_quantile(double p, double dof) {
    if (!(p > 0.0 && p < 1.0)) throw NumericError("t quantile: p must lie in (0, 1)");
    if (dof <= 0.0) throw NumericError("t quantile: dof must be positive");
    double lo = -1000.0, hi = 1000.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, dof) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Serialization

std::string report_to_csv(const EvalReport& report) {
    std::ostringstream os;
    os << "world,runs,successes,sr,mean_success_time_s,set_s,ci95_halfwidth_s\n";
    auto row = [&](const WorldStats& s) {
        os << s.name << ',' << s.runs << ',' << s.successes << ','
           << format_double(s.sr) << ',';
        if (s.has_set) {
            os << format_double(s.mean_success_time) << ',' << format_double(s.set_seconds)
               << ',' << format_double(s.ci_half_width);
        } else {
            os << ",,";
        }
        os << '\n';
    };
    for (const auto& w : report.worlds) row(w);
    row(report.overall);
    return os.str();
}

std::string report_to_table(const EvalReport& report) {
    std::ostringstream os;
    char line[160];
    os << "world      runs  successes      SR        SET (s)\n";
    auto row = [&](const WorldStats& s) {
        if (s.has_set) {
            std::snprintf(line, sizeof(line), "%-10s %5zu %10zu  %6.3f  %8.2f +/- %.2f\n",
                          s.name.c_str(), s.runs, s.successes, s.sr, s.set_seconds,
                          s.ci_half_width);
        } else {
            std::snprintf(line, sizeof(line), "%-10s %5zu %10zu  %6.3f         --\n",
                          s.name.c_str(), s.runs, s.successes, s.sr);
        }
        os << line;
    };
    for (const auto& w : report.worlds) row(w);
    row(report.overall);
    return os.str();
}

std::string trajectory_to_csv(const Trajectory& trajectory) {
    std::ostringstream os;
    os << "step,x,y,heading,v_r,omega_r,reward,cause\n";
    for (const auto& p : trajectory.points) {
        os << p.step << ',' << format_double(p.x) << ',' << format_double(p.y) << ','
           << format_double(p.heading) << ',' << format_double(p.v) << ','
           << format_double(p.omega) << ',' << format_double(p.reward) << ','
           << cause_name(p.cause) << '\n';
    }
    return os.str();
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

double report_double(const std::string& s, std::size_t line_no, const char* name) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line_no) + ": bad " + name +
                          " value '" + s + "'");
    }
}

std::size_t report_count(const std::string& s, std::size_t line_no, const char* name) {
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line_no) + ": bad " + name +
                          " value '" + s + "'");
    }
}

}  // namespace

EvalReport report_from_csv(const std::string& text) {
    EvalReport rep;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    bool saw_overall = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!saw_header) {
            if (line != "world,runs,successes,sr,mean_success_time_s,set_s,ci95_halfwidth_s") {
                throw ConfigError("line " + std::to_string(line_no) +
                                  ": not an eval report (unexpected header)");
            }
            saw_header = true;
            continue;
        }
        const auto f = split_fields(line);
        if (f.size() != 7) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 7 fields, got " +
                              std::to_string(f.size()));
        }
        WorldStats s;
        s.name = f[0];
        s.runs = report_count(f[1], line_no, "runs");
        s.successes = report_count(f[2], line_no, "successes");
        s.sr = report_double(f[3], line_no, "sr");
        if (f[4].empty() && f[5].empty() && f[6].empty()) {
            s.has_set = false;
        } else {
            s.has_set = true;
            s.mean_success_time = report_double(f[4], line_no, "mean_success_time_s");
            s.set_seconds = report_double(f[5], line_no, "set_s");
            s.ci_half_width = report_double(f[6], line_no, "ci95_halfwidth_s");
        }
        if (s.name == "overall") {
            rep.overall = s;
            saw_overall = true;
        } else {
            rep.worlds.push_back(s);
        }
    }
    if (!saw_header) throw ConfigError("line 1: eval report is empty");
    if (rep.worlds.empty()) {
        throw ConfigError("line " + std::to_string(line_no) + ": eval report has no world rows");
    }
    if (!saw_overall) {
        throw ConfigError("line " + std::to_string(line_no) + ": eval report has no overall row");
    }
    return rep;
}

}  // namespace ctsac::eval
