#pragma once

#include <array>
#include <string>
#include <vector>

#include "ctsac/env.hpp"
#include "ctsac/sac.hpp"
#include "ctsac/world.hpp"

namespace ctsac::eval {

// Anything that can drive the environment from observations.
class Policy {
public:
    virtual ~Policy() = default;
    virtual void reset() {}
    virtual Action act(const RobotState& observation) = 0;
};

// Scripted baseline: steer toward the goal bearing, slow down while turning.
class StraightLinePolicy : public Policy {
public:
    Action act(const RobotState& observation) override;
};

// Deterministic (mean-action) wrapper over a trained engine; keeps the
// sequence window between calls.
class SacPolicy : public Policy {
public:
    explicit SacPolicy(sac::SacEngine& engine);
    void reset() override;
    Action act(const RobotState& observation) override;

private:
    sac::SacEngine& engine_;
    std::vector<std::vector<double>> history_;
    Rng rng_;  // consumed only by non-sampling code paths
};

struct TrajectoryPoint {
    int step = 0;
    double x = 0.0, y = 0.0, heading = 0.0;
    double v = 0.0, omega = 0.0;
    double reward = 0.0;
    TerminationCause cause = TerminationCause::Running;
};

struct Trajectory {
    WorldModel world;
    Vec2 start{}, goal{};
    std::vector<TrajectoryPoint> points;
};

struct EpisodeRecord {
    std::size_t world_index = 0;
    std::size_t run = 0;
    std::size_t steps = 0;
    double time_s = 0.0;
    TerminationCause cause = TerminationCause::Running;
    bool success = false;
};

struct WorldStats {
    std::string name;
    std::size_t runs = 0;
    std::size_t successes = 0;
    double sr = 0.0;
    bool has_set = false;             // requires at least one success
    double mean_success_time = 0.0;   // seconds
    double set_seconds = 0.0;         // mean successful time / SR
    double ci_half_width = 0.0;       // 95% t-interval half-width of the mean
};

struct EvalReport {
    std::vector<WorldStats> worlds;
    WorldStats overall;               // pooled across worlds
    std::vector<EpisodeRecord> episodes;
    std::vector<Trajectory> sample_trajectories;  // first run of each world
};

// Fixed start/goal/heading for a world, derived from its stored seed so every
// policy is tested under the same initial and goal positions.
struct FixedEpisodeSetup {
    Vec2 start{}, goal{};
    double heading = 0.0;
};
FixedEpisodeSetup fixed_setup(const WorldModel& world, const EnvConfig& env_config);

EvalReport evaluate(Policy& policy, const std::vector<WorldModel>& worlds,
                    std::size_t runs_per_world, std::uint64_t seed,
                    const EnvConfig& env_config, const RewardConfig& reward_config,
                    const LidarConfig& lidar_config);

// SR / SET / interval arithmetic for one world (SET = mean successful time
// divided by SR; absent without successes).
WorldStats compute_stats(std::string name, const std::vector<double>& success_times,
                         std::size_t runs);

// Student-t upper quantile, used for the 95% intervals.
double student_t_quantile(double p, double dof);

// Report serialization.
std::string report_to_csv(const EvalReport& report);
std::string report_to_table(const EvalReport& report);
std::string trajectory_to_csv(const Trajectory& trajectory);
// Inverse of report_to_csv (stats only, no episode records); parse errors
// carry 1-based line numbers.
EvalReport report_from_csv(const std::string& text);

}  // namespace ctsac::eval
