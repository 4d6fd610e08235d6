#pragma once

#include <vector>

#include "ctsac/lidar.hpp"
#include "ctsac/world.hpp"

namespace ctsac {

// Observation fed to the policy: clustered lidar plus own velocities and the
// goal in polar form relative to the heading.
struct RobotState {
    std::vector<double> lidar; // d clustered distances, m
    double v_r = 0.0;          // m/s, in [0, 1]
    double omega_r = 0.0;      // rad/s, in [-1, 1]
    double d_t = 0.0;          // goal distance, m
    double theta_t = 0.0;      // goal bearing, wrapped to (-pi, pi]

    int dim() const { return static_cast<int>(lidar.size()) + 4; }
    std::vector<double> features() const;
};

struct Action {
    double v_c = 0.0;     // commanded linear velocity
    double omega_c = 0.0; // commanded angular velocity
};

enum class GoalRewardMode { AsPrinted, Inverted };

struct RewardConfig {
    double lambda1 = 100.0; // goal
    double lambda2 = 100.0; // collision
    double lambda3 = 0.5;   // turning penalty weight
    double lambda4 = 1.0;   // goal proximity weight
    double lambda5 = 1.0;   // obstacle proximity weight
    double lambda6 = 0.05;  // wandering penalty weight
    double lambda7 = 0.1;   // step penalty
    double delta = 0.5;         // wandering Manhattan threshold, m
    double goal_radius = 0.5;   // m
    double collision_distance = 0.2; // min raw ray distance treated as contact
    GoalRewardMode goal_reward_mode = GoalRewardMode::AsPrinted;

    void validate() const;
};

struct RewardTerms {
    double r1 = 0.0; // turning indicator
    double r2 = 0.0; // goal proximity
    double r3 = 0.0; // obstacle proximity
    double rp = 0.0; // wandering count
    double total = 0.0;
};

// Shaping-branch terms. `history` holds prior step positions; the current
// position is not part of it.
RewardTerms reward_terms(double omega_r, double d_t, double min_ld, const Vec2& position,
                         const std::vector<Vec2>& history, const RewardConfig& config);

enum class TerminationCause { Running, Goal, Collision, StepCap };

const char* cause_name(TerminationCause cause);

struct EpisodeState {
    Vec2 position;
    double heading = 0.0;
    double v_r = 0.0;
    double omega_r = 0.0;
    int step_count = 0;
    std::vector<Vec2> position_history;
    TerminationCause cause = TerminationCause::Running;

    bool terminated() const { return cause != TerminationCause::Running; }
};

struct EnvConfig {
    double dt = 0.1;          // s per control step
    double tau_v = 0.1;       // first-order velocity tracking constant; 0 = ideal
    int max_steps = 1000;
    double robot_radius = 0.2;

    void validate() const;
};

struct StepResult {
    RobotState observation;
    double reward = 0.0;
    RewardTerms terms;
    TerminationCause cause = TerminationCause::Running;
    bool done = false;
};

// Single-episode environment; owns its mutable EpisodeState and a private
// copy of the world (dynamic obstacles advance per step).
class ExploreEnv {
public:
    ExploreEnv(WorldModel world, EnvConfig env_cfg, RewardConfig reward_cfg, LidarConfig lidar_cfg);

    // Samples collision-free start pose and goal from the regions; clears
    // history. Throws GenerationError if rejection sampling exhausts.
    RobotState reset(Rng& rng);

    // Throws std::logic_error when called on a terminated episode.
    StepResult step(const Action& action, Rng& rng);

    const EpisodeState& episode() const { return episode_; }
    const WorldModel& world() const { return world_; }
    const Vec2& goal() const { return goal_; }
    const EnvConfig& env_config() const { return env_cfg_; }
    const RewardConfig& reward_config() const { return reward_cfg_; }
    const LidarConfig& lidar_config() const { return lidar_cfg_; }

    // Places the episode at an explicit pose/goal (evaluation uses fixed
    // start/goal pairs shared across policies).
    RobotState reset_to(const Vec2& start, double heading, const Vec2& goal, Rng& rng);

private:
    RobotState observe(Rng& rng);
    double min_distance_from_raw(const std::vector<double>& raw) const;

    WorldModel world_;
    EnvConfig env_cfg_;
    RewardConfig reward_cfg_;
    LidarConfig lidar_cfg_;
    EpisodeState episode_;
    Vec2 goal_;
    bool ready_ = false;
};

}  // namespace ctsac
