#include "ctsac/env.hpp"

#include <algorithm>
#include <cmath>

namespace ctsac {

std::vector<double> RobotState::features() const {
    std::vector<double> f;
    f.reserve(lidar.size() + 4);
    f.insert(f.end(), lidar.begin(), lidar.end());
    f.push_back(v_r);
    f.push_back(omega_r);
    f.push_back(d_t);
    f.push_back(theta_t);
    return f;
}

void RewardConfig::validate() const {
    for (double w : {lambda1, lambda2, lambda3, lambda4, lambda5, lambda6, lambda7})
        if (w < 0.0) throw ConfigError("reward weights must be nonnegative");
    if (delta <= 0.0) throw ConfigError("reward.delta must be positive");
    if (goal_radius <= 0.0) throw ConfigError("reward.goal_radius must be positive");
    if (collision_distance < 0.0) throw ConfigError("reward.collision_distance must be >= 0");
}

void EnvConfig::validate() const {
    if (dt <= 0.0) throw ConfigError("env.dt must be positive");
    if (tau_v < 0.0) throw ConfigError("env.tau_v must be >= 0");
    if (max_steps < 1) throw ConfigError("env.max_steps must be >= 1");
    if (robot_radius <= 0.0) throw ConfigError("env.robot_radius must be positive");
}

const char* cause_name(TerminationCause cause) {
    switch (cause) {
        case TerminationCause::Running: return "running";
        case TerminationCause::Goal: return "goal";
        case TerminationCause::Collision: return "collision";
        default: return "step_cap";
    }
}

RewardTerms reward_terms(double omega_r, double d_t, double min_ld, const Vec2& position,
                         const std::vector<Vec2>& history, const RewardConfig& config) {
    RewardTerms t;
    t.r1 = std::abs(omega_r) > 0.5 ? 1.0 : 0.0;
    if (config.goal_reward_mode == GoalRewardMode::AsPrinted)
        t.r2 = d_t < 10.0 ? d_t / 10.0 : 1.0;
    else
        t.r2 = d_t < 10.0 ? 1.0 - d_t / 10.0 : 0.0;
    t.r3 = min_ld < 1.0 ? 1.0 - min_ld : 0.0;
    int count = 0;
    for (const auto& h : history) {
        double manhattan = std::abs(position.x - h.x) + std::abs(position.y - h.y);
        if (manhattan < config.delta) ++count;
    }
    t.rp = static_cast<double>(count);
    t.total = -config.lambda3 * t.r1 + config.lambda4 * t.r2 - config.lambda5 * t.r3 -
              config.lambda6 * t.rp - config.lambda7;
    return t;
}

ExploreEnv::ExploreEnv(WorldModel world, EnvConfig env_cfg, RewardConfig reward_cfg,
                       LidarConfig lidar_cfg)
    : world_(std::move(world)),
      env_cfg_(env_cfg),
      reward_cfg_(reward_cfg),
      lidar_cfg_(lidar_cfg) {
    env_cfg_.validate();
    reward_cfg_.validate();
    lidar_cfg_.validate();
}

RobotState ExploreEnv::observe(Rng& rng) {
    RobotState s;
    s.lidar = scan(world_, episode_.position, episode_.heading, lidar_cfg_, rng);
    s.v_r = episode_.v_r;
    s.omega_r = episode_.omega_r;
    Vec2 rel = goal_ - episode_.position;
    s.d_t = rel.norm();
    s.theta_t = wrap_angle(std::atan2(rel.y, rel.x) - episode_.heading);
    return s;
}

RobotState ExploreEnv::reset(Rng& rng) {
    const double inflation = env_cfg_.robot_radius;
    auto sample_point = [&](const Rect& region) -> Vec2 {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            Vec2 p{rng.uniform(region.lo.x, region.hi.x), rng.uniform(region.lo.y, region.hi.y)};
            if (point_free(world_, p.x, p.y, inflation)) return p;
        }
        throw GenerationError("reset: no collision-free placement after 1000 attempts");
    };
    Vec2 start = sample_point(world_.start_region);
    Vec2 goal = sample_point(world_.goal_region);
    double heading = wrap_angle(rng.uniform(-kPi, kPi));
    return reset_to(start, heading, goal, rng);
}

RobotState ExploreEnv::reset_to(const Vec2& start, double heading, const Vec2& goal, Rng& rng) {
    episode_ = EpisodeState{};
    episode_.position = start;
    episode_.heading = wrap_angle(heading);
    goal_ = goal;
    ready_ = true;
    return observe(rng);
}

StepResult ExploreEnv::step(const Action& action, Rng& rng) {
    if (!ready_) throw std::logic_error("step before reset");
    if (episode_.terminated()) throw std::logic_error("step on terminated episode");

    const double dt = env_cfg_.dt;
    const double v_c = std::clamp(action.v_c, 0.0, 1.0);
    const double omega_c = std::clamp(action.omega_c, -1.0, 1.0);

    // First-order tracking toward the command; tau_v = 0 is ideal tracking.
    double blend = env_cfg_.tau_v <= 0.0 ? 1.0 : std::min(1.0, dt / env_cfg_.tau_v);
    episode_.v_r += blend * (v_c - episode_.v_r);
    episode_.omega_r += blend * (omega_c - episode_.omega_r);

    episode_.position.x += episode_.v_r * std::cos(episode_.heading) * dt;
    episode_.position.y += episode_.v_r * std::sin(episode_.heading) * dt;
    episode_.heading = wrap_angle(episode_.heading + episode_.omega_r * dt);

    world_ = advance_dynamics(world_, dt);

    std::vector<double> raw = raw_ray_distances(world_, episode_.position, episode_.heading,
                                                lidar_cfg_);
    double min_raw = raw.empty() ? lidar_cfg_.max_range
                                 : *std::min_element(raw.begin(), raw.end());

    StepResult res;
    double d_t = (goal_ - episode_.position).norm();
    bool hit_goal = d_t < reward_cfg_.goal_radius;
    bool collided = min_raw < reward_cfg_.collision_distance ||
                    !point_free(world_, episode_.position.x, episode_.position.y,
                                env_cfg_.robot_radius);

    episode_.step_count += 1;
    if (hit_goal) { // goal takes precedence over collision, then step cap
        episode_.cause = TerminationCause::Goal;
        res.reward = reward_cfg_.lambda1;
    } else if (collided) {
        episode_.cause = TerminationCause::Collision;
        res.reward = -reward_cfg_.lambda2;
    } else {
        res.terms = reward_terms(episode_.omega_r, d_t, min_distance_from_raw(raw),
                                 episode_.position, episode_.position_history, reward_cfg_);
        res.reward = res.terms.total;
        if (episode_.step_count >= env_cfg_.max_steps)
            episode_.cause = TerminationCause::StepCap;
    }
    episode_.position_history.push_back(episode_.position);

    res.observation = observe(rng);
    res.cause = episode_.cause;
    res.done = episode_.terminated();
    return res;
}

double ExploreEnv::min_distance_from_raw(const std::vector<double>& raw) const {
    // The proximity term consumes the clustered minimum; with min-pooling
    // that equals the raw per-ray minimum clipped to max_range.
    double m = lidar_cfg_.max_range;
    for (double v : raw) m = std::min(m, v);
    return m;
}

}  // namespace ctsac
