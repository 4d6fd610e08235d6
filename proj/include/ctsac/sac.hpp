#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctsac/env.hpp"
#include "ctsac/networks.hpp"
#include "ctsac/replay.hpp"
#include "ctsac/rng.hpp"
#include "ctsac/tensor.hpp"

namespace ctsac::sac {

struct SacConfig {
    double gamma = 0.98;
    std::size_t buffer_capacity = 100000;
    std::size_t batch_size = 256;
    double learning_rate = 5e-4;
    double tau_soft = 0.005;
    std::size_t update_every = 2;
    double alpha0 = 1.0;
    double tau_alpha = 1e-6;
    std::size_t seq_len = 8;
    std::uint64_t seed = 1;
    // Environment steps driven by uniform random actions before the learned
    // policy takes over.
    std::size_t warmup_steps = 1000;

    void validate() const;
};

// Entropy temperature after n_e completed episodes in the current stage.
double alpha_schedule(const SacConfig& config, std::size_t n_e);

struct LossReport {
    double q1 = 0.0;
    double q2 = 0.0;
    double v = 0.0;
    double actor = 0.0;
    double alpha = 0.0;
};

// Actor + double Q + V/V-target training engine over sequence windows.
class SacEngine {
public:
    SacEngine(const nets::NetworkConfig& net_config, const SacConfig& config,
              double lidar_max_range, Rng& init_rng);

    SacEngine(const SacEngine&) = delete;
    SacEngine& operator=(const SacEngine&) = delete;

    ReplayBuffer& buffer() { return buffer_; }
    const SacConfig& config() const { return config_; }
    const nets::NetworkConfig& net_config() const { return net_config_; }

    // Chooses an action from the most recent raw state features (newest
    // last). Shorter histories are front-padded with their first entry.
    Action act(const std::vector<std::vector<double>>& recent_states,
               bool stochastic, Rng& rng);

    // One gradient update on a sampled batch; returns nothing when the buffer
    // has no complete episode yet.
    std::optional<LossReport> update(std::size_t n_e, Rng& rng);

    // (Q1, Q2) estimates for one state-action pair at the last window
    // position; inspection only, no gradients.
    std::pair<double, double> q_values(const std::vector<double>& state, const Action& action);

    // Checkpoint access.
    struct NamedStore {
        std::string name;
        grad::ParamStore* params;
        grad::Adam* opt;  // null for the target network
    };
    std::vector<NamedStore> stores();

private:
    grad::Tensor window_tensor(const std::vector<std::vector<double>>& recent) const;

    nets::NetworkConfig net_config_;
    SacConfig config_;
    double lidar_max_range_;

    grad::ParamStore actor_params_, v_params_, v_target_params_, q1_params_, q2_params_;
    std::unique_ptr<nets::ActorNet> actor_;
    std::unique_ptr<nets::CriticNet> v_, v_target_, q1_, q2_;
    std::unique_ptr<grad::Adam> actor_opt_, v_opt_, q1_opt_, q2_opt_;

    ReplayBuffer buffer_;
};

}  // namespace ctsac::sac
