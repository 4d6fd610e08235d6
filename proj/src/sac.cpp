#include "ctsac/sac.hpp"

#include <cmath>

#include "ctsac/common.hpp"

namespace ctsac::sac {

using grad::Tensor;

void SacConfig::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw ConfigError("sac.gamma must lie in (0, 1), got " + std::to_string(gamma));
    }
    if (!(tau_soft > 0.0 && tau_soft <= 1.0)) {
        throw ConfigError("sac.tau_soft must lie in (0, 1], got " + std::to_string(tau_soft));
    }
    if (buffer_capacity == 0) throw ConfigError("sac.buffer_capacity must be positive");
    if (batch_size == 0) throw ConfigError("sac.batch_size must be positive");
    if (learning_rate <= 0.0) throw ConfigError("sac.learning_rate must be positive");
    if (update_every == 0) throw ConfigError("sac.update_every must be positive");
    if (alpha0 <= 0.0) throw ConfigError("sac.alpha0 must be positive");
    if (tau_alpha < 0.0) throw ConfigError("sac.tau_alpha must be nonnegative");
    if (seq_len == 0) throw ConfigError("sac.seq_len must be positive");
}

double alpha_schedule(const SacConfig& config, std::size_t n_e) {
    return config.alpha0 / (1.0 + config.tau_alpha * static_cast<double>(n_e));
}

SacEngine::SacEngine(const nets::NetworkConfig& net_config, const SacConfig& config,
                     double lidar_max_range, Rng& init_rng)
    : net_config_(net_config),
      config_(config),
      lidar_max_range_(lidar_max_range),
      buffer_(config.buffer_capacity) {
    config_.validate();
    net_config_.seq_len = config_.seq_len;
    net_config_.validate();

    actor_ = std::make_unique<nets::ActorNet>(net_config_, actor_params_, init_rng);
    v_ = std::make_unique<nets::CriticNet>(net_config_, net_config_.state_dim, "v.",
                                           v_params_, init_rng);
    v_target_ = std::make_unique<nets::CriticNet>(net_config_, net_config_.state_dim,
                                                  "v_target.", v_target_params_, init_rng);
    q1_ = std::make_unique<nets::CriticNet>(
        net_config_, net_config_.state_dim + net_config_.action_dim, "q1.", q1_params_,
        init_rng);
    q2_ = std::make_unique<nets::CriticNet>(
        net_config_, net_config_.state_dim + net_config_.action_dim, "q2.", q2_params_,
        init_rng);
    nets::copy_params(v_target_params_, v_params_);

    grad::AdamConfig opt;
    opt.learning_rate = config_.learning_rate;
    opt.weight_decay = net_config_.weight_decay;
    actor_opt_ = std::make_unique<grad::Adam>(actor_params_, opt);
    v_opt_ = std::make_unique<grad::Adam>(v_params_, opt);
    q1_opt_ = std::make_unique<grad::Adam>(q1_params_, opt);
    q2_opt_ = std::make_unique<grad::Adam>(q2_params_, opt);
}

Tensor SacEngine::window_tensor(const std::vector<std::vector<double>>& recent) const {
    if (recent.empty()) throw std::logic_error("act: empty state history");
    const std::size_t t = net_config_.seq_len;
    const std::size_t d = net_config_.state_dim;
    std::vector<double> raw(t * d);
    for (std::size_t j = 0; j < t; ++j) {
        // Newest entries align with the window's end; missing history repeats
        // the oldest available state.
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(recent.size()) -
                                   static_cast<std::ptrdiff_t>(t - j);
        const auto& row = recent[src < 0 ? 0 : static_cast<std::size_t>(src)];
        if (row.size() != d) {
            throw ShapeError("act: state row has " + std::to_string(row.size()) +
                             " features, expected " + std::to_string(d));
        }
        std::copy(row.begin(), row.end(), raw.begin() + j * d);
    }
    return Tensor::from_values(
        {1, t, d}, nets::normalize_states(raw, d, lidar_max_range_));
}

Action SacEngine::act(const std::vector<std::vector<double>>& recent_states,
                      bool stochastic, Rng& rng) {
    grad::NoGrad frozen;
    Tensor window = window_tensor(recent_states);
    nets::PolicyHeadOutput head = actor_->select_forward(window, false, rng);
    Tensor action = stochastic ? nets::sample_squashed(head, rng).action
                               : nets::deterministic_action(head.mu);
    return Action{action.values()[0], action.values()[1]};
}

std::pair<double, double> SacEngine::q_values(const std::vector<double>& state,
                                              const Action& action) {
    grad::NoGrad frozen;
    Tensor window = window_tensor({state});
    const std::size_t t = net_config_.seq_len;
    const std::size_t d = net_config_.state_dim;
    std::vector<double> sa(t * (d + 2));
    for (std::size_t j = 0; j < t; ++j) {
        std::copy_n(window.values().begin() + j * d, d, sa.begin() + j * (d + 2));
        sa[j * (d + 2) + d] = action.v_c;
        sa[j * (d + 2) + d + 1] = action.omega_c;
    }
    Tensor x = Tensor::from_values({1, t, d + 2}, std::move(sa));
    Rng unused(0);
    const double q1v = q1_->sequence_forward(x, false, unused).values()[t - 1];
    const double q2v = q2_->sequence_forward(x, false, unused).values()[t - 1];
    return {q1v, q2v};
}

std::optional<LossReport> SacEngine::update(std::size_t n_e, Rng& rng) {
    if (!buffer_.ready()) return std::nullopt;
    const SequenceBatch batch = buffer_.sample(config_.batch_size, config_.seq_len, rng);
    const std::size_t b = batch.batch, t = batch.seq_len, d = batch.state_dim;
    const std::size_t rows = b * t;
    const double alpha = alpha_schedule(config_, n_e);

    const std::vector<double> ns =
        nets::normalize_states(batch.states, d, lidar_max_range_);
    const std::vector<double> nns =
        nets::normalize_states(batch.next_states, d, lidar_max_range_);

    Tensor states = Tensor::from_values({b, t, d}, ns);
    Tensor next_states = Tensor::from_values({b, t, d}, nns);
    // State-action input for the stored actions.
    std::vector<double> sa(rows * (d + 2));
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(ns.begin() + r * d, d, sa.begin() + r * (d + 2));
        sa[r * (d + 2) + d] = batch.actions[r * 2];
        sa[r * (d + 2) + d + 1] = batch.actions[r * 2 + 1];
    }
    Tensor stored_sa = Tensor::from_values({b, t, d + 2}, std::move(sa));

    double mask_total = 0.0;
    for (double m : batch.mask) mask_total += m;
    if (mask_total <= 0.0) throw NumericError("sampled batch is fully padded");
    const double inv_count = 1.0 / mask_total;
    Tensor mask = Tensor::from_values({rows, 1}, batch.mask);

    // Q targets from the frozen value network.
    std::vector<double> targets(rows);
    {
        grad::NoGrad frozen;
        Tensor vt = v_target_->sequence_forward(next_states, false, rng);
        for (std::size_t r = 0; r < rows; ++r) {
            targets[r] = batch.rewards[r] +
                         config_.gamma * (1.0 - batch.dones[r]) * vt.values()[r];
        }
    }
    Tensor y = Tensor::from_values({rows, 1}, std::move(targets));

    auto masked_mse = [&](const Tensor& pred, const Tensor& target) {
        return grad::scale(
            grad::sum_all(grad::mul(grad::square(grad::sub(pred, target)), mask)),
            inv_count);
    };
    auto check_finite = [](double value, const char* term) {
        if (!std::isfinite(value)) {
            throw NumericError(std::string(term) + " loss is not finite");
        }
    };

    LossReport report;
    report.alpha = alpha;

    Tensor loss_q1 = masked_mse(q1_->sequence_forward(stored_sa, true, rng), y);
    report.q1 = loss_q1.item();
    check_finite(report.q1, "q1");
    q1_params_.zero_grad();
    grad::backward(loss_q1);
    q1_opt_->step();

    Tensor loss_q2 = masked_mse(q2_->sequence_forward(stored_sa, true, rng), y);
    report.q2 = loss_q2.item();
    check_finite(report.q2, "q2");
    q2_params_.zero_grad();
    grad::backward(loss_q2);
    q2_opt_->step();

    // Fresh per-position actions for the value and policy losses.
    nets::PolicyHeadOutput head = actor_->improve_forward(states, true, rng);
    nets::SampledAction sampled = nets::sample_squashed(head, rng);
    Tensor fresh_sa = grad::reshape(
        grad::concat_last(grad::reshape(states, {rows, d}), sampled.action),
        {b, t, d + 2});
    Tensor qmin = grad::minimum(q1_->sequence_forward(fresh_sa, true, rng),
                                q2_->sequence_forward(fresh_sa, true, rng));

    Tensor v_target_value =
        grad::stop_grad(grad::sub(qmin, grad::scale(sampled.log_prob, alpha)));
    Tensor loss_v = masked_mse(v_->sequence_forward(states, true, rng), v_target_value);
    report.v = loss_v.item();
    check_finite(report.v, "v");
    v_params_.zero_grad();
    grad::backward(loss_v);
    v_opt_->step();

    Tensor loss_actor = grad::scale(
        grad::sum_all(
            grad::mul(grad::sub(grad::scale(sampled.log_prob, alpha), qmin), mask)),
        inv_count);
    report.actor = loss_actor.item();
    check_finite(report.actor, "actor");
    actor_params_.zero_grad();
    grad::backward(loss_actor);
    actor_opt_->step();

    nets::soft_update(v_target_params_, v_params_, config_.tau_soft);
    return report;
}

std::vector<SacEngine::NamedStore> SacEngine::stores() {
    return {
        {"actor", &actor_params_, actor_opt_.get()},
        {"v", &v_params_, v_opt_.get()},
        {"v_target", &v_target_params_, nullptr},
        {"q1", &q1_params_, q1_opt_.get()},
        {"q2", &q2_params_, q2_opt_.get()},
    };
}

}  // namespace ctsac::sac
