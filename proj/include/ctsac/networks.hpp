#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ctsac/rng.hpp"
#include "ctsac/tensor.hpp"

namespace ctsac::nets {

using grad::ParamStore;
using grad::Tensor;

struct NetworkConfig {
    std::size_t embed_dim = 1024;
    std::size_t encoder_blocks = 2;
    std::size_t decoder_blocks = 2;
    // 0 means "encoder_blocks + decoder_blocks"; any other value overrides the
    // stack depth (the blocks are identical self-attention blocks).
    std::size_t blocks_override = 0;
    std::size_t heads = 8;
    std::size_t seq_len = 8;    // T
    std::size_t state_dim = 36; // D_s = lidar segments + 4
    std::size_t action_dim = 2; // D_a
    std::size_t ffn_mult = 4;
    double dropout = 0.1;
    double weight_decay = 1e-4;  // decoupled, applied to block weights only
    double log_sigma_min = -20.0;
    double log_sigma_max = 2.0;
    bool positional_encoding = false;

    std::size_t depth() const {
        return blocks_override ? blocks_override : encoder_blocks + decoder_blocks;
    }
    void validate() const;
};

// Pre-norm self-attention blocks with a feed-forward sublayer, followed by a
// final layer norm. Owns no embedding or output head.
class TransformerCore {
public:
    TransformerCore(const NetworkConfig& config, const std::string& prefix,
                    ParamStore& store, Rng& init_rng);
    // (B, T, E) -> (B, T, E)
    Tensor forward(const Tensor& x, bool train, Rng& rng) const;

private:
    struct Block {
        Tensor ln1_g, ln1_b;
        Tensor wq, bq, wk, bk, wv, bv, wo, bo;
        Tensor ln2_g, ln2_b;
        Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    };
    const NetworkConfig& config_;
    std::vector<Block> blocks_;
    Tensor ln_f_g, ln_f_b;
};

struct PolicyHeadOutput {
    Tensor mu;         // (rows, D_a)
    Tensor log_sigma;  // (rows, D_a), already clamped
};

// Shared-parameter actor: the summary path emits one Gaussian per batch row
// for action selection; the per-step path emits one Gaussian per sequence
// position for training. Both run the same embedding, transformer stack, and
// output heads.
class ActorNet {
public:
    ActorNet(const NetworkConfig& config, ParamStore& store, Rng& init_rng);

    // states: (B, T, D_s) -> (B, D_a) Gaussians for the last position.
    PolicyHeadOutput select_forward(const Tensor& states, bool train, Rng& rng) const;
    // states: (B, T, D_s) -> (B*T, D_a) Gaussians, one per position.
    PolicyHeadOutput improve_forward(const Tensor& states, bool train, Rng& rng) const;

private:
    const NetworkConfig& config_;
    Tensor embed_w, embed_b;
    TransformerCore core_;
    Tensor head_mu_w, head_mu_b;
    Tensor head_ls_w, head_ls_b;
};

// Scalar-output network over (B, T, input_dim) sequences; V uses
// input_dim = D_s, each Q uses input_dim = D_s + D_a. `summary_forward`
// reduces the sequence to one value per row; `sequence_forward` scores each
// position. One parameter set serves both paths.
class CriticNet {
public:
    CriticNet(const NetworkConfig& config, std::size_t input_dim,
              const std::string& prefix, ParamStore& store, Rng& init_rng);

    Tensor summary_forward(const Tensor& x, bool train, Rng& rng) const;  // (B, 1)
    Tensor sequence_forward(const Tensor& x, bool train, Rng& rng) const; // (B*T, 1)

    std::size_t input_dim() const { return input_dim_; }

private:
    const NetworkConfig& config_;
    std::size_t input_dim_;
    Tensor embed_w, embed_b;
    TransformerCore core_;
    Tensor head_w, head_b;
};

struct SampledAction {
    Tensor action;    // (rows, 2): forward speed in [0,1], yaw rate in [-1,1]
    Tensor log_prob;  // (rows, 1)
};

// Reparameterized sample squashed through tanh and mapped into the action
// box, with the matching log-density correction.
SampledAction sample_squashed(const PolicyHeadOutput& head, Rng& rng);
// Squashed mean action (no sampling), for deterministic evaluation.
Tensor deterministic_action(const Tensor& mu);

// Scales raw state features into network units: lidar distances by
// 1/max_range, the goal distance by 1/10, the goal bearing by 1/pi. Values
// are laid out row-major as (B, T, D_s).
std::vector<double> normalize_states(const std::vector<double>& raw,
                                     std::size_t state_dim, double max_range);

// target <- tau * online + (1 - tau) * target, entrywise over matching stores.
void soft_update(ParamStore& target, const ParamStore& online, double tau);
void copy_params(ParamStore& target, const ParamStore& online);

}  // namespace ctsac::nets
