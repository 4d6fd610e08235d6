#include "ctsac/networks.hpp"

#include <cmath>

#include "ctsac/common.hpp"

namespace ctsac::nets {

using grad::Tensor;

void NetworkConfig::validate() const {
    if (embed_dim == 0 || heads == 0 || embed_dim % heads != 0) {
        throw ConfigError("transformer.heads (" + std::to_string(heads) +
                          ") must divide transformer.embed_dim (" +
                          std::to_string(embed_dim) + ")");
    }
    if (depth() == 0) throw ConfigError("transformer depth must be at least 1");
    if (seq_len == 0) throw ConfigError("sac.seq_len must be at least 1");
    if (state_dim < 5) throw ConfigError("state_dim must be at least 5");
    if (action_dim != 2) throw ConfigError("action_dim must be 2");
    if (ffn_mult == 0) throw ConfigError("transformer.ffn_mult must be at least 1");
    if (dropout < 0.0 || dropout >= 1.0) {
        throw ConfigError("transformer.dropout must lie in [0, 1)");
    }
    if (weight_decay < 0.0) {
        throw ConfigError("net.weight_decay must be non-negative");
    }
    if (log_sigma_min >= log_sigma_max) {
        throw ConfigError("log_sigma bounds must satisfy min < max");
    }
}

namespace {

std::vector<double> fan_in_uniform(std::size_t fan_in, std::size_t count, Rng& rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::vector<double> values(count);
    for (double& v : values) v = rng.uniform(-bound, bound);
    return values;
}

Tensor make_linear_w(ParamStore& store, const std::string& name, std::size_t in,
                     std::size_t out, Rng& rng, bool decay) {
    return store.add(name, Tensor::from_values({in, out}, fan_in_uniform(in, in * out, rng)),
                     decay);
}

Tensor make_linear_b(ParamStore& store, const std::string& name, std::size_t in,
                     std::size_t out, Rng& rng) {
    return store.add(name, Tensor::from_values({out}, fan_in_uniform(in, out, rng)));
}

// Sinusoidal position features, tiled over the batch: (B*T, E) values.
std::vector<double> position_features(std::size_t b, std::size_t t, std::size_t e) {
    std::vector<double> pe(t * e);
    for (std::size_t ti = 0; ti < t; ++ti) {
        for (std::size_t c = 0; c < e; ++c) {
            const double freq = std::pow(10000.0, -static_cast<double>(c / 2 * 2) /
                                                      static_cast<double>(e));
            const double angle = static_cast<double>(ti) * freq;
            pe[ti * e + c] = (c % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    std::vector<double> tiled(b * t * e);
    for (std::size_t bi = 0; bi < b; ++bi) {
        std::copy(pe.begin(), pe.end(), tiled.begin() + bi * t * e);
    }
    return tiled;
}

void check_state_shape(const Tensor& states, std::size_t want_dim, const char* who) {
    if (states.ndim() != 3 || states.dim(2) != want_dim) {
        throw ShapeError(std::string(who) + ": expected (B, T, " +
                         std::to_string(want_dim) + "), got " +
                         grad::shape_str(states.shape()));
    }
}

// Copies the last sequence position of a (B, T, D) constant into a fresh
// (B, D) leaf. Inputs are observation constants, so no graph is needed.
Tensor last_position(const Tensor& x) {
    const std::size_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
    std::vector<double> out(b * d);
    for (std::size_t bi = 0; bi < b; ++bi) {
        std::copy_n(x.values().begin() + ((bi * t + t - 1) * d), d,
                    out.begin() + bi * d);
    }
    return Tensor::from_values({b, d}, std::move(out));
}

}  // namespace

// ---------------------------------------------------------------------------
// TransformerCore

TransformerCore::TransformerCore(const NetworkConfig& config, const std::string& prefix,
                                 ParamStore& store, Rng& init_rng)
    : config_(config) {
    config.validate();
    const std::size_t e = config.embed_dim;
    const std::size_t f = e * config.ffn_mult;
    for (std::size_t i = 0; i < config.depth(); ++i) {
        const std::string p = prefix + "block" + std::to_string(i) + ".";
        Block blk;
        blk.ln1_g = store.add(p + "ln1.g", Tensor::constant({e}, 1.0));
        blk.ln1_b = store.add(p + "ln1.b", Tensor::zeros({e}));
        blk.wq = make_linear_w(store, p + "attn.wq", e, e, init_rng, true);
        blk.bq = make_linear_b(store, p + "attn.bq", e, e, init_rng);
        blk.wk = make_linear_w(store, p + "attn.wk", e, e, init_rng, true);
        blk.bk = make_linear_b(store, p + "attn.bk", e, e, init_rng);
        blk.wv = make_linear_w(store, p + "attn.wv", e, e, init_rng, true);
        blk.bv = make_linear_b(store, p + "attn.bv", e, e, init_rng);
        blk.wo = make_linear_w(store, p + "attn.wo", e, e, init_rng, true);
        blk.bo = make_linear_b(store, p + "attn.bo", e, e, init_rng);
        blk.ln2_g = store.add(p + "ln2.g", Tensor::constant({e}, 1.0));
        blk.ln2_b = store.add(p + "ln2.b", Tensor::zeros({e}));
        blk.ffn_w1 = make_linear_w(store, p + "ffn.w1", e, f, init_rng, true);
        blk.ffn_b1 = make_linear_b(store, p + "ffn.b1", e, f, init_rng);
        blk.ffn_w2 = make_linear_w(store, p + "ffn.w2", f, e, init_rng, true);
        blk.ffn_b2 = make_linear_b(store, p + "ffn.b2", f, e, init_rng);
        blocks_.push_back(std::move(blk));
    }
    ln_f_g = store.add(prefix + "ln_f.g", Tensor::constant({e}, 1.0));
    ln_f_b = store.add(prefix + "ln_f.b", Tensor::zeros({e}));
}

Tensor TransformerCore::forward(const Tensor& x, bool train, Rng& rng) const {
    if (x.ndim() != 3 || x.dim(2) != config_.embed_dim) {
        throw ShapeError("transformer: expected (B, T, " +
                         std::to_string(config_.embed_dim) + "), got " +
                         grad::shape_str(x.shape()));
    }
    const std::size_t b = x.dim(0), t = x.dim(1), e = x.dim(2);
    Tensor h = grad::reshape(x, {b * t, e});
    for (const Block& blk : blocks_) {
        Tensor n1 = grad::layer_norm(h, blk.ln1_g, blk.ln1_b);
        Tensor q = grad::reshape(grad::affine(n1, blk.wq, blk.bq), {b, t, e});
        Tensor k = grad::reshape(grad::affine(n1, blk.wk, blk.bk), {b, t, e});
        Tensor v = grad::reshape(grad::affine(n1, blk.wv, blk.bv), {b, t, e});
        Tensor attn = grad::multi_head_attention(q, k, v, config_.heads);
        Tensor proj = grad::affine(grad::reshape(attn, {b * t, e}), blk.wo, blk.bo);
        proj = grad::dropout(proj, config_.dropout, train, rng);
        h = grad::add(h, proj);

        Tensor n2 = grad::layer_norm(h, blk.ln2_g, blk.ln2_b);
        Tensor f = grad::relu(grad::affine(n2, blk.ffn_w1, blk.ffn_b1));
        f = grad::affine(f, blk.ffn_w2, blk.ffn_b2);
        f = grad::dropout(f, config_.dropout, train, rng);
        h = grad::add(h, f);
    }
    h = grad::layer_norm(h, ln_f_g, ln_f_b);
    return grad::reshape(h, {b, t, e});
}

// ---------------------------------------------------------------------------
// ActorNet

ActorNet::ActorNet(const NetworkConfig& config, ParamStore& store, Rng& init_rng)
    : config_(config),
      embed_w(make_linear_w(store, "actor.embed.w", config.state_dim,
                            config.embed_dim, init_rng, false)),
      embed_b(make_linear_b(store, "actor.embed.b", config.state_dim,
                            config.embed_dim, init_rng)),
      core_(config_, "actor.", store, init_rng) {
    const std::size_t cat_dim = config.embed_dim + config.state_dim;
    head_mu_w = make_linear_w(store, "actor.head_mu.w", cat_dim, config.action_dim,
                              init_rng, false);
    head_mu_b = store.add("actor.head_mu.b", Tensor::zeros({config.action_dim}));
    head_ls_w = make_linear_w(store, "actor.head_ls.w", cat_dim, config.action_dim,
                              init_rng, false);
    head_ls_b = store.add("actor.head_ls.b", Tensor::zeros({config.action_dim}));
    // Near-zero initial actions: shrink the policy heads.
    for (double& v : head_mu_w.values()) v *= 0.01;
    for (double& v : head_ls_w.values()) v *= 0.01;
}

namespace {

Tensor embed_sequence(const Tensor& states, const Tensor& w, const Tensor& b,
                      const NetworkConfig& config) {
    const std::size_t bs = states.dim(0), t = states.dim(1), d = states.dim(2);
    Tensor flat = grad::reshape(states, {bs * t, d});
    Tensor e = grad::affine(flat, w, b);
    if (config.positional_encoding) {
        e = grad::add(e, Tensor::from_values(
                             {bs * t, config.embed_dim},
                             position_features(bs, t, config.embed_dim)));
    }
    return grad::reshape(e, {bs, t, config.embed_dim});
}

}  // namespace

PolicyHeadOutput ActorNet::select_forward(const Tensor& states, bool train,
                                          Rng& rng) const {
    check_state_shape(states, config_.state_dim, "actor_select");
    Tensor z = core_.forward(embed_sequence(states, embed_w, embed_b, config_),
                             train, rng);
    Tensor pooled = grad::mean_axis(z, 1);                      // (B, E)
    Tensor cat = grad::concat_last(pooled, last_position(states));
    Tensor mu = grad::affine(cat, head_mu_w, head_mu_b);
    Tensor ls = grad::clamp(grad::affine(cat, head_ls_w, head_ls_b),
                            config_.log_sigma_min, config_.log_sigma_max);
    return {mu, ls};
}

PolicyHeadOutput ActorNet::improve_forward(const Tensor& states, bool train,
                                           Rng& rng) const {
    check_state_shape(states, config_.state_dim, "actor_improve");
    const std::size_t b = states.dim(0), t = states.dim(1);
    Tensor z = core_.forward(embed_sequence(states, embed_w, embed_b, config_),
                             train, rng);
    Tensor flat_z = grad::reshape(z, {b * t, config_.embed_dim});
    Tensor flat_raw = grad::reshape(states, {b * t, config_.state_dim});
    Tensor cat = grad::concat_last(flat_z, flat_raw);           // (B*T, E + D_s)
    Tensor mu = grad::affine(cat, head_mu_w, head_mu_b);
    Tensor ls = grad::clamp(grad::affine(cat, head_ls_w, head_ls_b),
                            config_.log_sigma_min, config_.log_sigma_max);
    return {mu, ls};
}

// ---------------------------------------------------------------------------
// CriticNet

CriticNet::CriticNet(const NetworkConfig& config, std::size_t input_dim,
                     const std::string& prefix, ParamStore& store, Rng& init_rng)
    : config_(config),
      input_dim_(input_dim),
      embed_w(make_linear_w(store, prefix + "embed.w", input_dim, config.embed_dim,
                            init_rng, false)),
      embed_b(make_linear_b(store, prefix + "embed.b", input_dim, config.embed_dim,
                            init_rng)),
      core_(config_, prefix, store, init_rng) {
    const std::size_t cat_dim = config.embed_dim + input_dim;
    head_w = make_linear_w(store, prefix + "head.w", cat_dim, 1, init_rng, false);
    head_b = make_linear_b(store, prefix + "head.b", cat_dim, 1, init_rng);
}

Tensor CriticNet::summary_forward(const Tensor& x, bool train, Rng& rng) const {
    check_state_shape(x, input_dim_, "critic");
    Tensor z = core_.forward(embed_sequence(x, embed_w, embed_b, config_), train, rng);
    Tensor pooled = grad::mean_axis(z, 1);
    Tensor cat = grad::concat_last(pooled, last_position(x));
    return grad::affine(cat, head_w, head_b);  // (B, 1)
}

Tensor CriticNet::sequence_forward(const Tensor& x, bool train, Rng& rng) const {
    check_state_shape(x, input_dim_, "critic");
    const std::size_t b = x.dim(0), t = x.dim(1);
    Tensor z = core_.forward(embed_sequence(x, embed_w, embed_b, config_), train, rng);
    Tensor flat_z = grad::reshape(z, {b * t, config_.embed_dim});
    Tensor flat_raw = grad::reshape(x, {b * t, input_dim_});
    Tensor cat = grad::concat_last(flat_z, flat_raw);
    return grad::affine(cat, head_w, head_b);  // (B*T, 1)
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

// Maps tanh outputs (rows, 2) into the action box: first column to [0, 1],
// second kept in [-1, 1].
Tensor box_map(const Tensor& y) {
    Tensor a0 = grad::scale(grad::add_scalar(grad::slice_last(y, 0, 1), 1.0), 0.5);
    Tensor a1 = grad::slice_last(y, 1, 2);
    return grad::concat_last(a0, a1);
}

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)

}  // namespace

SampledAction sample_squashed(const PolicyHeadOutput& head, Rng& rng) {
    const std::size_t rows = head.mu.dim(0), da = head.mu.dim(1);
    std::vector<double> noise(rows * da);
    for (double& v : noise) v = rng.normal(0.0, 1.0);
    Tensor eps = Tensor::from_values({rows, da}, std::move(noise));

    Tensor sigma = grad::exp_op(head.log_sigma);
    Tensor u = grad::add(head.mu, grad::mul(sigma, eps));
    Tensor y = grad::tanh_op(u);

    // Per-element Gaussian log-density of u under (mu, sigma): with
    // u = mu + sigma*eps this is -eps^2/2 - log_sigma - ln(2*pi)/2.
    Tensor gauss = grad::add_scalar(
        grad::sub(grad::scale(grad::square(eps), -0.5), head.log_sigma), -kHalfLog2Pi);
    // log(1 - tanh(u)^2) = 2*(ln 2 - u - softplus(-2u)), numerically stable.
    Tensor tanh_corr = grad::scale(
        grad::add_scalar(grad::neg(grad::add(u, grad::softplus(grad::scale(u, -2.0)))),
                         std::log(2.0)),
        2.0);
    Tensor per_el = grad::sub(gauss, tanh_corr);
    // The box map scales the first component by 1/2: subtract ln(1/2).
    Tensor log_prob = grad::add_scalar(grad::sum_last(per_el), std::log(2.0));
    return {box_map(y), log_prob};
}

Tensor deterministic_action(const Tensor& mu) {
    return box_map(grad::tanh_op(mu));
}

std::vector<double> normalize_states(const std::vector<double>& raw,
                                     std::size_t state_dim, double max_range) {
    if (state_dim < 5 || raw.size() % state_dim != 0) {
        throw ShapeError("normalize_states: " + std::to_string(raw.size()) +
                         " values do not tile rows of width " +
                         std::to_string(state_dim));
    }
    const std::size_t lidar = state_dim - 4;
    std::vector<double> out(raw.size());
    for (std::size_t r = 0; r < raw.size() / state_dim; ++r) {
        const double* in = raw.data() + r * state_dim;
        double* o = out.data() + r * state_dim;
        for (std::size_t c = 0; c < lidar; ++c) o[c] = in[c] / max_range;
        o[lidar] = in[lidar];          // v
        o[lidar + 1] = in[lidar + 1];  // omega
        o[lidar + 2] = in[lidar + 2] / 10.0;
        o[lidar + 3] = in[lidar + 3] / kPi;
    }
    return out;
}

void soft_update(ParamStore& target, const ParamStore& online, double tau) {
    if (target.entries().size() != online.entries().size()) {
        throw ShapeError("soft_update: stores hold " +
                         std::to_string(target.entries().size()) + " and " +
                         std::to_string(online.entries().size()) + " parameters");
    }
    for (std::size_t i = 0; i < target.entries().size(); ++i) {
        auto& dst = target.entries()[i].tensor.values();
        const auto& src = online.entries()[i].tensor.values();
        if (dst.size() != src.size()) {
            throw ShapeError("soft_update: parameter " +
                             target.entries()[i].name + " shape mismatch");
        }
        for (std::size_t j = 0; j < dst.size(); ++j) {
            dst[j] = tau * src[j] + (1.0 - tau) * dst[j];
        }
    }
}

void copy_params(ParamStore& target, const ParamStore& online) {
    soft_update(target, online, 1.0);
}

}  // namespace ctsac::nets
