#pragma once

#include <string>

#include "ctsac/curriculum.hpp"
#include "ctsac/env.hpp"
#include "ctsac/lidar.hpp"
#include "ctsac/networks.hpp"
#include "ctsac/sac.hpp"

namespace ctsac::cfg {

// Everything a run needs, resolved from defaults, an optional preset, and an
// optional `section.key = value` config file. The resolved text form is
// embedded in checkpoints so evaluation needs no external config.
struct RunConfig {
    LidarConfig lidar;
    EnvConfig env;
    RewardConfig reward;
    nets::NetworkConfig net;
    sac::SacConfig sac;
    std::size_t checkpoint_every = 100;  // episodes between checkpoints
    curr::CurriculumConfig curriculum;
    std::size_t episode_budget = 300;    // training episodes overall
    double stop_sr = 0.0;                // early stop once trailing SR exceeds this (0 = off)
    std::size_t stop_window = 50;        // episodes in the early-stop trailing window
    std::size_t eval_runs = 100;
    std::uint64_t eval_seed = 1;

    // Derives the cross-section fields (state width from the lidar segment
    // count, shared sequence length) and validates everything.
    void finalize();
};

// Module defaults (paper-scale network and buffer).
RunConfig default_config();
// Named bundles: "paper" (the defaults) and "desk" (small network, short
// episodes, sized for a single CPU core).
RunConfig preset(const std::string& name);

// Applies one key; unknown keys raise ConfigError naming the key.
void apply_key(RunConfig& config, const std::string& key, const std::string& value);
// Parses full config text; errors carry 1-based line numbers.
RunConfig parse_text(const std::string& text, RunConfig base);
RunConfig parse_file(const std::string& path, RunConfig base);

// Canonical resolved snapshot; parse_text(to_text(c)) reproduces c.
std::string to_text(const RunConfig& config);

}  // namespace ctsac::cfg
