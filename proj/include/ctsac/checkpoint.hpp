#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctsac/sac.hpp"

namespace ctsac::ckpt {

// Training-loop position stored alongside the parameters.
struct TrainState {
    std::uint64_t iteration = 0;       // environment steps taken
    std::uint64_t episodes = 0;        // episodes completed overall
    std::size_t stage = 1;             // curriculum stage
    std::size_t n_e = 0;               // episodes completed in current stage
    std::vector<bool> window;          // trailing success window contents
};

// Writes a self-contained `ctsac-ckpt/1` file: the resolved run
// configuration, the training-loop position, and every named parameter and
// optimizer-moment array in little-endian float64.
void save(const std::string& path, sac::SacEngine& engine,
          const std::string& config_text, const TrainState& state);

// Reads just the embedded configuration text, so the caller can construct a
// matching engine before loading arrays.
std::string read_config_text(const std::string& path);

// Fills an existing engine's parameters and optimizer state; shapes must
// match or an IoError names the offending array.
TrainState load_into(const std::string& path, sac::SacEngine& engine);

}  // namespace ctsac::ckpt
