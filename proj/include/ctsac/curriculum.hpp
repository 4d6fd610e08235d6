#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "ctsac/rng.hpp"

namespace ctsac::curr {

struct CurriculumConfig {
    std::size_t max_stage = 6;
    double beta = 0.7;         // trailing success rate required to advance
    std::size_t window = 20;   // n_w, episodes in the trailing window
    std::size_t fixed_stage = 0;  // nonzero pins every episode to one stage

    void validate() const;
};

// Sampling weights over stages 1..j: p_i = i^2 / sum_{k<=j} k^2.
std::vector<double> stage_probabilities(std::size_t j);

// Periodic-review scheduler: every unlocked stage stays in the sampling pool,
// weighted toward the newest stage; the pool grows when the trailing success
// rate clears beta over a full window.
class CurriculumScheduler {
public:
    CurriculumScheduler(const CurriculumConfig& config, std::uint64_t seed);

    std::size_t stage() const { return stage_; }
    std::size_t episodes_in_stage() const { return n_e_; }
    std::size_t window_fill() const { return window_.size(); }
    double trailing_rate() const;

    // Draws the stage for the next training episode.
    std::size_t sample_stage();
    // Records an episode outcome; returns true when the stage advanced.
    bool record_episode(bool success);

    // Restores scheduler position when resuming from a checkpoint.
    void restore(std::size_t stage, std::size_t n_e, const std::vector<bool>& window);
    std::vector<bool> window_contents() const;

private:
    CurriculumConfig config_;
    Rng rng_;
    std::size_t stage_ = 1;
    std::size_t n_e_ = 0;
    std::deque<bool> window_;
};

}  // namespace ctsac::curr
