#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <vector>

#include "ctsac/rng.hpp"

namespace ctsac::sac {

struct Transition {
    std::vector<double> state;       // raw state features, length D_s
    std::array<double, 2> action;    // forward speed, yaw rate
    double reward = 0.0;
    std::vector<double> next_state;  // length D_s
    bool done = false;
    std::uint64_t episode_id = 0;
    std::size_t step_index = 0;
};

// Row-major batch of T-step windows. `mask` is 1 for real transitions and 0
// for front-padded slots; padded slots repeat the episode's first transition.
struct SequenceBatch {
    std::size_t batch = 0;
    std::size_t seq_len = 0;
    std::size_t state_dim = 0;
    std::size_t action_dim = 2;
    std::vector<double> states;       // (B, T, D_s)
    std::vector<double> actions;      // (B, T, 2)
    std::vector<double> rewards;      // (B, T)
    std::vector<double> next_states;  // (B, T, D_s)
    std::vector<double> dones;        // (B, T), 0 or 1
    std::vector<double> mask;         // (B, T), 0 or 1
};

// Episode-structured FIFO buffer. Capacity counts transitions; when an append
// pushes the total over capacity, whole episodes are evicted oldest-first
// (the episode currently being written is never evicted).
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    // Appends a transition; done=true closes the current episode.
    void append(Transition t);

    std::size_t size() const { return total_; }
    std::size_t episode_count() const;
    bool contains_episode(std::uint64_t episode_id) const;
    // Sampling requires at least one finished episode.
    bool ready() const;

    // Uniformly samples B maximal-coverage window anchors: episodes of
    // length >= T offer every full T-window, shorter episodes offer the one
    // window ending at their last step, front-padded with their first
    // transition (mask 0 on padded slots).
    SequenceBatch sample(std::size_t batch, std::size_t seq_len, Rng& rng) const;

private:
    struct Episode {
        std::uint64_t id = 0;
        std::vector<Transition> steps;
        bool closed = false;
    };
    std::deque<Episode> episodes_;
    std::size_t capacity_;
    std::size_t total_ = 0;
};

}  // namespace ctsac::sac
