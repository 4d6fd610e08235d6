#include "ctsac/replay.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "ctsac/common.hpp"

namespace ctsac::sac {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::append(Transition t) {
    if (episodes_.empty() || episodes_.back().closed) {
        episodes_.push_back({t.episode_id, {}, false});
    }
    Episode& ep = episodes_.back();
    if (ep.id != t.episode_id) {
        throw std::logic_error("transition episode_id " + std::to_string(t.episode_id) +
                               " does not match the open episode " + std::to_string(ep.id));
    }
    if (t.step_index != ep.steps.size()) {
        throw std::logic_error("transition step_index " + std::to_string(t.step_index) +
                               " is not consecutive in episode " + std::to_string(ep.id));
    }
    const bool closes = t.done;
    ep.steps.push_back(std::move(t));
    ep.closed = closes;
    ++total_;
    while (total_ > capacity_ && episodes_.size() > 1) {
        total_ -= episodes_.front().steps.size();
        episodes_.pop_front();
    }
}

std::size_t ReplayBuffer::episode_count() const {
    std::size_t n = episodes_.size();
    if (n > 0 && !episodes_.back().closed) --n;
    return n;
}

bool ReplayBuffer::contains_episode(std::uint64_t episode_id) const {
    return std::any_of(episodes_.begin(), episodes_.end(),
                       [&](const Episode& e) { return e.id == episode_id; });
}

bool ReplayBuffer::ready() const { return episode_count() > 0; }

SequenceBatch ReplayBuffer::sample(std::size_t batch, std::size_t seq_len,
                                   Rng& rng) const {
    if (!ready()) {
        throw std::logic_error("replay buffer holds no complete episode yet");
    }
    if (batch == 0 || seq_len == 0) {
        throw std::logic_error("sample: batch and seq_len must be positive");
    }
    // Anchors are uniform over maximal-coverage windows: an episode of
    // length >= T contributes one anchor per full T-window, a shorter one
    // contributes exactly its final step (front-padding fills the rest).
    std::vector<std::size_t> ends(episodes_.size());
    std::size_t running = 0;
    for (std::size_t i = 0; i < episodes_.size(); ++i) {
        const std::size_t len = episodes_[i].steps.size();
        running += len >= seq_len ? len - seq_len + 1 : 1;
        ends[i] = running;
    }

    const std::size_t d = episodes_.front().steps.front().state.size();
    SequenceBatch out;
    out.batch = batch;
    out.seq_len = seq_len;
    out.state_dim = d;
    out.states.resize(batch * seq_len * d);
    out.actions.resize(batch * seq_len * 2);
    out.rewards.resize(batch * seq_len);
    out.next_states.resize(batch * seq_len * d);
    out.dones.resize(batch * seq_len);
    out.mask.resize(batch * seq_len);

    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t anchor =
            static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(running) - 1));
        const std::size_t ei = static_cast<std::size_t>(
            std::upper_bound(ends.begin(), ends.end(), anchor) - ends.begin());
        const Episode& ep = episodes_[ei];
        const std::size_t within = anchor - (ei ? ends[ei - 1] : 0);
        const std::size_t len = ep.steps.size();
        const std::size_t offset = len >= seq_len ? within + seq_len - 1 : len - 1;

        for (std::size_t j = 0; j < seq_len; ++j) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(offset) -
                                       static_cast<std::ptrdiff_t>(seq_len - 1 - j);
            const bool padded = src < 0;
            const Transition& tr = ep.steps[padded ? 0 : static_cast<std::size_t>(src)];
            const std::size_t row = b * seq_len + j;
            std::copy(tr.state.begin(), tr.state.end(), out.states.begin() + row * d);
            std::copy(tr.next_state.begin(), tr.next_state.end(),
                      out.next_states.begin() + row * d);
            out.actions[row * 2] = tr.action[0];
            out.actions[row * 2 + 1] = tr.action[1];
            out.rewards[row] = tr.reward;
            out.dones[row] = tr.done ? 1.0 : 0.0;
            out.mask[row] = padded ? 0.0 : 1.0;
        }
    }
    return out;
}

}  // namespace ctsac::sac
