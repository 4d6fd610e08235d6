#include <cmath>
#include <stdexcept>

#include "ctsac/replay.hpp"
#include "doctest.h"

using namespace ctsac;
using sac::ReplayBuffer;
using sac::SequenceBatch;
using sac::Transition;

namespace {

// State fingerprint encodes (episode, step) so sampled rows can be audited.
Transition make_t(std::uint64_t ep, std::size_t step, bool done) {
    const double f = static_cast<double>(ep) * 1000.0 + static_cast<double>(step);
    Transition t;
    t.state = {f, 0.5};
    t.action = {0.1, -0.2};
    t.reward = f;
    t.next_state = {f + 0.5, 0.5};
    t.done = done;
    t.episode_id = ep;
    t.step_index = step;
    return t;
}

void push_episode(ReplayBuffer& buf, std::uint64_t ep, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) buf.append(make_t(ep, i, i + 1 == len));
}

}  // namespace

TEST_CASE("short episodes are front-padded with their first transition") {
    ReplayBuffer buf(100);
    push_episode(buf, 0, 3);
    Rng rng(1);
    SequenceBatch b = buf.sample(6, 5, rng);
    CHECK(b.batch == 6);
    CHECK(b.seq_len == 5);
    CHECK(b.state_dim == 2);
    for (std::size_t r = 0; r < 6; ++r) {
        // Always the one maximal window: two padded slots, then steps 0..2.
        CHECK(b.mask[r * 5 + 0] == 0.0);
        CHECK(b.mask[r * 5 + 1] == 0.0);
        CHECK(b.mask[r * 5 + 2] == 1.0);
        CHECK(b.mask[r * 5 + 3] == 1.0);
        CHECK(b.mask[r * 5 + 4] == 1.0);
        CHECK(b.states[(r * 5 + 0) * 2] == 0.0);  // padding repeats step 0
        CHECK(b.states[(r * 5 + 1) * 2] == 0.0);
        CHECK(b.states[(r * 5 + 2) * 2] == 0.0);
        CHECK(b.states[(r * 5 + 3) * 2] == 1.0);
        CHECK(b.states[(r * 5 + 4) * 2] == 2.0);
        CHECK(b.dones[r * 5 + 4] == 1.0);
        CHECK(b.dones[r * 5 + 3] == 0.0);
        CHECK(b.rewards[r * 5 + 4] == 2.0);
        CHECK(b.actions[(r * 5 + 4) * 2] == 0.1);
        CHECK(b.next_states[(r * 5 + 4) * 2] == 2.5);
    }
}

TEST_CASE("a single full-length episode yields identical full rows") {
    ReplayBuffer buf(100);
    push_episode(buf, 7, 5);
    Rng rng(3);
    SequenceBatch b = buf.sample(4, 5, rng);
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(b.mask[r * 5 + j] == 1.0);
            CHECK(b.states[(r * 5 + j) * 2] == 7000.0 + static_cast<double>(j));
        }
        CHECK(b.dones[r * 5 + 4] == 1.0);
    }
}

TEST_CASE("long episodes offer every full window and only full windows") {
    ReplayBuffer buf(100);
    push_episode(buf, 1, 10);
    Rng rng(5);
    SequenceBatch b = buf.sample(64, 4, rng);
    bool saw_first = false, saw_last = false;
    for (std::size_t r = 0; r < 64; ++r) {
        for (std::size_t j = 0; j < 4; ++j) CHECK(b.mask[r * 4 + j] == 1.0);
        const double first = b.states[r * 4 * 2] - 1000.0;
        CHECK(first >= 0.0);
        CHECK(first <= 6.0);  // window starts range over 0..len-T
        if (first == 0.0) saw_first = true;
        if (first == 6.0) saw_last = true;
        for (std::size_t j = 1; j < 4; ++j)
            CHECK(b.states[(r * 4 + j) * 2] == b.states[(r * 4 + j - 1) * 2] + 1.0);
    }
    CHECK(saw_first);
    CHECK(saw_last);
}

TEST_CASE("rows never mix episodes") {
    ReplayBuffer buf(1000);
    push_episode(buf, 1, 4);
    push_episode(buf, 2, 9);
    push_episode(buf, 3, 2);
    Rng rng(11);
    SequenceBatch b = buf.sample(200, 3, rng);
    for (std::size_t r = 0; r < 200; ++r) {
        long episode = -1;
        double prev_step = -1.0;
        for (std::size_t j = 0; j < 3; ++j) {
            const double f = b.states[(r * 3 + j) * 2];
            const long ep = static_cast<long>(f / 1000.0);
            const double step = f - 1000.0 * static_cast<double>(ep);
            if (episode == -1) episode = ep;
            CHECK(ep == episode);
            if (b.mask[r * 3 + j] == 0.0) {
                CHECK(step == 0.0);  // padding repeats the episode's first step
                CHECK(prev_step == -1.0);  // padding only at the front
            } else {
                if (prev_step >= 0.0) CHECK(step == prev_step + 1.0);
                prev_step = step;
            }
        }
    }
}

TEST_CASE("overflow evicts whole episodes oldest-first") {
    ReplayBuffer buf(4);
    for (std::uint64_t ep = 0; ep < 5; ++ep) push_episode(buf, ep, 1);
    CHECK(buf.size() == 4);
    CHECK_FALSE(buf.contains_episode(0));
    for (std::uint64_t ep = 1; ep < 5; ++ep) CHECK(buf.contains_episode(ep));
    CHECK(buf.episode_count() == 4);
}

TEST_CASE("the episode being written is never evicted") {
    ReplayBuffer buf(3);
    push_episode(buf, 0, 2);
    for (std::size_t i = 0; i < 6; ++i) buf.append(make_t(1, i, false));
    // Episode 1 alone exceeds capacity but must survive; episode 0 goes.
    CHECK_FALSE(buf.contains_episode(0));
    CHECK(buf.contains_episode(1));
    CHECK(buf.size() == 6);
    CHECK(buf.episode_count() == 0);  // the survivor is still open
    CHECK_FALSE(buf.ready());
}

TEST_CASE("ready flips once an episode closes") {
    ReplayBuffer buf(100);
    CHECK_FALSE(buf.ready());
    Rng rng(1);
    CHECK_THROWS_AS(buf.sample(1, 1, rng), std::logic_error);
    buf.append(make_t(0, 0, false));
    CHECK_FALSE(buf.ready());
    CHECK(buf.episode_count() == 0);
    buf.append(make_t(0, 1, true));
    CHECK(buf.ready());
    CHECK(buf.episode_count() == 1);
    CHECK(buf.sample(2, 2, rng).batch == 2);
}

TEST_CASE("appends validate episode id and step continuity") {
    ReplayBuffer buf(100);
    buf.append(make_t(5, 0, false));
    CHECK_THROWS_AS(buf.append(make_t(6, 0, false)), std::logic_error);  // open episode is 5
    CHECK_THROWS_AS(buf.append(make_t(5, 2, false)), std::logic_error);  // skipped step 1
    buf.append(make_t(5, 1, true));
    CHECK(buf.size() == 2);
}

TEST_CASE("degenerate construction and sampling arguments are rejected") {
    CHECK_THROWS_AS(ReplayBuffer(0), ConfigError);
    ReplayBuffer buf(10);
    push_episode(buf, 0, 2);
    Rng rng(1);
    CHECK_THROWS_AS(buf.sample(0, 2, rng), std::logic_error);
    CHECK_THROWS_AS(buf.sample(2, 0, rng), std::logic_error);
}

TEST_CASE("sampling is deterministic in the rng") {
    ReplayBuffer buf(100);
    push_episode(buf, 1, 6);
    push_episode(buf, 2, 3);
    Rng r1(42), r2(42);
    SequenceBatch a = buf.sample(16, 4, r1);
    SequenceBatch b = buf.sample(16, 4, r2);
    CHECK(a.states == b.states);
    CHECK(a.mask == b.mask);
    CHECK(a.rewards == b.rewards);
}
