#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctsac/eval.hpp"
#include "ctsac/world.hpp"

namespace ctsac::svg {

// World geometry with optional start/goal markers and a path overlay. The
// world-to-canvas transform is sx = margin + (x - lo.x) * s and
// sy = margin + (hi.y - y) * s with s = inner_size / max(width, height).
std::string render_world(const WorldModel& world);
std::string render_trajectory(const eval::Trajectory& trajectory);

// Per-episode training curves: reward, trailing success rate, stage.
struct TrainLogRow {
    std::uint64_t iteration = 0;
    std::uint64_t episode = 0;
    std::size_t stage = 0;          // curriculum stage, non-decreasing
    std::size_t sampled_stage = 0;  // stage the episode's world came from
    double trailing_rate = 0.0;
    double alpha = 0.0;
    double loss_q1 = 0.0, loss_q2 = 0.0, loss_v = 0.0, loss_actor = 0.0;
    double reward = 0.0;
    int success = 0;
};
std::string render_learning_curves(const std::vector<TrainLogRow>& rows);

// SR and SET bars with 95% interval whiskers; exact values are carried in
// <title> elements using the same decimal formatting as the CSV report.
std::string render_eval_bars(const eval::EvalReport& report);

void write_file(const std::string& path, const std::string& content);

}  // namespace ctsac::svg
