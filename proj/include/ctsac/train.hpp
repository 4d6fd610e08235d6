#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "ctsac/checkpoint.hpp"
#include "ctsac/config.hpp"
#include "ctsac/svg.hpp"

namespace ctsac::train {

// One CSV row is appended per finished episode; no timestamps, so two runs
// with the same configuration produce byte-identical logs.
inline constexpr const char* kTrainLogHeader =
    "iteration,episode,stage,sampled_stage,trailing_rate,alpha,"
    "loss_q1,loss_q2,loss_v,loss_actor,reward,success";

struct TrainResult {
    std::uint64_t episodes = 0;      // episodes completed
    std::size_t final_stage = 1;     // scheduler stage at the end
    double trailing_sr = 0.0;        // success rate over the stop window
    std::string checkpoint_path;     // final checkpoint written
    std::string log_path;
    bool stopped_early = false;      // stop_sr rule fired at the top stage
    bool interrupted = false;        // interrupt() returned true
};

// Runs the full training loop: curriculum-sampled worlds, warmup then policy
// actions, replay updates every sac.update_every steps, periodic checkpoints,
// and a final checkpoint on any normal exit (including interrupts). A
// non-finite loss aborts with a NumericError that names the newest checkpoint
// already on disk.
TrainResult run_training(const cfg::RunConfig& config, const std::string& out_dir,
                         std::ostream* console = nullptr,
                         const std::function<bool()>& interrupt = {});

// Rebuilds an engine from a self-contained checkpoint.
struct LoadedRun {
    cfg::RunConfig config;
    std::unique_ptr<sac::SacEngine> engine;
    ckpt::TrainState state;
};
LoadedRun load_run(const std::string& ckpt_path);

// Parses a training log back into rows (used by plotting); errors carry
// 1-based line numbers.
std::vector<svg::TrainLogRow> parse_train_log(const std::string& text);

}  // namespace ctsac::train
