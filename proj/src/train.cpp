#include "ctsac/train.hpp"

#include <deque>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ctsac/common.hpp"
#include "ctsac/env.hpp"
#include "ctsac/world.hpp"

namespace ctsac::train {

namespace {

std::string csv_row(const svg::TrainLogRow& r) {
    std::ostringstream out;
    out << r.iteration << ',' << r.episode << ',' << r.stage << ',' << r.sampled_stage
        << ',' << format_double(r.trailing_rate) << ',' << format_double(r.alpha) << ','
        << format_double(r.loss_q1) << ',' << format_double(r.loss_q2) << ','
        << format_double(r.loss_v) << ',' << format_double(r.loss_actor) << ','
        << format_double(r.reward) << ',' << r.success;
    return out.str();
}

double window_rate(const std::deque<bool>& window) {
    if (window.empty()) return 0.0;
    std::size_t hits = 0;
    for (bool b : window) hits += b ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(window.size());
}

}  // namespace

TrainResult run_training(const cfg::RunConfig& config, const std::string& out_dir,
                         std::ostream* console, const std::function<bool()>& interrupt) {
    cfg::RunConfig run = config;
    run.finalize();
    const std::string config_text = cfg::to_text(run);

    std::filesystem::create_directories(out_dir);
    const std::string log_path = out_dir + "/train_log.csv";
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw IoError("cannot open training log for writing: " + log_path);
    log << kTrainLogHeader << '\n';

    // Independent deterministic streams so a change in one consumer (say, an
    // extra rejection sample in reset) cannot shift draws in another.
    Rng init_rng(mix_seed(run.sac.seed, 1));
    Rng world_rng(mix_seed(run.sac.seed, 2));
    Rng env_rng(mix_seed(run.sac.seed, 3));
    Rng policy_rng(mix_seed(run.sac.seed, 4));
    Rng update_rng(mix_seed(run.sac.seed, 5));

    sac::SacEngine engine(run.net, run.sac, run.lidar.max_range, init_rng);
    curr::CurriculumScheduler scheduler(run.curriculum, mix_seed(run.sac.seed, 6));

    TrainResult result;
    result.log_path = log_path;

    std::deque<bool> stop_window;
    std::uint64_t total_steps = 0;
    std::uint64_t episodes_done = 0;
    sac::LossReport last_losses;
    std::string last_checkpoint;

    auto save_ckpt = [&](const std::string& name) {
        ckpt::TrainState state;
        state.iteration = total_steps;
        state.episodes = episodes_done;
        state.stage = scheduler.stage();
        state.n_e = scheduler.episodes_in_stage();
        state.window = scheduler.window_contents();
        const std::string path = out_dir + "/" + name;
        ckpt::save(path, engine, config_text, state);
        last_checkpoint = path;
        return path;
    };

    bool interrupted = false;
    try {
        for (std::uint64_t episode = 0; episode < run.episode_budget; ++episode) {
            if (interrupt && interrupt()) {
                interrupted = true;
                break;
            }

            const std::size_t sampled_stage = scheduler.sample_stage();
            WorldModel world =
                generate_world(static_cast<int>(sampled_stage), world_rng.next_u64());
            ExploreEnv env(std::move(world), run.env, run.reward, run.lidar);
            RobotState obs = env.reset(env_rng);

            std::vector<std::vector<double>> history;
            history.push_back(obs.features());

            double episode_reward = 0.0;
            TerminationCause cause = TerminationCause::Running;
            std::size_t step_index = 0;
            while (true) {
                if (interrupt && interrupt()) {
                    interrupted = true;
                    break;
                }
                Action action;
                if (total_steps < run.sac.warmup_steps) {
                    action.v_c = policy_rng.uniform(0.0, 1.0);
                    action.omega_c = policy_rng.uniform(-1.0, 1.0);
                } else {
                    action = engine.act(history, true, policy_rng);
                }
                StepResult sr = env.step(action, env_rng);
                episode_reward += sr.reward;

                sac::Transition tr;
                tr.state = obs.features();
                tr.action = {action.v_c, action.omega_c};
                tr.reward = sr.reward;
                tr.next_state = sr.observation.features();
                tr.done = sr.done;
                tr.episode_id = episode;
                tr.step_index = step_index++;
                engine.buffer().append(tr);

                obs = sr.observation;
                history.push_back(obs.features());
                if (history.size() > run.sac.seq_len) history.erase(history.begin());

                ++total_steps;
                if (total_steps % run.sac.update_every == 0) {
                    auto report = engine.update(scheduler.episodes_in_stage(), update_rng);
                    if (report) last_losses = *report;
                }
                if (sr.done) {
                    cause = sr.cause;
                    break;
                }
            }
            if (interrupted) break;

            const bool success = cause == TerminationCause::Goal;
            scheduler.record_episode(success);
            ++episodes_done;
            stop_window.push_back(success);
            if (stop_window.size() > run.stop_window) stop_window.pop_front();

            svg::TrainLogRow row;
            row.iteration = total_steps;
            row.episode = episodes_done;
            row.stage = scheduler.stage();
            row.sampled_stage = sampled_stage;
            row.trailing_rate = scheduler.trailing_rate();
            row.alpha = sac::alpha_schedule(run.sac, scheduler.episodes_in_stage());
            row.loss_q1 = last_losses.q1;
            row.loss_q2 = last_losses.q2;
            row.loss_v = last_losses.v;
            row.loss_actor = last_losses.actor;
            row.reward = episode_reward;
            row.success = success ? 1 : 0;
            log << csv_row(row) << '\n';
            log.flush();

            if (console && episodes_done % 25 == 0) {
                (*console) << "episode " << episodes_done << "  stage " << row.stage
                           << "  trailing " << format_double(row.trailing_rate)
                           << "  reward " << format_double(episode_reward) << '\n';
            }

            if (run.checkpoint_every > 0 && episodes_done % run.checkpoint_every == 0) {
                save_ckpt("ckpt_ep" + std::to_string(episodes_done) + ".ckpt");
            }

            // The stop rule only fires once the scheduler has unlocked the top
            // stage, so the run cannot declare victory on easy stages alone.
            if (run.stop_sr > 0.0 && scheduler.stage() == run.curriculum.max_stage &&
                stop_window.size() == run.stop_window &&
                window_rate(stop_window) >= run.stop_sr) {
                result.stopped_early = true;
                break;
            }
        }
    } catch (const NumericError& err) {
        const std::string where =
            last_checkpoint.empty() ? std::string("none") : last_checkpoint;
        throw NumericError(std::string(err.what()) + "; last good checkpoint: " + where);
    }

    result.episodes = episodes_done;
    result.final_stage = scheduler.stage();
    result.trailing_sr = window_rate(stop_window);
    result.interrupted = interrupted;
    result.checkpoint_path = save_ckpt("final.ckpt");
    if (console) {
        (*console) << "done: " << episodes_done << " episodes, stage "
                   << result.final_stage << ", trailing success rate "
                   << format_double(result.trailing_sr) << '\n'
                   << "checkpoint: " << result.checkpoint_path << '\n';
    }
    return result;
}

LoadedRun load_run(const std::string& ckpt_path) {
    LoadedRun out;
    const std::string text = ckpt::read_config_text(ckpt_path);
    out.config = cfg::parse_text(text, cfg::default_config());
    Rng init_rng(mix_seed(out.config.sac.seed, 1));
    out.engine = std::make_unique<sac::SacEngine>(out.config.net, out.config.sac,
                                                  out.config.lidar.max_range, init_rng);
    out.state = ckpt::load_into(ckpt_path, *out.engine);
    return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

double field_double(const std::string& s, std::size_t line_no, const char* name) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line_no) + ": bad " + name +
                          " value '" + s + "'");
    }
}

std::uint64_t field_u64(const std::string& s, std::size_t line_no, const char* name) {
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line_no) + ": bad " + name +
                          " value '" + s + "'");
    }
}

}  // namespace

std::vector<svg::TrainLogRow> parse_train_log(const std::string& text) {
    std::vector<svg::TrainLogRow> rows;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!saw_header) {
            if (line != kTrainLogHeader) {
                throw ConfigError("line " + std::to_string(line_no) +
                                  ": not a training log (unexpected header)");
            }
            saw_header = true;
            continue;
        }
        const auto fields = split_csv(line);
        if (fields.size() != 12) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 12 fields, got " +
                              std::to_string(fields.size()));
        }
        svg::TrainLogRow row;
        row.iteration = field_u64(fields[0], line_no, "iteration");
        row.episode = field_u64(fields[1], line_no, "episode");
        row.stage = static_cast<std::size_t>(field_u64(fields[2], line_no, "stage"));
        row.sampled_stage =
            static_cast<std::size_t>(field_u64(fields[3], line_no, "sampled_stage"));
        row.trailing_rate = field_double(fields[4], line_no, "trailing_rate");
        row.alpha = field_double(fields[5], line_no, "alpha");
        row.loss_q1 = field_double(fields[6], line_no, "loss_q1");
        row.loss_q2 = field_double(fields[7], line_no, "loss_q2");
        row.loss_v = field_double(fields[8], line_no, "loss_v");
        row.loss_actor = field_double(fields[9], line_no, "loss_actor");
        row.reward = field_double(fields[10], line_no, "reward");
        row.success = static_cast<int>(field_u64(fields[11], line_no, "success"));
        rows.push_back(row);
    }
    if (rows.empty()) {
        throw ConfigError("line " + std::to_string(line_no == 0 ? 1 : line_no) +
                          ": training log has no data rows");
    }
    return rows;
}

}  // namespace ctsac::train
