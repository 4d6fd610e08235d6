#include <algorithm>
#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctsac/config.hpp"
#include "ctsac/env.hpp"
#include "ctsac/eval.hpp"
#include "ctsac/lidar.hpp"
#include "ctsac/svg.hpp"
#include "ctsac/train.hpp"
#include "ctsac/world.hpp"

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_interrupted{false};

void handle_signal(int) { g_interrupted.store(true); }

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ctsac::IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Exit codes: 0 success, 2 validation, 3 runtime/numerical, 4 I/O.
int guard(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const ctsac::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ctsac::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}

void parse_pose(const std::string& text, double& x, double& y, double& heading) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    if (parts.size() != 3) throw ctsac::ConfigError("--pose expects X,Y,HEADING, got '" + text + "'");
    try {
        std::size_t pos = 0;
        x = std::stod(parts[0], &pos);
        if (pos != parts[0].size()) throw std::invalid_argument("x");
        y = std::stod(parts[1], &pos);
        if (pos != parts[1].size()) throw std::invalid_argument("y");
        heading = std::stod(parts[2], &pos);
        if (pos != parts[2].size()) throw std::invalid_argument("heading");
    } catch (const std::exception&) {
        throw ctsac::ConfigError("--pose expects three numbers, got '" + text + "'");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ctsac: 2D exploration with transformer SAC and a staged curriculum"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "ctsac 0.1.0");

    // ---- world gen ----
    auto* world_cmd = app.add_subcommand("world", "World-file utilities");
    world_cmd->require_subcommand(1);
    auto* gen_cmd = world_cmd->add_subcommand("gen", "Generate a curriculum-stage world");
    int gen_stage = 1;
    std::uint64_t gen_seed = 1;
    std::string gen_out, gen_svg;
    gen_cmd->add_option("--stage", gen_stage, "Curriculum stage, 1-6")->required();
    gen_cmd->add_option("--seed", gen_seed, "Generator seed");
    gen_cmd->add_option("--out", gen_out, "Output world file (ctsac-world/1)")->required();
    gen_cmd->add_option("--svg", gen_svg, "Optional SVG rendering of the world");

    // ---- scan ----
    auto* scan_cmd = app.add_subcommand("scan", "One clustered scan at a pose in a world");
    std::string scan_world, scan_pose, scan_out;
    std::uint64_t scan_seed = 1;
    ctsac::LidarConfig scan_lidar;
    scan_cmd->add_option("--world", scan_world, "World file")->required();
    scan_cmd->add_option("--pose", scan_pose, "Robot pose as X,Y,HEADING")->required();
    scan_cmd->add_option("--seed", scan_seed, "Noise stream seed");
    scan_cmd->add_option("--segments", scan_lidar.d, "Segment count d (divisible by 4)");
    scan_cmd->add_option("--max-range", scan_lidar.max_range, "Max range, m");
    scan_cmd->add_option("--rays", scan_lidar.rays_per_scan, "Rays per scan");
    scan_cmd->add_option("--noise-sigma", scan_lidar.noise_sigma, "Per-ray Gaussian sigma, m");
    scan_cmd->add_option("--dropout-prob", scan_lidar.dropout_prob, "Per-ray dropout probability");
    scan_cmd->add_option("--out", scan_out, "CSV output path (default: stdout)");

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "Run curriculum training");
    std::string train_config, train_preset = "paper", train_out = "runs/train";
    std::vector<std::string> train_sets;
    train_cmd->add_option("--config", train_config, "Config file of section.key = value lines");
    train_cmd->add_option("--preset", train_preset, "Preset: paper or desk");
    train_cmd->add_option("--out", train_out, "Output directory for logs and checkpoints");
    train_cmd->add_option("--set", train_sets, "Single-key override, e.g. --set sac.seed=7")
        ->expected(1)
        ->allow_extra_args(false);

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on held-out worlds");
    std::string eval_ckpt, eval_worlds, eval_out = "runs/eval";
    std::size_t eval_runs = 100;
    std::uint64_t eval_seed = 1;
    eval_cmd->add_option("--ckpt", eval_ckpt, "Checkpoint file (ctsac-ckpt/1)")->required();
    eval_cmd->add_option("--worlds", eval_worlds, "Directory of .world files")->required();
    eval_cmd->add_option("--runs", eval_runs, "Episodes per world");
    eval_cmd->add_option("--seed", eval_seed, "Evaluation seed");
    eval_cmd->add_option("--out", eval_out, "Output directory");

    // ---- plot ----
    auto* plot_cmd = app.add_subcommand("plot", "Render a training log or eval report as SVG");
    std::string plot_train_log, plot_eval_report, plot_out;
    plot_cmd->add_option("--train-log", plot_train_log, "Training log CSV -> learning curves");
    plot_cmd->add_option("--eval-report", plot_eval_report, "Eval report CSV -> SR/SET bars");
    plot_cmd->add_option("--out", plot_out, "Output SVG path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (gen_cmd->parsed()) {
        return guard([&] {
            const ctsac::WorldModel world = ctsac::generate_world(gen_stage, gen_seed);
            ctsac::save_world(world, gen_out);
            if (!gen_svg.empty()) ctsac::svg::write_file(gen_svg, ctsac::svg::render_world(world));
            std::cout << "stage " << world.stage_id << " world with " << world.obstacles.size()
                      << " obstacles -> " << gen_out << '\n';
        });
    }

    if (scan_cmd->parsed()) {
        return guard([&] {
            double x = 0.0, y = 0.0, heading = 0.0;
            parse_pose(scan_pose, x, y, heading);
            scan_lidar.validate();
            const ctsac::WorldModel world = ctsac::load_world(scan_world);
            ctsac::Rng rng(scan_seed);
            const std::vector<double> values =
                ctsac::scan(world, {x, y}, heading, scan_lidar, rng);
            const ctsac::SegmentLayout layout = ctsac::segment_layout(scan_lidar);
            std::ostringstream csv;
            csv << "segment_index,angle_lo,angle_hi,distance\n";
            for (std::size_t i = 0; i < values.size(); ++i) {
                csv << i << ',' << ctsac::format_double(layout.boundaries[i]) << ','
                    << ctsac::format_double(layout.boundaries[i + 1]) << ','
                    << ctsac::format_double(values[i]) << '\n';
            }
            if (scan_out.empty()) {
                std::cout << csv.str();
            } else {
                ctsac::svg::write_file(scan_out, csv.str());
            }
        });
    }

    if (train_cmd->parsed()) {
        return guard([&] {
            ctsac::cfg::RunConfig config = ctsac::cfg::preset(train_preset);
            if (!train_config.empty()) {
                config = ctsac::cfg::parse_file(train_config, config);
            }
            for (const std::string& kv : train_sets) {
                const std::size_t eq = kv.find('=');
                if (eq == std::string::npos) {
                    throw ctsac::ConfigError("--set expects key=value, got '" + kv + "'");
                }
                ctsac::cfg::apply_key(config, kv.substr(0, eq), kv.substr(eq + 1));
            }
            std::signal(SIGINT, handle_signal);
            std::signal(SIGTERM, handle_signal);
            const ctsac::train::TrainResult result = ctsac::train::run_training(
                config, train_out, &std::cout, [] { return g_interrupted.load(); });
            if (result.interrupted) {
                std::cout << "interrupted; final checkpoint saved to " << result.checkpoint_path
                          << '\n';
            }
        });
    }

    if (eval_cmd->parsed()) {
        return guard([&] {
            ctsac::train::LoadedRun loaded = ctsac::train::load_run(eval_ckpt);

            std::vector<std::pair<std::string, std::string>> files;  // (stem, path)
            if (!fs::is_directory(eval_worlds)) {
                throw ctsac::IoError("--worlds is not a directory: " + eval_worlds);
            }
            for (const auto& entry : fs::directory_iterator(eval_worlds)) {
                if (entry.is_regular_file() && entry.path().extension() == ".world") {
                    files.emplace_back(entry.path().stem().string(), entry.path().string());
                }
            }
            std::sort(files.begin(), files.end());
            if (files.empty()) {
                throw ctsac::ConfigError("no .world files found in " + eval_worlds);
            }
            std::vector<ctsac::WorldModel> worlds;
            worlds.reserve(files.size());
            for (const auto& [stem, path] : files) worlds.push_back(ctsac::load_world(path));

            ctsac::eval::SacPolicy policy(*loaded.engine);
            ctsac::eval::EvalReport report = ctsac::eval::evaluate(
                policy, worlds, eval_runs, eval_seed, loaded.config.env, loaded.config.reward,
                loaded.config.lidar);
            for (std::size_t i = 0; i < files.size(); ++i) report.worlds[i].name = files[i].first;

            fs::create_directories(eval_out);
            ctsac::svg::write_file(eval_out + "/report.csv",
                                   ctsac::eval::report_to_csv(report));
            const std::string table = ctsac::eval::report_to_table(report);
            ctsac::svg::write_file(eval_out + "/report.txt", table);
            ctsac::svg::write_file(eval_out + "/eval_bars.svg",
                                   ctsac::svg::render_eval_bars(report));
            for (std::size_t i = 0; i < report.sample_trajectories.size(); ++i) {
                const auto& traj = report.sample_trajectories[i];
                const std::string base = eval_out + "/trajectory_" + files[i].first;
                ctsac::svg::write_file(base + ".csv", ctsac::eval::trajectory_to_csv(traj));
                ctsac::svg::write_file(base + ".svg", ctsac::svg::render_trajectory(traj));
            }
            std::cout << table;
        });
    }

    if (plot_cmd->parsed()) {
        return guard([&] {
            if (plot_train_log.empty() == plot_eval_report.empty()) {
                throw ctsac::ConfigError("plot needs exactly one of --train-log or --eval-report");
            }
            if (!plot_train_log.empty()) {
                const auto rows = ctsac::train::parse_train_log(read_text_file(plot_train_log));
                ctsac::svg::write_file(plot_out, ctsac::svg::render_learning_curves(rows));
            } else {
                const auto report = ctsac::eval::report_from_csv(read_text_file(plot_eval_report));
                ctsac::svg::write_file(plot_out, ctsac::svg::render_eval_bars(report));
            }
            std::cout << "wrote " << plot_out << '\n';
        });
    }

    std::cerr << "error: no subcommand\n";
    return 2;
}
