// Python bindings for the core operations: world generation, lidar scans,
// reward terms, the exploration environment, config handling, training runs,
// and checkpoint evaluation.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ctsac/config.hpp"
#include "ctsac/env.hpp"
#include "ctsac/eval.hpp"
#include "ctsac/lidar.hpp"
#include "ctsac/rng.hpp"
#include "ctsac/sac.hpp"
#include "ctsac/svg.hpp"
#include "ctsac/train.hpp"
#include "ctsac/world.hpp"

namespace py = pybind11;

namespace {

// Environment wrapper owning its RNG so Python callers only deal with seeds.
class PyEnv {
public:
    PyEnv(const ctsac::WorldModel& world, std::uint64_t seed,
          const ctsac::cfg::RunConfig& config)
        : env_(world, config.env, config.reward, config.lidar), rng_(seed) {}

    py::dict reset() { return observation_dict(env_.reset(rng_)); }

    py::dict reset_to(std::pair<double, double> start, double heading,
                      std::pair<double, double> goal) {
        return observation_dict(env_.reset_to({start.first, start.second}, heading,
                                              {goal.first, goal.second}, rng_));
    }

    py::dict step(double v_c, double omega_c) {
        const auto r = env_.step(ctsac::Action{v_c, omega_c}, rng_);
        py::dict out;
        out["observation"] = observation_dict(r.observation);
        out["reward"] = r.reward;
        out["done"] = r.done;
        out["cause"] = std::string(ctsac::cause_name(r.cause));
        out["terms"] = py::make_tuple(r.terms.r1, r.terms.r2, r.terms.r3, r.terms.rp);
        return out;
    }

    py::tuple position() const {
        const auto& p = env_.episode().position;
        return py::make_tuple(p.x, p.y);
    }

    int steps() const { return env_.episode().step_count; }

private:
    static py::dict observation_dict(const ctsac::RobotState& s) {
        py::dict d;
        d["lidar"] = s.lidar;
        d["v_r"] = s.v_r;
        d["omega_r"] = s.omega_r;
        d["d_t"] = s.d_t;
        d["theta_t"] = s.theta_t;
        d["features"] = s.features();
        return d;
    }

    ctsac::ExploreEnv env_;
    ctsac::Rng rng_;
};

ctsac::cfg::RunConfig build_config(const std::string& preset_name,
                                   const std::map<std::string, std::string>& overrides) {
    ctsac::cfg::RunConfig cfg = ctsac::cfg::preset(preset_name);
    for (const auto& [k, v] : overrides) ctsac::cfg::apply_key(cfg, k, v);
    cfg.finalize();
    return cfg;
}

py::dict stats_dict(const ctsac::eval::WorldStats& s) {
    py::dict d;
    d["name"] = s.name;
    d["runs"] = s.runs;
    d["successes"] = s.successes;
    d["sr"] = s.sr;
    if (s.has_set) {
        d["mean_success_time_s"] = s.mean_success_time;
        d["set_s"] = s.set_seconds;
        d["ci95_halfwidth_s"] = s.ci_half_width;
    } else {
        d["mean_success_time_s"] = py::none();
        d["set_s"] = py::none();
        d["ci95_halfwidth_s"] = py::none();
    }
    return d;
}

}  // namespace

PYBIND11_MODULE(_ctsac, m) {
    m.doc() = "Curriculum transformer SAC exploration core";

    py::class_<ctsac::WorldModel>(m, "World")
        .def_property_readonly("stage_id",
                               [](const ctsac::WorldModel& w) { return w.stage_id; })
        .def_property_readonly("rng_seed",
                               [](const ctsac::WorldModel& w) { return w.rng_seed; })
        .def_property_readonly("obstacle_count",
                               [](const ctsac::WorldModel& w) { return w.obstacles.size(); })
        .def("to_text", &ctsac::world_to_text)
        .def("to_svg", [](const ctsac::WorldModel& w) { return ctsac::svg::render_world(w); })
        .def("__repr__", [](const ctsac::WorldModel& w) {
            return "<World stage " + std::to_string(w.stage_id) + " seed " +
                   std::to_string(w.rng_seed) + ", " +
                   std::to_string(w.obstacles.size()) + " obstacles>";
        });

    m.def("generate_world", &ctsac::generate_world, py::arg("stage"), py::arg("seed"),
          "Builds the stage-recipe world for stage 1..6; deterministic in (stage, seed).");
    m.def("load_world", &ctsac::load_world, py::arg("path"));
    m.def("save_world", &ctsac::save_world, py::arg("world"), py::arg("path"));
    m.def("world_from_text", &ctsac::world_from_text, py::arg("text"));

    m.def(
        "scan",
        [](const ctsac::WorldModel& world, std::pair<double, double> position,
           double heading, int d, double noise_sigma, std::uint64_t seed) {
            ctsac::LidarConfig cfg;
            cfg.d = d;
            cfg.noise_sigma = noise_sigma;
            ctsac::Rng rng(seed);
            return ctsac::scan(world, {position.first, position.second}, heading, cfg,
                               rng);
        },
        py::arg("world"), py::arg("position"), py::arg("heading"), py::arg("d") = 32,
        py::arg("noise_sigma") = 0.0, py::arg("seed") = 1,
        "Direction-weighted clustered lidar scan: d min-pooled segment distances.");

    m.def(
        "segment_spans",
        [](int d) {
            ctsac::LidarConfig cfg;
            cfg.d = d;
            return ctsac::segment_layout(cfg).spans;
        },
        py::arg("d") = 32, "Angular widths of the d scan segments, radians.");

    m.def(
        "reward_terms",
        [](double omega_r, double d_t, double min_ld,
           std::pair<double, double> position,
           const std::vector<std::pair<double, double>>& history, bool inverted_goal) {
            ctsac::RewardConfig cfg;
            if (inverted_goal) cfg.goal_reward_mode = ctsac::GoalRewardMode::Inverted;
            std::vector<ctsac::Vec2> hist;
            hist.reserve(history.size());
            for (const auto& [x, y] : history) hist.push_back({x, y});
            const auto t = ctsac::reward_terms(omega_r, d_t, min_ld,
                                               {position.first, position.second}, hist,
                                               cfg);
            py::dict out;
            out["r1"] = t.r1;
            out["r2"] = t.r2;
            out["r3"] = t.r3;
            out["rp"] = t.rp;
            out["total"] = t.total;
            return out;
        },
        py::arg("omega_r"), py::arg("d_t"), py::arg("min_ld"),
        py::arg("position") = std::pair<double, double>{0.0, 0.0},
        py::arg("history") = std::vector<std::pair<double, double>>{},
        py::arg("inverted_goal") = false,
        "Shaping terms for one step: turning, goal proximity, obstacle proximity, "
        "wandering count, and the weighted total.");

    py::class_<PyEnv>(m, "Env")
        .def(py::init([](const ctsac::WorldModel& world, std::uint64_t seed,
                         const std::string& preset,
                         const std::map<std::string, std::string>& overrides) {
                 return std::make_unique<PyEnv>(world, seed,
                                                build_config(preset, overrides));
             }),
             py::arg("world"), py::arg("seed") = 1, py::arg("preset") = "desk",
             py::arg("overrides") = std::map<std::string, std::string>{})
        .def("reset", &PyEnv::reset)
        .def("reset_to", &PyEnv::reset_to, py::arg("start"), py::arg("heading"),
             py::arg("goal"))
        .def("step", &PyEnv::step, py::arg("v_c"), py::arg("omega_c"))
        .def_property_readonly("position", &PyEnv::position)
        .def_property_readonly("steps", &PyEnv::steps);

    m.def(
        "config_text",
        [](const std::string& preset,
           const std::map<std::string, std::string>& overrides) {
            return ctsac::cfg::to_text(build_config(preset, overrides));
        },
        py::arg("preset") = "desk",
        py::arg("overrides") = std::map<std::string, std::string>{},
        "Resolved canonical key = value snapshot for a preset plus overrides.");

    m.def(
        "train",
        [](const std::string& preset, const std::string& out_dir,
           const std::map<std::string, std::string>& overrides, bool verbose) {
            const auto cfg = build_config(preset, overrides);
            const auto res = ctsac::train::run_training(
                cfg, out_dir, verbose ? &std::cerr : nullptr);
            py::dict out;
            out["episodes"] = res.episodes;
            out["final_stage"] = res.final_stage;
            out["trailing_sr"] = res.trailing_sr;
            out["checkpoint"] = res.checkpoint_path;
            out["log"] = res.log_path;
            out["stopped_early"] = res.stopped_early;
            return out;
        },
        py::arg("preset"), py::arg("out_dir"),
        py::arg("overrides") = std::map<std::string, std::string>{},
        py::arg("verbose") = false,
        "Runs the training loop and returns the run summary.");

    m.def(
        "evaluate_checkpoint",
        [](const std::string& ckpt_path, const std::vector<std::pair<int, std::uint64_t>>&
                                             stage_seed_pairs,
           std::size_t runs_per_world, std::uint64_t seed) {
            auto run = ctsac::train::load_run(ckpt_path);
            std::vector<ctsac::WorldModel> worlds;
            worlds.reserve(stage_seed_pairs.size());
            for (const auto& [stage, wseed] : stage_seed_pairs) {
                worlds.push_back(ctsac::generate_world(stage, wseed));
            }
            ctsac::eval::SacPolicy policy(*run.engine);
            const auto report = ctsac::eval::evaluate(policy, worlds, runs_per_world,
                                                      seed, run.config.env,
                                                      run.config.reward,
                                                      run.config.lidar);
            py::dict out;
            out["overall"] = stats_dict(report.overall);
            py::list per_world;
            for (const auto& w : report.worlds) per_world.append(stats_dict(w));
            out["worlds"] = per_world;
            out["csv"] = ctsac::eval::report_to_csv(report);
            return out;
        },
        py::arg("checkpoint"), py::arg("worlds"), py::arg("runs_per_world") = 5,
        py::arg("seed") = 1,
        "Evaluates a saved checkpoint on generated worlds given as (stage, seed) "
        "pairs; returns SR/SET statistics.");
}
