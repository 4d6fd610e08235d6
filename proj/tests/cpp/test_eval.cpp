#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "ctsac/common.hpp"
#include "ctsac/env.hpp"
#include "ctsac/eval.hpp"
#include "ctsac/svg.hpp"
#include "ctsac/train.hpp"
#include "ctsac/world.hpp"
#include "doctest.h"

using ctsac::ConfigError;
using ctsac::EnvConfig;
using ctsac::LidarConfig;
using ctsac::NumericError;
using ctsac::RewardConfig;
using ctsac::TerminationCause;
using ctsac::WorldModel;
using ctsac::eval::compute_stats;
using ctsac::eval::EvalReport;
using ctsac::eval::evaluate;
using ctsac::eval::fixed_setup;
using ctsac::eval::report_from_csv;
using ctsac::eval::report_to_csv;
using ctsac::eval::StraightLinePolicy;
using ctsac::eval::student_t_quantile;
using ctsac::eval::WorldStats;

namespace {

class MotionlessPolicy : public ctsac::eval::Policy {
public:
    ctsac::Action act(const ctsac::RobotState&) override { return {0.0, 0.0}; }
};

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text) n += c == '\n' ? 1 : 0;
    return n;
}

}  // namespace

TEST_CASE("student t quantiles match frozen references") {
    CHECK(std::abs(student_t_quantile(0.975, 1) - 12.706204736432095) < 1e-8);
    CHECK(std::abs(student_t_quantile(0.975, 7) - 2.3646242510102993) < 1e-8);
    CHECK(std::abs(student_t_quantile(0.975, 10) - 2.2281388519649385) < 1e-8);
    CHECK(std::abs(student_t_quantile(0.975, 30) - 2.0422724563012373) < 1e-8);
    CHECK(std::abs(student_t_quantile(0.025, 10) + 2.2281388519649385) < 1e-8);
    CHECK(std::abs(student_t_quantile(0.5, 5)) < 1e-6);

    CHECK_THROWS_AS(student_t_quantile(0.0, 5), NumericError);
    CHECK_THROWS_AS(student_t_quantile(1.0, 5), NumericError);
    CHECK_THROWS_AS(student_t_quantile(0.975, 0.0), NumericError);
}

TEST_CASE("compute_stats derives SR, SET, and the 95% interval") {
    SUBCASE("eight successes out of ten runs") {
        const std::vector<double> times = {16, 18, 19, 20, 21, 22, 24, 20};
        const WorldStats s = compute_stats("w", times, 10);
        CHECK(s.runs == 10);
        CHECK(s.successes == 8);
        CHECK(s.sr == 0.8);
        REQUIRE(s.has_set);
        CHECK(s.mean_success_time == 20.0);
        CHECK(std::abs(s.set_seconds - 25.0) < 1e-12);
        // Deviations are -4,-2,-1,0,1,2,4,0 so the sample variance is 42/7.
        const double expected_ci = 2.3646242510102993 * std::sqrt(6.0) / std::sqrt(8.0);
        CHECK(std::abs(s.ci_half_width - expected_ci) < 1e-8);
    }

    SUBCASE("zero successes leave SET absent") {
        const WorldStats s = compute_stats("w", {}, 10);
        CHECK(s.sr == 0.0);
        CHECK_FALSE(s.has_set);
        CHECK(s.ci_half_width == 0.0);
    }

    SUBCASE("single success has no interval but a defined SET") {
        const WorldStats s = compute_stats("w", {12.0}, 4);
        CHECK(s.sr == 0.25);
        REQUIRE(s.has_set);
        CHECK(s.mean_success_time == 12.0);
        CHECK(s.set_seconds == 48.0);
        CHECK(s.ci_half_width == 0.0);
    }

    SUBCASE("zero runs") {
        const WorldStats s = compute_stats("w", {}, 0);
        CHECK(s.sr == 0.0);
        CHECK_FALSE(s.has_set);
    }
}

TEST_CASE("fixed_setup is reproducible and stays inside the regions") {
    const WorldModel world = ctsac::generate_world(2, 11);
    EnvConfig env;

    const auto a = fixed_setup(world, env);
    const auto b = fixed_setup(world, env);
    CHECK(a.start.x == b.start.x);
    CHECK(a.start.y == b.start.y);
    CHECK(a.goal.x == b.goal.x);
    CHECK(a.goal.y == b.goal.y);
    CHECK(a.heading == b.heading);

    CHECK(a.start.x >= world.start_region.lo.x);
    CHECK(a.start.x <= world.start_region.hi.x);
    CHECK(a.start.y >= world.start_region.lo.y);
    CHECK(a.start.y <= world.start_region.hi.y);
    CHECK(a.goal.x >= world.goal_region.lo.x);
    CHECK(a.goal.x <= world.goal_region.hi.x);
    CHECK(a.goal.y >= world.goal_region.lo.y);
    CHECK(a.goal.y <= world.goal_region.hi.y);

    CHECK(ctsac::point_free(world, a.start.x, a.start.y, env.robot_radius));
    CHECK(ctsac::point_free(world, a.goal.x, a.goal.y, env.robot_radius));
    CHECK(a.heading ==
          std::atan2(a.goal.y - a.start.y, a.goal.x - a.start.x));

    const WorldModel other = ctsac::generate_world(2, 12);
    const auto c = fixed_setup(other, env);
    CHECK((c.start.x != a.start.x || c.start.y != a.start.y));
}

TEST_CASE("the scripted baseline reliably crosses an empty world") {
    const std::vector<WorldModel> worlds = {ctsac::generate_world(1, 3)};
    EnvConfig env;
    RewardConfig reward;
    LidarConfig lidar;

    StraightLinePolicy policy;
    const EvalReport report = evaluate(policy, worlds, 3, 7, env, reward, lidar);

    REQUIRE(report.worlds.size() == 1);
    CHECK(report.worlds[0].name == "world0");
    CHECK(report.worlds[0].runs == 3);
    CHECK(report.worlds[0].sr == 1.0);
    REQUIRE(report.worlds[0].has_set);
    // With SR = 1 the SET equals the mean completion time.
    CHECK(report.worlds[0].set_seconds == report.worlds[0].mean_success_time);
    CHECK(report.overall.sr == 1.0);
    CHECK(report.overall.runs == 3);

    REQUIRE(report.episodes.size() == 3);
    for (const auto& ep : report.episodes) {
        CHECK(ep.cause == TerminationCause::Goal);
        CHECK(ep.success);
        CHECK(ep.time_s == static_cast<double>(ep.steps) * env.dt);
        // Straight run at 1 m/s over a few metres of empty floor.
        CHECK(ep.time_s > 1.0);
        CHECK(ep.time_s < 30.0);
    }

    REQUIRE(report.sample_trajectories.size() == 1);
    const auto& traj = report.sample_trajectories[0];
    REQUIRE_FALSE(traj.points.empty());
    CHECK(traj.points.back().cause == TerminationCause::Goal);
    const double ex = traj.points.back().x - traj.goal.x;
    const double ey = traj.points.back().y - traj.goal.y;
    CHECK(std::sqrt(ex * ex + ey * ey) < reward.goal_radius + 0.2);

    // Same inputs, same report.
    const EvalReport again = evaluate(policy, worlds, 3, 7, env, reward, lidar);
    CHECK(report_to_csv(again) == report_to_csv(report));
}

TEST_CASE("a motionless policy never succeeds and reports no SET") {
    const std::vector<WorldModel> worlds = {ctsac::generate_world(1, 5)};
    EnvConfig env;
    env.max_steps = 40;
    RewardConfig reward;
    LidarConfig lidar;

    MotionlessPolicy policy;
    const EvalReport report = evaluate(policy, worlds, 2, 9, env, reward, lidar);

    CHECK(report.overall.sr == 0.0);
    CHECK_FALSE(report.overall.has_set);
    REQUIRE(report.episodes.size() == 2);
    for (const auto& ep : report.episodes) {
        CHECK(ep.cause == TerminationCause::StepCap);
        CHECK(ep.steps == 40);
        CHECK_FALSE(ep.success);
    }

    // Absent SET serializes as empty fields and round-trips.
    const std::string csv = report_to_csv(report);
    const EvalReport back = report_from_csv(csv);
    CHECK_FALSE(back.worlds[0].has_set);
    CHECK(back.worlds[0].sr == 0.0);
    CHECK(back.overall.runs == 2);
}

TEST_CASE("evaluate validates its inputs") {
    EnvConfig env;
    RewardConfig reward;
    LidarConfig lidar;
    StraightLinePolicy policy;
    const std::vector<WorldModel> none;
    CHECK_THROWS_AS(evaluate(policy, none, 1, 1, env, reward, lidar), ConfigError);
    const std::vector<WorldModel> one = {ctsac::generate_world(1, 1)};
    CHECK_THROWS_AS(evaluate(policy, one, 0, 1, env, reward, lidar), ConfigError);
}

TEST_CASE("trajectory CSV has a header plus one row per step") {
    const std::vector<WorldModel> worlds = {ctsac::generate_world(1, 3)};
    EnvConfig env;
    RewardConfig reward;
    LidarConfig lidar;
    StraightLinePolicy policy;
    const EvalReport report = evaluate(policy, worlds, 1, 7, env, reward, lidar);
    REQUIRE(report.sample_trajectories.size() == 1);
    const auto& traj = report.sample_trajectories[0];

    const std::string csv = ctsac::eval::trajectory_to_csv(traj);
    std::istringstream is(csv);
    std::string header;
    std::getline(is, header);
    CHECK(header == "step,x,y,heading,v_r,omega_r,reward,cause");
    CHECK(count_lines(csv) == static_cast<int>(traj.points.size()) + 1);
    CHECK(csv.find(",goal\n") != std::string::npos);
    CHECK(csv.find(",running\n") != std::string::npos);
}

TEST_CASE("report CSV round-trips exactly") {
    EvalReport rep;
    rep.worlds.push_back(compute_stats("world0", {16, 18, 19, 20, 21, 22, 24, 20}, 10));
    rep.worlds.push_back(compute_stats("world1", {}, 10));
    rep.overall = compute_stats("overall", {16, 18, 19, 20, 21, 22, 24, 20}, 20);

    const std::string csv = report_to_csv(rep);
    const EvalReport back = report_from_csv(csv);
    REQUIRE(back.worlds.size() == 2);
    CHECK(back.worlds[0].name == "world0");
    CHECK(back.worlds[0].runs == 10);
    CHECK(back.worlds[0].successes == 8);
    CHECK(back.worlds[0].sr == rep.worlds[0].sr);
    CHECK(back.worlds[0].mean_success_time == rep.worlds[0].mean_success_time);
    CHECK(back.worlds[0].set_seconds == rep.worlds[0].set_seconds);
    CHECK(back.worlds[0].ci_half_width == rep.worlds[0].ci_half_width);
    CHECK_FALSE(back.worlds[1].has_set);
    CHECK(back.overall.runs == 20);
    CHECK(report_to_csv(back) == csv);
}

TEST_CASE("report CSV parse errors carry line numbers") {
    auto expect_error = [](const std::string& text, const std::string& needle) {
        try {
            report_from_csv(text);
            FAIL_CHECK("expected ConfigError for: ", text);
        } catch (const ConfigError& e) {
            CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos,
                          "wanted '", needle, "' in: ", e.what());
        }
    };

    expect_error("", "line 1");
    expect_error("bogus header\n", "line 1: not an eval report");
    const std::string header =
        "world,runs,successes,sr,mean_success_time_s,set_s,ci95_halfwidth_s\n";
    expect_error(header, "no world rows");
    expect_error(header + "world0,1,2\n", "line 2: expected 7 fields");
    expect_error(header + "world0,1,1,abc,1,1,0\n", "line 2: bad sr value");
    expect_error(header + "world0,1,1,1,5,5,0\n", "no overall row");
}

TEST_CASE("report table prints SET with its interval") {
    EvalReport rep;
    rep.worlds.push_back(compute_stats("world0", {10.0, 12.0}, 4));
    rep.overall = compute_stats("overall", {10.0, 12.0}, 4);
    const std::string table = ctsac::eval::report_to_table(rep);
    CHECK(table.find("world0") != std::string::npos);
    CHECK(table.find("+/-") != std::string::npos);

    EvalReport dry;
    dry.worlds.push_back(compute_stats("world0", {}, 4));
    dry.overall = compute_stats("overall", {}, 4);
    CHECK(ctsac::eval::report_to_table(dry).find("--") != std::string::npos);
}

TEST_CASE("world and trajectory SVGs use the documented canvas transform") {
    const WorldModel world = ctsac::generate_world(4, 2);
    const std::string svg = ctsac::svg::render_world(world);
    CHECK(svg.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\"", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    // Bounds are [-10,10]^2, so scale = 800/20 and the frame lands at the
    // margin: x = 20 + (x_w + 10) * 40.
    CHECK(svg.find("<rect x=\"20.00\" y=\"20.00\" width=\"800.00\" height=\"800.00\"")
          != std::string::npos);
    CHECK(svg.find("stroke-dasharray=\"4 4\"") != std::string::npos);  // regions

    const WorldModel moving = ctsac::generate_world(6, 3);
    const std::string dyn_svg = ctsac::svg::render_world(moving);
    CHECK(dyn_svg.find("#d08050") != std::string::npos);            // dynamic fill
    CHECK(dyn_svg.find("stroke-dasharray=\"6 4\"") != std::string::npos);  // patrol

    const std::vector<WorldModel> worlds = {ctsac::generate_world(1, 3)};
    EnvConfig env;
    RewardConfig reward;
    LidarConfig lidar;
    StraightLinePolicy policy;
    const EvalReport report = evaluate(policy, worlds, 1, 7, env, reward, lidar);
    const std::string traj_svg =
        ctsac::svg::render_trajectory(report.sample_trajectories[0]);
    CHECK(traj_svg.find("<polyline") != std::string::npos);
    CHECK(traj_svg.find("<circle") != std::string::npos);
}

TEST_CASE("eval bar chart titles carry the exact CSV values") {
    EvalReport rep;
    rep.worlds.push_back(compute_stats("world0", {16, 18, 19, 20, 21, 22, 24, 20}, 10));
    rep.overall = compute_stats("overall", {16, 18, 19, 20, 21, 22, 24, 20}, 10);

    const std::string svg = ctsac::svg::render_eval_bars(rep);
    const auto& w = rep.worlds[0];
    CHECK(svg.find("<title>world0 sr " + ctsac::format_double(w.sr) + "</title>") !=
          std::string::npos);
    CHECK(svg.find("<title>world0 set " + ctsac::format_double(w.set_seconds) + " ci " +
                   ctsac::format_double(w.ci_half_width) + "</title>") !=
          std::string::npos);

    // The same numbers appear in the CSV text.
    const std::string csv = report_to_csv(rep);
    CHECK(csv.find(ctsac::format_double(w.set_seconds)) != std::string::npos);
    CHECK(csv.find(ctsac::format_double(w.ci_half_width)) != std::string::npos);
}

TEST_CASE("learning-curve rendering needs at least one row") {
    CHECK_THROWS_AS(ctsac::svg::render_learning_curves({}), ConfigError);

    std::vector<ctsac::svg::TrainLogRow> rows(3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].iteration = 100 * (i + 1);
        rows[i].episode = i + 1;
        rows[i].stage = 1;
        rows[i].sampled_stage = 1;
        rows[i].reward = static_cast<double>(i) * 10.0;
        rows[i].success = i == 2 ? 1 : 0;
    }
    const std::string svg = ctsac::svg::render_learning_curves(rows);
    CHECK(svg.find("episode reward") != std::string::npos);
    CHECK(svg.find("trailing success rate") != std::string::npos);
    int polylines = 0;
    for (std::size_t pos = 0; (pos = svg.find("<polyline", pos)) != std::string::npos;
         ++pos) {
        ++polylines;
    }
    CHECK(polylines == 3);
}

TEST_CASE("training logs parse back into rows") {
    std::ostringstream log;
    log << ctsac::train::kTrainLogHeader << '\n';
    log << "120,1,1,1,0,1,0.5,0.4,0.3,-0.2,12.5,1\n";
    log << "240,2,1,1,0.5,0.99,0.5,0.4,0.3,-0.2,-3,0\n";

    const auto rows = ctsac::train::parse_train_log(log.str());
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].iteration == 120);
    CHECK(rows[0].episode == 1);
    CHECK(rows[0].stage == 1);
    CHECK(rows[0].reward == 12.5);
    CHECK(rows[0].success == 1);
    CHECK(rows[1].trailing_rate == 0.5);
    CHECK(rows[1].reward == -3.0);
    CHECK(rows[1].success == 0);

    auto expect_error = [](const std::string& text, const std::string& needle) {
        try {
            ctsac::train::parse_train_log(text);
            FAIL_CHECK("expected ConfigError for: ", text);
        } catch (const ConfigError& e) {
            CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos,
                          "wanted '", needle, "' in: ", e.what());
        }
    };
    expect_error("", "line 1");
    expect_error("nope\n", "line 1: not a training log");
    expect_error(std::string(ctsac::train::kTrainLogHeader) + "\n", "no data rows");
    expect_error(std::string(ctsac::train::kTrainLogHeader) + "\n1,2,3\n",
                 "line 2: expected 12 fields");
    expect_error(std::string(ctsac::train::kTrainLogHeader) +
                     "\n120,1,1,1,x,1,0,0,0,0,0,1\n",
                 "line 2");
}
