"""Smoke tests for the Python bindings."""

import math

import pytest

import ctsac


def test_world_generation_is_deterministic():
    a = ctsac.generate_world(2, 42)
    b = ctsac.generate_world(2, 42)
    assert a.to_text() == b.to_text()
    assert a.stage_id == 2
    assert a.rng_seed == 42
    assert a.obstacle_count >= 3


def test_stage_one_is_empty_and_round_trips(tmp_path):
    w = ctsac.generate_world(1, 7)
    assert w.obstacle_count == 0
    path = tmp_path / "w.world"
    ctsac.save_world(w, str(path))
    again = ctsac.load_world(str(path))
    assert again.to_text() == w.to_text()
    assert ctsac.world_from_text(w.to_text()).to_text() == w.to_text()


def test_segment_spans_sum_to_two_pi():
    for d in (8, 16, 32, 64):
        spans = ctsac.segment_spans(d)
        assert len(spans) == d
        assert abs(sum(spans) - 2.0 * math.pi) < 1e-12
        # Forward segments are narrower than rear segments.
        assert spans[0] < spans[-1]


def test_scan_shape_and_range():
    w = ctsac.generate_world(3, 5)
    values = ctsac.scan(w, position=(0.0, 0.0), heading=0.3, d=32, noise_sigma=0.0)
    assert len(values) == 32
    assert all(0.0 <= v <= 6.0 for v in values)


def test_reward_terms_branches():
    quiet = ctsac.reward_terms(omega_r=0.0, d_t=10.0, min_ld=2.0)
    assert quiet["r1"] == 0.0
    assert quiet["r2"] == 1.0
    assert quiet["r3"] == 0.0
    assert quiet["rp"] == 0.0
    assert abs(quiet["total"] - 0.9) < 1e-12

    turning = ctsac.reward_terms(omega_r=0.6, d_t=5.0, min_ld=0.4)
    assert turning["r1"] == 1.0
    assert turning["r2"] == 0.5
    assert abs(turning["r3"] - 0.6) < 1e-12

    inverted = ctsac.reward_terms(omega_r=0.0, d_t=2.0, min_ld=2.0, inverted_goal=True)
    assert abs(inverted["r2"] - 0.8) < 1e-12


def test_env_reaches_goal_when_driven_straight():
    w = ctsac.generate_world(1, 3)
    env = ctsac.Env(w, seed=9)
    obs = env.reset_to(start=(0.8, 0.0), heading=math.pi, goal=(0.0, 0.0))
    assert len(obs["lidar"]) == 32
    assert len(obs["features"]) == 36

    result = None
    for _ in range(30):
        result = env.step(v_c=1.0, omega_c=0.0)
        if result["done"]:
            break
    assert result is not None and result["done"]
    assert result["cause"] == "goal"
    assert result["reward"] == 100.0


def test_config_text_round_trips_overrides():
    text = ctsac.config_text("desk", {"sac.gamma": "0.95", "lidar.d": "16"})
    assert "sac.gamma = 0.95" in text
    assert "lidar.d = 16" in text
    assert "net.state_dim = 20" in text  # derived from the segment count

    with pytest.raises(Exception):
        ctsac.config_text("desk", {"made.up": "1"})


def test_train_and_evaluate_smoke(tmp_path):
    out = tmp_path / "run"
    overrides = {
        "episode_budget": "6",
        "sac.warmup_steps": "200",
        "env.max_steps": "80",
        "checkpoint_every": "3",
        "stop_sr": "0",
    }
    res = ctsac.train("desk", str(out), overrides)
    assert res["episodes"] == 6
    assert (out / "train_log.csv").exists()

    report = ctsac.evaluate_checkpoint(
        res["checkpoint"], worlds=[(1, 11), (1, 12)], runs_per_world=2, seed=5
    )
    assert report["overall"]["runs"] == 4
    assert 0.0 <= report["overall"]["sr"] <= 1.0
    assert report["csv"].startswith(
        "world,runs,successes,sr,mean_success_time_s,set_s,ci95_halfwidth_s"
    )
