"""Smoke test for the extension module. Run with pytest or directly."""

import math
import pathlib
import tempfile

import navgait


def test_layout_and_distance_reward():
    course = navgait.Layout.default()
    assert len(course.obstacles) == 4
    again = navgait.Layout.parse(course.to_text())
    assert again.to_text() == course.to_text()
    # at the destination only its own term is at full strength
    assert navgait.distance_reward((5.0, 0.0), [(5.0, 0.0, 0.5, 0.95, "destination")]) == 0.95
    value = navgait.distance_reward(
        (0.0, 0.0),
        [
            (5.0, 0.0, 0.5, 0.95, "destination"),
            (2.0, 1.0, 1.0, -0.2, "obstacle"),
            (0.0, 0.0, 1.0, -0.5, "initial"),
        ],
    )
    expected = 0.95 * math.exp(-2.5) - 0.2 * math.exp(-math.sqrt(5.0)) - 0.5
    assert abs(value - expected) < 1e-12


def test_environments_step():
    for kind, obs_dim, act_dim in [("pointmass", 14, 2), ("stepper", 20, 3), ("biped", 13, 4)]:
        env = navgait.Env(kind)
        assert (env.obs_dim, env.action_dim) == (obs_dim, act_dim)
        obs = env.reset(seed=3)
        assert len(obs) == obs_dim
        obs, reward, terminated, truncated, info = env.step([0.0] * act_dim)
        assert len(obs) == obs_dim and math.isfinite(reward)
        terms = sum(info[name] for name in env.reward_terms)
        assert abs(terms - reward) < 1e-12


def test_gae_single_terminal_step():
    adv, ret = navgait.gae([1.0], [0.5], [True], [False], bootstrap_value=9.0)
    assert abs(adv[0] - 0.5) < 1e-15
    assert abs(ret[0] - 1.0) < 1e-15


def test_mlp_gradient_matches_finite_difference():
    net = navgait.Mlp([3, 5, 2], seed=1, output="tanh")
    x = [0.1, -0.4, 0.7]
    g, gx = net.backward(x, [1.0, -2.0])
    p = net.params()
    h = 1e-6
    for i in (0, 7, len(p) - 1):
        up = list(p)
        up[i] += h
        net.set_params(up)
        a = net.forward(x)
        up[i] -= 2 * h
        net.set_params(up)
        b = net.forward(x)
        fd = ((a[0] - b[0]) - 2.0 * (a[1] - b[1])) / (2 * h)
        assert abs(fd - g[i]) < 1e-6
    net.set_params(p)
    assert len(gx) == 3


def test_train_and_evaluate():
    with tempfile.TemporaryDirectory() as tmp:
        cfg = pathlib.Path(tmp) / "run.cfg"
        cfg.write_text(
            "env = pointmass\nhidden = 8\nrollout_horizon = 128\nminibatch_size = 64\n"
            "epochs = 1\ntotal_steps = 256\nseed = 2\noutput_dir = out\n"
        )
        path = navgait.train(cfg)
        ck = navgait.Checkpoint.load(path)
        assert ck.updates == 2 and ck.env == "pointmass"
        report = ck.evaluate(episodes=3)
        total = sum(report[k] for k in ("success_rate", "collision_rate", "fall_rate", "timeout_rate"))
        assert abs(total - 1.0) < 1e-12
        assert len(ck.act(navgait.Env("pointmass").reset())) == 2


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
            print("ok", name)
