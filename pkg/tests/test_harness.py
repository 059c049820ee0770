import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from activemap import cli, harness, neural, plot
from activemap.env import EnvConfig
from activemap.harness import (
    ConfigError,
    EvalConfig,
    PolicyConfig,
    RunConfig,
    build_policy,
    compare,
    evaluate,
    read_trace,
    run_episode,
    run_episodes,
    trace,
)

SMALL = EnvConfig(side=9, horizon=40)


def small_run(policy="random", episodes=6, seed=3, **kw):
    return RunConfig(env=SMALL, policy=PolicyConfig.parse(policy, **kw),
                     evaluation=EvalConfig(episodes=episodes, seed=seed))


@pytest.fixture(scope="module")
def weights(tmp_path_factory):
    path = tmp_path_factory.mktemp("w") / "weights.bin"
    neural.save_params(neural.init_params(np.random.default_rng(0), SMALL.side), path)
    return str(path)


class TestEvaluate:
    def test_mean_of_stored_rewards(self):
        rep = evaluate(small_run())
        assert rep.episodes == 6
        assert rep.mean == pytest.approx(sum(rep.rewards) / 6, abs=1e-12)
        assert rep.std == pytest.approx(np.std(rep.rewards, ddof=1), abs=1e-12)

    def test_reproducible(self):
        assert evaluate(small_run()).rewards == evaluate(small_run()).rewards

    def test_seed_changes_results(self):
        assert evaluate(small_run(seed=1)).rewards != evaluate(small_run(seed=2)).rewards

    def test_parallel_equals_serial(self):
        pc = PolicyConfig("myopic")
        serial = run_episodes(SMALL, pc, 4, 7, workers=1)
        parallel = run_episodes(SMALL, pc, 4, 7, workers=3)
        assert serial == parallel

    def test_learned(self, weights):
        rep = evaluate(small_run(f"learned:{weights}", episodes=3))
        assert rep.policy == "learned" and len(rep.rewards) == 3

    def test_learned_wrong_grid(self, weights):
        cfg = RunConfig(env=EnvConfig(side=11), policy=PolicyConfig("learned", weights),
                        evaluation=EvalConfig(episodes=1))
        with pytest.raises(neural.WeightFileError):
            evaluate(cfg)


class TestCompare:
    def test_self_compare_zero_difference(self):
        rep = compare(small_run(), [PolicyConfig("myopic"), PolicyConfig("myopic")])
        assert rep.paired()[0]["mean_difference"] == 0.0

    def test_rows(self):
        rep = compare(small_run(episodes=4),
                      [PolicyConfig("random"), PolicyConfig("frontier"), PolicyConfig("myopic")])
        assert [r.policy for r in rep.rows] == ["random", "frontier", "myopic"]
        assert len(rep.paired()) == 3
        table = harness.format_table(rep.rows)
        assert len(table.splitlines()) == 5

    def test_needs_two(self):
        with pytest.raises(ConfigError):
            compare(small_run(), [PolicyConfig("random")])

    def test_same_maps_across_policies(self):
        maps = {}
        for name in ("random", "myopic", "frontier"):
            seen = []

            def rec(record, state, seen=seen):
                if record["step"] == 0:
                    seen.append((state.map.occupied.copy(), tuple(state.pose)))

            policy = build_policy(SMALL, PolicyConfig(name))
            for ep in range(5):
                run_episode(SMALL, policy, 11, ep, rec)
            maps[name] = seen
        for other in ("myopic", "frontier"):
            for (ma, pa), (mb, pb) in zip(maps["random"], maps[other]):
                assert np.array_equal(ma, mb) and pa == pb


class TestTrace:
    def test_length_and_replay(self, tmp_path):
        cfg = small_run("myopic")
        n = trace(cfg, 2, tmp_path / "a.jsonl")
        trace(cfg, 2, tmp_path / "b.jsonl")
        assert n == SMALL.horizon + 1
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_final_reward_matches_evaluate(self, tmp_path):
        cfg = small_run("frontier", episodes=3)
        trace(cfg, 2, tmp_path / "t.jsonl")
        records = read_trace(tmp_path / "t.jsonl")
        assert records[0]["type"] == "reset" and records[0]["action"] is None
        assert records[-1]["cumulative_reward"] == evaluate(cfg).rewards[2]
        assert abs(sum(r["reward"] for r in records) - records[-1]["cumulative_reward"]) < 1e-9

    def test_snapshots(self, tmp_path):
        trace(small_run(), 0, tmp_path / "t.jsonl", stride=10)
        recs = read_trace(tmp_path / "t.jsonl")
        with_belief = [r["step"] for r in recs if "belief" in r]
        assert with_belief == [0, 10, 20, 30, 40]
        assert np.asarray(recs[0]["map"]).shape == (SMALL.side, SMALL.side)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(OSError):
            trace(small_run(), 0, tmp_path / "nope" / "t.jsonl")


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = small_run("frontier", replan_interval=7)
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert RunConfig.load(path) == cfg

    @pytest.mark.parametrize("data", [
        {"environment": {}},
        {"env": {"sidee": 3}},
        {"policy": {"name": "random", "temperature": 1}},
        {"evaluation": {"episodes": 0}},
        {"policy": {"name": "oracle"}},
        {"output": {"plot": "x.svg"}},
    ])
    def test_rejects(self, data):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(data)


class TestPlot:
    def test_empty_curve(self, tmp_path):
        (tmp_path / "c.csv").write_text("episode,reward\n")
        with pytest.raises(ValueError):
            plot.emit_curve_svg(tmp_path / "c.csv", tmp_path / "c.svg")
        assert not (tmp_path / "c.svg").exists()

    def test_higher_reward_is_higher_on_page(self):
        _, y = plot.curve_coordinates([0, 1, 2, 3], [1.0, 2.0, 3.0, 4.0])
        assert np.all(np.diff(y) < 0)

    def test_well_formed(self, tmp_path):
        rng = np.random.default_rng(0)
        lines = ["episode,reward"] + [f"{i},{v}" for i, v in enumerate(rng.normal(size=200))]
        (tmp_path / "c.csv").write_text("\n".join(lines) + "\n")
        plot.emit_curve_svg(tmp_path / "c.csv", tmp_path / "c.svg", 10)
        root = ET.parse(tmp_path / "c.svg").getroot()
        polys = root.findall("{http://www.w3.org/2000/svg}polyline")
        assert len(polys) == 2
        assert all(len(p.get("points").split()) == 200 for p in polys)


class TestCli:
    def test_eval(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        code = cli.main(["eval", "--policy", "random", "--episodes", "2", "--seed", "1",
                         "--output", str(out)])
        assert code == 0
        assert "random" in capsys.readouterr().out
        assert json.loads(out.read_text())["episodes"] == 2

    def test_compare_and_trace_with_config(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"env": {"side": 7, "horizon": 15},
                                   "evaluation": {"episodes": 3}}))
        assert cli.main(["compare", "--config", str(cfg), "--policies", "random,frontier"]) == 0
        assert "random - frontier" in capsys.readouterr().out
        assert cli.main(["trace", "--config", str(cfg), "--policy", "myopic",
                         "--output", str(tmp_path / "t.jsonl")]) == 0
        assert len(read_trace(tmp_path / "t.jsonl")) == 16

    def test_train_and_plot(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"env": {"side": 5, "horizon": 10}}))
        run = tmp_path / "run"
        assert cli.main(["train", "--config", str(cfg), "--episodes", "3",
                         "--out-dir", str(run)]) == 0
        for name in ("weights.bin", "curve.csv", "curve_smoothed.csv", "config.json"):
            assert (run / name).exists()
        assert cli.main(["plot", str(run / "curve.csv"), "--output", str(tmp_path / "c.svg")]) == 0
        assert cli.main(["eval", "--config", str(cfg), "--weights", str(run / "weights.bin"),
                         "--episodes", "2"]) == 0

    def test_weights_mismatch_one_line_error(self, tmp_path, capsys, weights):
        code = cli.main(["eval", "--weights", weights, "--episodes", "1"])
        err = capsys.readouterr().err.strip()
        assert code == 1
        assert err.startswith("error: WeightFileError:") and "\n" not in err

    def test_bad_config_one_line_error(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"env": {"side": 5, "colour": 1}}))
        assert cli.main(["eval", "--config", str(cfg)]) == 1
        err = capsys.readouterr().err.strip()
        assert err.startswith("error: ConfigError:") and "colour" in err

    def test_missing_file(self, capsys):
        assert cli.main(["plot", "/nonexistent/c.csv", "--output", "x.svg"]) == 1
        assert capsys.readouterr().err.startswith("error: FileNotFoundError:")

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["dance"])
        assert exc.value.code == 2
