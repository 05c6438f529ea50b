"""End-to-end CLI pipeline tests on a tiny budget.

A module-scoped fixture runs the whole chain once (train-biased,
build-baseline-pool, filter-pool with and without checkpoint mixing,
train-adaptive) in a temp workspace; individual tests then assert on the
artifacts. Eval, replay, and config plumbing are exercised separately.
"""

import argparse
import io
import json
import os
from pathlib import Path

import numpy as np
import pytest

from coopchef import cli, engine, pool, trajlog
from coopchef.policies import load_checkpoint

CLI_LAB = """XXXXX
XO1PX
X2 DX
XS TX
XXXXX

ingredients=O3 cook=2 reward=20
episode_length=30
"""

# Small enough that the full pipeline stays in the seconds range.
TINY = [
    "--steps", "200",
    "--workers", "2",
    "--rollout-length", "25",
    "--hidden", "8",
    "--minibatches", "2",
    "--ppo-epochs", "2",
]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    os.environ.pop("COOPCHEF_WORKERS", None)
    ws = tmp_path_factory.mktemp("cli-ws")
    layout_path = ws / "cli_lab.layout"
    layout_path.write_text(CLI_LAB, encoding="utf-8")
    common = ["--layout", str(layout_path), "--workspace", str(ws)]

    rcs = {}
    rcs["train-biased"] = cli.main(
        ["train-biased", *common, *TINY, "--n", "2", "--ec-episodes", "2"])
    rcs["build-baseline-pool"] = cli.main(
        ["build-baseline-pool", *common, *TINY, "--method", "fcp", "--n", "1"])
    rcs["filter-pool"] = cli.main(["filter-pool", *common, "--k", "2"])
    pool_path = ws / "pool-cli_lab.json"
    plain_spec = pool.PoolSpec.from_json(pool_path.read_text(encoding="utf-8"))
    rcs["filter-pool-mixed"] = cli.main(
        ["filter-pool", *common, "--k", "2",
         "--mep-dir", str(ws / "fcp" / "cli_lab")])
    mixed_spec = pool.PoolSpec.from_json(pool_path.read_text(encoding="utf-8"))
    rcs["train-adaptive"] = cli.main(
        ["train-adaptive", *common, *TINY, "--pool", str(pool_path)])

    return {
        "ws": ws,
        "layout_path": layout_path,
        "rcs": rcs,
        "plain_spec": plain_spec,
        "mixed_spec": mixed_spec,
        "pool_path": pool_path,
    }


def _manifests(ws: Path) -> list[dict]:
    return [json.loads(p.read_text(encoding="utf-8"))
            for p in sorted((ws / "manifests").glob("*.json"))]


def test_pipeline_exit_codes(pipeline):
    assert pipeline["rcs"] == {
        "train-biased": 0,
        "build-baseline-pool": 0,
        "filter-pool": 0,
        "filter-pool-mixed": 0,
        "train-adaptive": 0,
    }


def test_biased_artifacts(pipeline):
    outdir = pipeline["ws"] / "biased" / "cli_lab"
    for seed in (0, 1):
        stem = outdir / f"biased-{seed}"
        assert Path(f"{stem}-w.pt").exists()
        assert Path(f"{stem}-a.pt").exists()
        meta = json.loads(Path(f"{stem}.json").read_text(encoding="utf-8"))
        assert meta["weight_seed"] == seed
        assert meta["ec_episodes"] == 2
        layout = engine.load_layout(str(pipeline["layout_path"]))
        assert len(meta["event_count"]) == layout.n_events
        assert set(meta["weights"]["weights"]) <= set(layout.event_names)
        curve = Path(f"{stem}-curve.txt").read_text(encoding="utf-8")
        # 200 steps at 50 per update: header plus four rows.
        assert len(curve.strip().splitlines()) == 5


def test_fcp_artifacts(pipeline):
    outdir = pipeline["ws"] / "fcp" / "cli_lab"
    index = json.loads((outdir / "checkpoints.json").read_text(encoding="utf-8"))
    assert len(index["members"]) == 3
    ids = [m["id"] for m in index["members"]]
    assert len(set(ids)) == 3
    for m in index["members"]:
        assert Path(m["checkpoint"]).exists()
        handle = load_checkpoint(m["checkpoint"])
        assert handle.policy_id == m["id"]
    assert (outdir / "run0-curve.txt").exists()


def test_plain_pool_spec(pipeline):
    spec = pipeline["plain_spec"]
    assert spec.layout_name == "cli_lab"
    assert len(spec.members) == 2
    assert all(m.provenance == "biased" for m in spec.members)
    assert spec.start_index in (0, 1)
    for m in spec.members:
        assert Path(m.checkpoint_path).exists()
        assert m.event_count is not None


def test_mixed_pool_spec(pipeline):
    spec = pipeline["mixed_spec"]
    assert len(spec.members) == 4
    provs = [m.provenance for m in spec.members]
    assert provs.count("biased") == 2
    assert provs.count("mep_checkpoint") == 2
    for m in spec.members:
        assert Path(m.checkpoint_path).exists()


def test_adaptive_artifacts(pipeline):
    outdir = pipeline["ws"] / "adaptive" / "cli_lab"
    ckpt = outdir / "adaptive-0.pt"
    assert ckpt.exists()
    handle = load_checkpoint(str(ckpt))
    from coopchef.policies import RecurrentActorCriticNet

    assert isinstance(handle.net, RecurrentActorCriticNet)
    assert (outdir / "adaptive-0-curve.txt").exists()


def test_manifests_cover_artifacts(pipeline):
    ws = pipeline["ws"]
    manifests = _manifests(ws)
    assert sorted(m["command"] for m in manifests) == [
        "build-baseline-pool", "filter-pool", "filter-pool",
        "train-adaptive", "train-biased",
    ]
    for m in manifests:
        assert set(m) == {"command", "config", "inputs", "outputs", "created"}
        assert m["outputs"] == sorted(m["outputs"])
        for out in m["outputs"]:
            assert Path(out).exists()
    layout_key = str(pipeline["layout_path"])
    by_cmd = {m["command"]: m for m in manifests}
    import hashlib

    want = hashlib.sha256(
        pipeline["layout_path"].read_bytes()).hexdigest()
    assert by_cmd["train-biased"]["inputs"][layout_key] == want

    # Every artifact under the workspace traces back to a manifest, and
    # checkpoints to exactly one.
    all_outputs = [o for m in manifests for o in m["outputs"]]
    for sub in ("biased", "fcp", "adaptive"):
        for f in (ws / sub).rglob("*"):
            if f.is_file():
                assert str(f) in all_outputs
    for ckpt in ws.rglob("*.pt"):
        assert all_outputs.count(str(ckpt)) == 1


def test_manifest_config_echo(pipeline):
    by_cmd = {m["command"]: m for m in _manifests(pipeline["ws"])}
    cfg = by_cmd["train-biased"]["config"]
    assert cfg["steps"] == 200
    assert cfg["workers"] == 2
    assert cfg["n"] == 2
    assert cfg["layout"] == "cli_lab"
    # Unset flags fall back to defaults.
    assert cfg["lr"] == pytest.approx(5e-4)
    adaptive = by_cmd["train-adaptive"]["config"]
    assert adaptive["pool"] == str(pipeline["pool_path"])
    assert str(pipeline["pool_path"]) in by_cmd["train-adaptive"]["inputs"]


def test_adaptive_checkpoint_plays(pipeline):
    from coopchef import evalharness

    layout = engine.load_layout(str(pipeline["layout_path"]))
    ckpt = pipeline["ws"] / "adaptive" / "cli_lab" / "adaptive-0.pt"
    handle = load_checkpoint(str(ckpt), seed=3)
    from coopchef.policies import NoOpPolicy

    result = evalharness.crossplay(handle, NoOpPolicy(), layout,
                                   position=1, episodes=2, seed=9)
    assert result.episodes == 2
    assert np.isfinite(result.mean_reward)


def test_eval_command_writes_table(pipeline, tmp_path, capsys):
    out = tmp_path / "table.txt"
    rc = cli.main([
        "eval", "--layout", str(pipeline["layout_path"]),
        "--workspace", str(tmp_path),
        "--policy", "noop", "--partner", "random",
        "--episodes", "2", "--seats", "both", "--out", str(out),
    ])
    assert rc == 0
    text = out.read_text(encoding="utf-8")
    assert capsys.readouterr().out == text
    lines = text.splitlines()
    assert lines[0].startswith("policy")
    assert len(lines) == 3
    # Eval is read-only: no manifest written.
    assert not (tmp_path / "manifests").exists()


def test_eval_with_checkpoint_spec(pipeline, tmp_path, capsys):
    ckpt = pipeline["ws"] / "adaptive" / "cli_lab" / "adaptive-0.pt"
    rc = cli.main([
        "eval", "--layout", str(pipeline["layout_path"]),
        "--workspace", str(tmp_path),
        "--policy", f"ckpt:{ckpt}", "--partner", "noop",
        "--episodes", "1", "--seats", "1",
    ])
    assert rc == 0
    assert len(capsys.readouterr().out.splitlines()) == 2


def _write_log(path: Path, layout: engine.Layout, seed: int, n_steps: int) -> None:
    rng = np.random.default_rng(seed)
    actions = [tuple(int(a) for a in rng.integers(0, engine.N_ACTIONS, 2))
               for _ in range(n_steps)]
    with open(path, "w", encoding="utf-8") as fh:
        trajlog.write_episode(fh, layout, seed, actions, meta={"source": "test"})


def test_replay_ok(pipeline, tmp_path, capsys):
    layout = engine.load_layout(str(pipeline["layout_path"]))
    log1 = tmp_path / "a.jsonl"
    log2 = tmp_path / "b.jsonl"
    _write_log(log1, layout, 5, 30)
    _write_log(log2, layout, 6, 12)
    rc = cli.main(["replay", str(log1), str(log2)])
    assert rc == 0
    out_lines = capsys.readouterr().out.splitlines()
    assert len(out_lines) == 2
    assert all("ok score=" in line for line in out_lines)


def test_replay_detects_semantic_tamper(pipeline, tmp_path, capsys):
    layout = engine.load_layout(str(pipeline["layout_path"]))
    log = tmp_path / "t.jsonl"
    _write_log(log, layout, 5, 30)
    lines = log.read_text(encoding="utf-8").splitlines()
    row = json.loads(lines[3])
    row["r"] += 7
    lines[3] = json.dumps(row, sort_keys=True, separators=(",", ":"))
    log.write_text("\n".join(lines) + "\n", encoding="utf-8")
    rc = cli.main(["replay", str(log)])
    assert rc == 1
    assert "MISMATCH" in capsys.readouterr().err


def test_replay_detects_byte_tamper(pipeline, tmp_path, capsys):
    # Reformatting keeps the semantics, so only the byte-compare trips.
    layout = engine.load_layout(str(pipeline["layout_path"]))
    log = tmp_path / "t.jsonl"
    _write_log(log, layout, 5, 30)
    lines = [json.dumps(json.loads(line), sort_keys=True, separators=(", ", ": "))
             for line in log.read_text(encoding="utf-8").splitlines()]
    log.write_text("\n".join(lines) + "\n", encoding="utf-8")
    rc = cli.main(["replay", str(log)])
    assert rc == 1
    assert "relogged bytes differ" in capsys.readouterr().err


def test_filter_pool_without_candidates(tmp_path, capsys):
    layout_path = tmp_path / "cli_lab.layout"
    layout_path.write_text(CLI_LAB, encoding="utf-8")
    rc = cli.main(["filter-pool", "--layout", str(layout_path),
                   "--workspace", str(tmp_path), "--k", "1"])
    assert rc == 1
    assert "no biased candidates" in capsys.readouterr().err


def test_serve_rejects_malformed_agent(tmp_path, capsys):
    layout_path = tmp_path / "cli_lab.layout"
    layout_path.write_text(CLI_LAB, encoding="utf-8")
    rc = cli.main(["serve", "--layout", str(layout_path),
                   "--workspace", str(tmp_path), "--agent", "namewithoutspec"])
    assert rc == 2
    assert "name=policyspec" in capsys.readouterr().err


def test_config_precedence(tmp_path, monkeypatch):
    monkeypatch.delenv("COOPCHEF_WORKERS", raising=False)
    cfg_file = tmp_path / "c.yaml"
    cfg_file.write_text("steps: 777\nworkers: 3\n", encoding="utf-8")
    ns = argparse.Namespace(config=str(cfg_file), steps=111)
    cfg = cli._merged_config(ns, cli.TRAIN_DEFAULTS)
    assert cfg["steps"] == 111
    assert cfg["workers"] == 3
    assert cfg["lr"] == pytest.approx(5e-4)

    monkeypatch.setenv("COOPCHEF_WORKERS", "9")
    cfg = cli._merged_config(ns, cli.TRAIN_DEFAULTS)
    assert cfg["workers"] == 9


def test_config_file_flows_into_manifest(tmp_path, monkeypatch):
    monkeypatch.delenv("COOPCHEF_WORKERS", raising=False)
    layout_path = tmp_path / "cli_lab.layout"
    layout_path.write_text(CLI_LAB, encoding="utf-8")
    cfg_file = tmp_path / "c.yaml"
    cfg_file.write_text(
        "steps: 100\nworkers: 2\nrollout_length: 25\nhidden: 8\n"
        "minibatches: 2\nppo_epochs: 2\n",
        encoding="utf-8")
    rc = cli.main(["train-biased", "--layout", str(layout_path),
                   "--workspace", str(tmp_path), "--config", str(cfg_file),
                   "--hidden", "4", "--n", "1", "--ec-episodes", "1"])
    assert rc == 0
    manifest = _manifests(tmp_path)[0]
    assert manifest["config"]["steps"] == 100
    assert manifest["config"]["hidden"] == 4


def test_unknown_layout_name_lists_bundled():
    with pytest.raises(engine.LayoutError, match="bundled layouts"):
        cli.main(["eval", "--layout", "no_such_kitchen",
                  "--policy", "noop", "--partner", "noop"])
