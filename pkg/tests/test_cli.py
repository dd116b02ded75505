import json
import os

import numpy as np
import pytest

from wassmap.cli import cmd_distances, cmd_embed, cmd_generate, cmd_isomap, cmd_report, main, run_experiment
from wassmap.errors import MissingArtifacts, NonPositiveDilation

SMALL = """\
name = small
family = translation
shape = disk
radius = 1
frame = -2 2 -2 2
resolution = 24
mode = pushforward
grid = -1:1:3, -1:1:3
method = both
embed_dim = 2
knn = 3
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return str(p)


def test_pipeline_files(cfg, tmp_path):
    out = str(tmp_path / "exp")
    info = cmd_generate(cfg, out)
    assert info["n"] == 9 and len(os.listdir(os.path.join(out, "measures"))) == 9
    stats = cmd_distances(out)
    assert stats == {"n": 9, "solver_calls": 36}
    cmd_embed(out, 2)
    cmd_isomap(out, 2, knn=3)
    rep = cmd_report(out)
    for f in ("distances.csv", "embedding_wassmap_d2.csv", "embedding_wassmap_d2.svg", "report.txt", "timings.json"):
        assert os.path.exists(os.path.join(out, f))
    assert rep["embeddings"]["wassmap_d2"]["recovery_error"] < 1e-8
    assert "isomap_knn3_d2" in rep["embeddings"]


def test_cache_reuse(cfg, tmp_path):
    out = str(tmp_path / "exp")
    cmd_generate(cfg, out)
    cmd_distances(out)
    first = open(os.path.join(out, "distances.csv")).read()
    assert cmd_distances(out)["solver_calls"] == 0
    assert open(os.path.join(out, "distances.csv")).read() == first


def test_shared_cache_across_dirs(cfg, tmp_path):
    cache = str(tmp_path / "shared.jsonl")
    for name in ("a", "b"):
        cmd_generate(cfg, str(tmp_path / name))
    assert cmd_distances(str(tmp_path / "a"), cache_path=cache)["solver_calls"] == 36
    assert cmd_distances(str(tmp_path / "b"), cache_path=cache)["solver_calls"] == 0


def test_deterministic(cfg, tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    run_experiment(cfg, a)
    run_experiment(cfg, b, threads=3)
    for f in ("distances.csv", "embedding_wassmap_d2.csv", "embedding_isomap_knn3_d2.csv"):
        assert open(os.path.join(a, f)).read() == open(os.path.join(b, f)).read()


def test_disconnected_isomap_is_recorded(cfg, tmp_path):
    out = str(tmp_path / "exp")
    cmd_generate(cfg, out)
    status = cmd_isomap(out, 2, epsilon=1e-6)
    assert status["error"].startswith("DisconnectedGraph")
    status = cmd_isomap(out, 1, epsilon=1e-6, largest_component=True)
    assert "error" in status


def test_missing_artifacts(tmp_path):
    with pytest.raises(MissingArtifacts):
        cmd_report(str(tmp_path))
    with pytest.raises(MissingArtifacts):
        cmd_distances(str(tmp_path))
    assert main(["report", "--out", str(tmp_path)]) == 2


def test_nonpositive_dilation_names_index(tmp_path):
    p = tmp_path / "dil.cfg"
    p.write_text(SMALL.replace("translation", "dilation").replace("-1:1:3, -1:1:3", "0:1:3, 1:2:2"))
    with pytest.raises(NonPositiveDilation) as info:
        cmd_generate(str(p), str(tmp_path / "o"))
    assert info.value.index == 0


def test_overrides_and_main(cfg, tmp_path, capsys):
    out = str(tmp_path / "exp")
    assert main(["generate", "--config", cfg, "--out", out, "--mode", "raster"]) == 0
    assert json.load(open(os.path.join(out, "experiment.json")))["raw"]["mode"] == "raster"
    assert main(["distances", "--out", out, "--threads", "2"]) == 0
    assert main(["embed", "--out", out, "--embed-dim", "2"]) == 0
    assert main(["report", "--out", out]) == 0
    assert "wassmap_d2" in capsys.readouterr().out


def test_run_all(cfg, tmp_path, capsys):
    assert main(["run-all", "--config", cfg, "--out", str(tmp_path / "all")]) == 0
    assert os.path.exists(tmp_path / "all" / "small" / "report.json")


def test_truth_csv_matches_grid(cfg, tmp_path):
    out = str(tmp_path / "exp")
    cmd_generate(cfg, out)
    truth = np.loadtxt(os.path.join(out, "truth.csv"), delimiter=",")
    assert truth.shape == (9, 2)
    np.testing.assert_array_equal(truth[:3], [[-1, -1], [-1, 0], [-1, 1]])
