"""End-to-end acceptance checks; each test records one PASS/FAIL line."""

import json
import os
import time

import numpy as np
import pytest

from conftest import MNIST_DIR, ROOT, random_measure
from wassmap.cli import run_experiment
from wassmap.embedding import classical_mds, wassmap
from wassmap.evalign import circle_fit, procrustes, recovery_error
from wassmap.measure import AffineMap, DiscreteMeasure, marginal_second_moments, pushforward, second_moment
from wassmap.synth import (
    Frame,
    ShapeSpec,
    base_measure,
    dilation_family,
    rotation_family,
    translation_family,
    uniform_angles,
    uniform_grid,
)
from wassmap.transport import permutation_oracle, rotation_displacement, solve_w2, w2

CONFIGS = os.path.join(ROOT, "configs")

# raster step for the rasterized dilation family (see scripts/raster_convergence.py)
DILATION_RASTER_STEP = 0.1


def load_csv(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)


def test_translation_recovery(tmp_path, criterion):
    t0 = time.perf_counter()
    rep = run_experiment(os.path.join(CONFIGS, "fig1_translation.cfg"), str(tmp_path))
    total = time.perf_counter() - t0
    times = rep["runtimes_s"]
    wass_time = times["generate"] + times["distances"] + times["embed_wassmap_d2"]
    err = rep["embeddings"]["wassmap_d2"]["recovery_error"]
    ok = err <= 1e-6 and wass_time <= 60
    criterion(
        "1", "translation recovery", ok, f"error {err:.2e} <= 1e-6, Wassmap runtime {wass_time:.1f} s <= 60 s "
        f"(with ISOMAP {total:.1f} s)"
    )
    assert ok


def test_nonconvex_translation(tmp_path, criterion):
    rep = run_experiment(os.path.join(CONFIGS, "fig2_nonconvex.cfg"), str(tmp_path))
    n = len(load_csv(os.path.join(tmp_path, "truth.csv")))
    err = rep["embeddings"]["wassmap_d2"]["recovery_error"]
    iso = rep["embeddings"]["isomap_knn4_d2"]
    if "error" in iso:
        iso_ok, iso_text = iso["error"].startswith("DisconnectedGraph"), "ISOMAP disconnected"
    else:
        iso_err = iso["recovery_error_scaled"]
        iso_ok, iso_text = iso_err > err, f"ISOMAP error {iso_err:.2e} (scale fitted)"
    ok = n == 72 and err <= 1e-6 and iso_ok
    criterion("2", "nonconvex translation recovery", ok, f"N {n}, Wassmap error {err:.2e} <= 1e-6, {iso_text}")
    assert ok


def test_dilation_distance_law(rng, criterion):
    shape = ShapeSpec.rectangle([1, -1], [2, 3])
    base = base_measure(shape, Frame((0.5, -1.5), (2.5, 3.5), (40, 100)))
    m2 = marginal_second_moments(base)
    worst = 0.0
    for _ in range(10):
        t, s = rng.uniform(0.3, 3, 2), rng.uniform(0.3, 3, 2)
        got = solve_w2(pushforward(base, AffineMap.dilation(t)), pushforward(base, AffineMap.dilation(s))).cost
        want = float(np.sum((t - s) ** 2 * m2))
        worst = max(worst, abs(got - want) / want)
    # dense raster aligned with the rectangle, step 1/128
    dense = base_measure(shape, Frame((1, -1), (2, 3), (128, 512)))
    dm2 = marginal_second_moments(dense)
    moment_err = float(np.max(np.abs(dm2 - 7 / 3) / (7 / 3)))
    ok = worst <= 1e-8 and moment_err <= 1e-2
    criterion(
        "3", "dilation distance law", ok,
        f"worst relative law error {worst:.2e} <= 1e-8, dense marginal moments {dm2.round(6).tolist()} "
        f"vs 7/3 rel {moment_err:.2e} <= 1e-2",
    )
    assert ok


def test_dilation_grid_pushforward(criterion):
    thetas = uniform_grid((0.5, 2, 4), (0.5, 4, 4))
    base = base_measure(ShapeSpec.disk(), Frame.square(1, 64))
    s = np.sqrt(marginal_second_moments(base))
    emb = wassmap(dilation_family(base, thetas), 2)
    err = procrustes(emb, thetas * s, with_scale=True).normalized_error
    scale = procrustes(thetas, emb, with_scale=True).scale
    ok = err <= 1e-6 and abs(scale - 0.5) <= 2e-2
    criterion(
        "4a", "dilation grid recovery (pushforward)", ok,
        f"error vs S*theta {err:.2e} <= 1e-6, recovered scale {scale:.5f} within 2e-2 of 0.5",
    )
    assert ok


@pytest.mark.slow
def test_dilation_grid_raster(criterion):
    thetas = uniform_grid((0.5, 2, 4), (0.5, 4, 4))
    h = DILATION_RASTER_STEP
    frame = Frame((-2.1, -4.1), (2.1, 4.1), (round(4.2 / h), round(8.2 / h)))
    emb = wassmap(dilation_family(ShapeSpec.disk(), thetas, "raster", frame), 2)
    err = procrustes(emb, 0.5 * thetas, with_scale=True).normalized_error
    scale = procrustes(thetas, emb, with_scale=True).scale
    ok = err <= 1e-3 and abs(scale - 0.5) <= 2e-2
    criterion(
        "4b", "dilation grid recovery (raster)", ok,
        f"raster step {h}, error vs S*theta {err:.2e} <= 1e-3, recovered scale {scale:.5f} within 2e-2 of 0.5",
    )
    assert ok


def test_isotropic_dilation(criterion):
    base = base_measure(ShapeSpec.disk(), Frame.square(1, 64))
    cs = np.array([0.5, 1.0, 1.5, 2.0])
    emb = wassmap(dilation_family(base, np.c_[cs, cs]), 1)
    y = emb.points[:, 0]
    iu = np.triu_indices(4, 1)
    # distance between the parameter vectors (c, c) and (c', c')
    dtheta = np.sqrt(2) * np.abs(cs[:, None] - cs[None])[iu]
    ratios = np.abs(y[:, None] - y[None])[iu] / dtheta
    want = np.sqrt(second_moment(base) / 2)
    dev = float(np.max(np.abs(ratios - want)))
    ok = dev <= 1e-6
    criterion("5", "isotropic dilation spacing", ok, f"ratios vs (M2/2)^(1/2) = {want:.6f}: max deviation {dev:.2e} <= 1e-6")
    assert ok


def test_mds_oracle(criterion):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(5, 51))
        d = int(rng.integers(1, 5))
        x = rng.normal(size=(n, d)) * rng.uniform(0.1, 10)
        emb = classical_mds(np.sum((x[:, None] - x[None]) ** 2, axis=2), d)
        worst = max(worst, procrustes(emb, x).rmse)
    ok = worst <= 1e-8
    criterion("6", "MDS oracle", ok, f"worst rigid RMSE over 200 configurations {worst:.2e} <= 1e-8")
    assert ok


def test_ot_oracle(criterion):
    rng = np.random.default_rng(7)
    worst_cost = worst_gap = 0.0
    for _ in range(500):
        n = int(rng.integers(1, 7))
        mu = random_measure(rng, n, uniform=True)
        nu = random_measure(rng, n, uniform=True)
        plan = solve_w2(mu, nu)
        worst_cost = max(worst_cost, abs(plan.cost - permutation_oracle(mu, nu)))
        worst_gap = max(worst_gap, plan.duality_gap(mu, nu))
    ok = worst_cost <= 1e-9 and worst_gap <= 1e-7
    criterion(
        "7", "OT oracle equivalence", ok,
        f"max |simplex - permutation| {worst_cost:.2e} <= 1e-9, max relative duality gap {worst_gap:.2e} <= 1e-7",
    )
    assert ok


def test_metric_axioms(criterion):
    rng = np.random.default_rng(11)
    sym = tri = 0.0
    for _ in range(100):
        a, b, c = (random_measure(rng, int(rng.integers(1, 25)), scale=rng.uniform(0.5, 3)) for _ in range(3))
        ab, ba = w2(a, b), w2(b, a)
        sym = max(sym, abs(ab - ba))
        tri = max(tri, w2(a, c) - ab - w2(b, c))
    ok = sym <= 1e-9 and tri <= 1e-7
    criterion("8", "metric axioms", ok, f"max asymmetry {sym:.2e} <= 1e-9, max triangle slack {tri:.2e} <= 1e-7")
    assert ok


def test_rotation_manifold(criterion):
    shape = ShapeSpec.ellipse([1, 0.5], [3, 2])
    base = base_measure(shape, Frame((1.9, 1.4), (4.1, 2.6), (44, 24)))
    angles = uniform_angles(16)
    fam = rotation_family(base, angles)
    emb = wassmap(fam, 2)
    _, radius, dev = circle_fit(emb)
    slack = min(rotation_displacement(base, a) - solve_w2(base, m).cost for a, m in zip(angles, fam))
    ok = dev <= 0.05 and slack >= -1e-9
    criterion(
        "9", "rotation manifold", ok,
        f"{base.size} atoms, circle deviation {dev:.2e} <= 5e-2 of radius {radius:.4f}, "
        f"min bound slack {slack:.2e} >= 0",
    )
    assert ok


@pytest.mark.slow
def test_mnist_zeros_ones(tmp_path, monkeypatch, mnist_paths, criterion):
    monkeypatch.setenv("WASSMAP_MNIST_DIR", os.path.dirname(mnist_paths[0]))
    t0 = time.perf_counter()
    rep = run_experiment(os.path.join(CONFIGS, "fig8_mnist01.cfg"), str(tmp_path))
    total = time.perf_counter() - t0
    acc = rep["embeddings"]["wassmap_d2"]["knn1_accuracy"]
    iso = {}
    for eps in (1000, 2000, 2500):
        tag = f"isomap_eps{eps}_d2"
        e = rep["embeddings"].get(tag, {})
        emitted = os.path.exists(os.path.join(tmp_path, f"embedding_{tag}.csv")) and "n" in e
        iso[eps] = e["n"] if emitted else None
    ok = acc >= 0.95 and all(v is not None for v in iso.values()) and total <= 1800
    iso_text = ", ".join(f"ISOMAP eps {k}: {'missing' if v is None else f'{v} embedded'}" for k, v in iso.items())
    criterion("10", "MNIST 0/1", ok, f"1-NN accuracy {acc:.3f} >= 0.95, {iso_text}, runtime {total:.0f} s <= 1800 s")
    assert ok


@pytest.mark.slow
def test_deformation_family(tmp_path, criterion):
    rep = run_experiment(os.path.join(CONFIGS, "fig7_deformation.cfg"), str(tmp_path))
    params = load_csv(os.path.join(tmp_path, "params.csv"))
    worst = 0.0
    for d in (2, 3):
        pts = load_csv(os.path.join(tmp_path, f"embedding_wassmap_d{d}.csv"))
        row = pts[params[:, 0] == 0]
        radius = np.sqrt(np.mean(np.sum((pts - pts.mean(0)) ** 2, axis=1)))
        worst = max(worst, float(np.max(np.linalg.norm(row - row.mean(0), axis=1)) / radius))
    ok = len(params) == 256 and {"wassmap_d2", "wassmap_d3"} <= set(rep["embeddings"]) and worst <= 1e-6
    criterion(
        "11", "deformation family", ok,
        f"{len(params)} members, d=2 and d=3 embedded, theta1=0 row spread {worst:.2e} <= 1e-6 of RMS radius",
    )
    assert ok


@pytest.mark.slow
def test_mnist_all_classes(tmp_path, monkeypatch, mnist_paths, criterion):
    monkeypatch.setenv("WASSMAP_MNIST_DIR", os.path.dirname(mnist_paths[0]))
    cfg = os.path.join(CONFIGS, "fig9_mnist_all.cfg")
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    rep = run_experiment(cfg, a)
    run_experiment(cfg, b, threads=2)
    files = ["embedding_wassmap_d4.csv", "embedding_isomap_knn10_d4.csv", "distances.csv", "labels.csv"]
    same = all(open(os.path.join(a, f)).read() == open(os.path.join(b, f)).read() for f in files)
    labels = load_csv(os.path.join(a, "labels.csv"))[:, 0]
    per_class = np.bincount(labels.astype(int)).tolist()
    emitted = {"wassmap_d4", "isomap_knn10_d4"} <= set(rep["embeddings"])
    ok = same and emitted and max(per_class) <= 50 and len(per_class) == 10
    criterion(
        "12", "MNIST all classes in R^4", ok,
        f"per class {per_class[0]}, both methods emitted {emitted}, byte-identical rerun {same}",
    )
    assert ok
