"""Command-line driver: generate, distances, embed, isomap, report, run-all.

Every stage reads and writes plain files inside one experiment directory::

    experiment.json      resolved configuration
    measures/NNNN.json   one measure per family member
    truth.csv            ground-truth parameters (synthetic families)
    labels.csv           class labels (MNIST)
    vectors.npy          pixel vectors for the ISOMAP baseline
    pair_cache.jsonl     W2^2 per measure-digest pair
    distances.csv/.json  W2^2 matrix
    embedding_<tag>.csv/.json/.svg
    report.json/.txt
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .embedding import Embedding, classical_mds
from .errors import ConfigError, MissingArtifacts, WassmapError
from .evalign import circle_fit, knn_separation, procrustes
from .ingest import load_idx, parse_per_class, subsample, to_measures
from .isomap import build_graph, geodesic_squared_distances
from .measure import DiscreteMeasure, marginal_second_moments
from .synth import base_measure, floats, manifold_from_config, read_config
from .transport import PairCache, SquaredDistanceMatrix, pairwise_w2_squared, solve_w2

log = logging.getLogger("wassmap")

METHODS = ("wassmap", "isomap", "both")


def _flag(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "yes")


@dataclass
class ExperimentConfig:
    """Resolved experiment settings; see ``configs/*.cfg`` for the key set."""

    name: str
    raw: dict
    method: str = "wassmap"
    embed_dims: list = field(default_factory=lambda: [2])
    epsilons: list = field(default_factory=list)
    knn: list = field(default_factory=list)
    with_scale: bool = False
    truth_scale: str = "none"
    seed: int = 0
    threads: int = 1
    largest_component: bool = False

    @property
    def is_mnist(self) -> bool:
        return self.raw.get("family") == "mnist"

    @classmethod
    def from_dict(cls, raw: dict, overrides: dict | None = None) -> "ExperimentConfig":
        raw = dict(raw)
        for k, v in (overrides or {}).items():
            if v is not None:
                raw[k] = str(v)
        method = raw.get("method", "wassmap")
        if method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {method!r}")
        dims = [int(v) for v in floats(raw.get("embed_dim", "2"))]
        if not dims or min(dims) < 1:
            raise ConfigError("embed_dim must list integers >= 1")
        truth_scale = raw.get("truth_scale", "none")
        if truth_scale not in ("none", "moments"):
            raise ConfigError("truth_scale must be 'none' or 'moments'")
        return cls(
            name=raw.get("name", "experiment"),
            raw=raw,
            method=method,
            embed_dims=dims,
            epsilons=[float(v) for v in floats(raw.get("epsilon", ""))],
            knn=[int(v) for v in floats(raw.get("knn", ""))],
            with_scale=_flag(raw.get("with_scale", "false")),
            truth_scale=truth_scale,
            seed=int(raw.get("seed", 0)),
            threads=int(raw.get("threads", 1)),
            largest_component=_flag(raw.get("largest_component", "false")),
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _load_config(out: str) -> ExperimentConfig:
    path = os.path.join(out, "experiment.json")
    if not os.path.exists(path):
        raise MissingArtifacts([path])
    with open(path) as fh:
        doc = json.load(fh)
    return ExperimentConfig.from_dict(doc["raw"])


def _write(path: str, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


def _record_time(out: str, stage: str, seconds: float) -> None:
    path = os.path.join(out, "timings.json")
    doc = {}
    if os.path.exists(path):
        with open(path) as fh:
            doc = json.load(fh)
    doc[stage] = round(seconds, 3)
    _write(path, json.dumps(doc, indent=2, sort_keys=True))


def _write_matrix_csv(path: str, rows) -> None:
    _write(path, "".join(",".join(f"{v:.17g}" for v in r) + "\n" for r in np.atleast_2d(rows)))


def _read_matrix_csv(path: str) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def measures_to_vectors(measures, spacing) -> np.ndarray:
    """Bin measures onto one common pixel grid, scaled so each image peaks at 1."""
    spacing = np.asarray(spacing, dtype=np.float64)
    lo = np.min([m.locations.min(0) for m in measures], axis=0)
    hi = np.max([m.locations.max(0) for m in measures], axis=0)
    shape = np.floor((hi - lo) / spacing + 0.5).astype(np.int64) + 1
    out = np.zeros((len(measures), int(np.prod(shape))))
    for k, m in enumerate(measures):
        idx = np.clip(np.floor((m.locations - lo) / spacing + 0.5).astype(np.int64), 0, shape - 1)
        flat = np.ravel_multi_index(idx.T, shape)
        np.add.at(out[k], flat, m.weights)
        out[k] /= out[k].max()
    return out


# stages


def cmd_generate(config_path: str, out: str, overrides: dict | None = None) -> dict:
    """Write the measure family, ground truth and pixel vectors."""
    t0 = time.perf_counter()
    cfg = ExperimentConfig.from_dict(read_config(config_path), overrides)
    os.makedirs(os.path.join(out, "measures"), exist_ok=True)
    for stale in glob.glob(os.path.join(out, "measures", "*.json")):
        os.remove(stale)
    raw = cfg.raw
    if cfg.is_mnist:
        data_dir = os.environ.get("WASSMAP_MNIST_DIR", raw.get("mnist_dir", "data/mnist"))
        images = os.path.join(data_dir, raw.get("images", "train-images-idx3-ubyte"))
        labels = os.path.join(data_dir, raw.get("labels", "train-labels-idx1-ubyte"))
        missing = [p for p in (images, labels) if not os.path.exists(p)]
        if missing:
            raise MissingArtifacts(missing)
        full = load_idx(images, labels)
        sub = subsample(full, parse_per_class(raw.get("per_class", "0:100,1:100")), cfg.seed)
        measures = to_measures(sub)
        vectors = sub.vectors()
        _write_matrix_csv(os.path.join(out, "labels.csv"), sub.labels[:, None])
        _write_matrix_csv(os.path.join(out, "source_indices.csv"), sub.indices[:, None])
        info = {"n": len(measures), "source_digest": full.source_digest}
    else:
        spec = manifold_from_config(raw)
        measures = spec.generate()
        truth = spec.params.copy()
        if cfg.truth_scale == "moments":
            base = base_measure(spec.base, spec.frame)
            truth = truth * np.sqrt(marginal_second_moments(base))
        vectors = measures_to_vectors(measures, spec.frame.spacing)
        _write_matrix_csv(os.path.join(out, "truth.csv"), truth)
        _write_matrix_csv(os.path.join(out, "params.csv"), spec.params)
        info = {"n": len(measures), "family": spec.family, "mode": spec.mode}
    width = max(4, len(str(len(measures))))
    for k, m in enumerate(measures):
        _write(os.path.join(out, "measures", f"{k:0{width}d}.json"), m.to_json())
    np.save(os.path.join(out, "vectors.npy"), vectors)
    _write(os.path.join(out, "experiment.json"), cfg.to_json())
    _record_time(out, "generate", time.perf_counter() - t0)
    log.info("generated %d measures in %s", len(measures), out)
    return info


def load_measures(out: str) -> list[DiscreteMeasure]:
    files = sorted(glob.glob(os.path.join(out, "measures", "*.json")))
    if not files:
        raise MissingArtifacts([os.path.join(out, "measures", "*.json")])
    measures = []
    for f in files:
        with open(f) as fh:
            measures.append(DiscreteMeasure.from_json(fh.read()))
    return measures


def cmd_distances(out: str, threads: int = 1, cache_path: str | None = None) -> dict:
    """Pairwise W2^2 with a digest-keyed pair cache; returns solve statistics."""
    t0 = time.perf_counter()
    measures = load_measures(out)
    cache = PairCache(cache_path or os.path.join(out, "pair_cache.jsonl"))
    calls = [0]

    def solver(a, b):
        calls[0] += 1
        return solve_w2(a, b, certify=False).cost

    w = pairwise_w2_squared(measures, threads=threads, cache=cache, solver=solver)
    _write(os.path.join(out, "distances.csv"), w.to_csv())
    _write(os.path.join(out, "distances.json"), json.dumps({"n": w.size, "kind": w.kind}))
    _record_time(out, "distances", time.perf_counter() - t0)
    log.info("distances: %d solver calls, %d cached pairs", calls[0], len(cache))
    return {"n": w.size, "solver_calls": calls[0]}


def load_distances(out: str) -> SquaredDistanceMatrix:
    path = os.path.join(out, "distances.csv")
    if not os.path.exists(path):
        raise MissingArtifacts([path])
    with open(path) as fh:
        return SquaredDistanceMatrix.from_csv(fh.read())


def _load_truth_labels(out: str):
    tp, lp = os.path.join(out, "truth.csv"), os.path.join(out, "labels.csv")
    truth = _read_matrix_csv(tp) if os.path.exists(tp) else None
    labels = _read_matrix_csv(lp)[:, 0].astype(int) if os.path.exists(lp) else None
    return truth, labels


def _save_embedding(out: str, tag: str, emb: Embedding, title: str, kept=None) -> None:
    _write(os.path.join(out, f"embedding_{tag}.csv"), emb.to_csv())
    diag = emb.diagnostics()
    if kept is not None:
        diag["kept_indices"] = [int(k) for k in kept]
    _write(os.path.join(out, f"embedding_{tag}.json"), json.dumps(diag, indent=2))
    truth, labels = _load_truth_labels(out)
    idx = np.arange(emb.n) if kept is None else np.asarray(kept)
    overlay = None
    if truth is not None and truth.shape[1] == emb.dim and emb.dim >= 2:
        t = truth[idx]
        overlay = procrustes(t, emb.points, with_scale=True).apply(t)
    lab = None if labels is None else labels[idx]
    _write(os.path.join(out, f"embedding_{tag}.svg"), scatter_svg(emb.points, lab, overlay, title))


def cmd_embed(out: str, embed_dim: int) -> Embedding:
    t0 = time.perf_counter()
    emb = classical_mds(load_distances(out), embed_dim)
    _save_embedding(out, f"wassmap_d{embed_dim}", emb, f"Wassmap d={embed_dim}")
    _record_time(out, f"embed_wassmap_d{embed_dim}", time.perf_counter() - t0)
    return emb


def isomap_tag(embed_dim: int, epsilon=None, knn=None) -> str:
    rule = f"eps{epsilon:g}" if epsilon is not None else f"knn{knn}"
    return f"isomap_{rule}_d{embed_dim}"


def cmd_isomap(out: str, embed_dim: int, epsilon=None, knn=None, largest_component: bool = False):
    """ISOMAP on the stored pixel vectors; a disconnected graph is recorded, not fatal."""
    t0 = time.perf_counter()
    path = os.path.join(out, "vectors.npy")
    if not os.path.exists(path):
        raise MissingArtifacts([path])
    vectors = np.load(path)
    tag = isomap_tag(embed_dim, epsilon, knn)
    g = build_graph(vectors, epsilon=epsilon, k=knn)
    _write(os.path.join(out, f"graph_{tag}.txt"), g.to_edge_list())
    status = {"tag": tag, "edges": g.n_edges}
    try:
        if largest_component:
            w, kept = geodesic_squared_distances(g, restrict_to_largest=True)
        else:
            w, kept = geodesic_squared_distances(g), None
        if w.size <= embed_dim:
            raise ConfigError(f"largest component has {w.size} nodes, cannot embed in R^{embed_dim}")
        emb = classical_mds(w, embed_dim)
        _save_embedding(out, tag, emb, f"ISOMAP {tag}", kept)
        status["embedded"] = int(emb.n)
    except WassmapError as exc:
        status["error"] = f"{type(exc).__name__}: {exc}"
        log.warning("%s: %s", tag, status["error"])
    _write(os.path.join(out, f"status_{tag}.json"), json.dumps(status, indent=2))
    _record_time(out, f"embed_{tag}", time.perf_counter() - t0)
    return status


def _embedding_files(out: str):
    return sorted(glob.glob(os.path.join(out, "embedding_*.csv")))


def cmd_report(out: str, with_scale: bool | None = None) -> dict:
    """Summarize recovery errors, spectra, 1-NN accuracy and runtimes."""
    need = [os.path.join(out, "experiment.json")]
    missing = [p for p in need if not os.path.exists(p)]
    files = _embedding_files(out)
    if not files:
        missing.append(os.path.join(out, "embedding_*.csv"))
    if missing:
        raise MissingArtifacts(missing)
    cfg = _load_config(out)
    scale = cfg.with_scale if with_scale is None else with_scale
    truth, labels = _load_truth_labels(out)
    report = {"name": cfg.name, "with_scale": scale, "embeddings": {}}
    for f in files:
        tag = os.path.basename(f)[len("embedding_") : -len(".csv")]
        with open(f) as fh, open(f[:-4] + ".json") as jh:
            csv_text, diag = fh.read(), json.load(jh)
        emb = Embedding.from_files(csv_text, json.dumps(diag))
        idx = np.asarray(diag.get("kept_indices", range(emb.n)))
        entry = {
            "n": emb.n,
            "d": emb.dim,
            "eigenvalues": diag["eigenvalues"],
            "discarded_top": diag["discarded_top"],
            "clamped": diag["clamped"],
        }
        if truth is not None and truth.shape[1] == emb.dim:
            al = procrustes(emb.points, truth[idx], with_scale=scale)
            entry["recovery_error"] = al.normalized_error
            entry["alignment"] = json.loads(al.to_json())
            # scale-free comparison, fair to methods with other units
            entry["recovery_error_scaled"] = procrustes(emb.points, truth[idx], with_scale=True).normalized_error
            # embedding units per truth unit
            entry["recovered_scale"] = procrustes(truth[idx], emb.points, with_scale=True).scale
        if truth is not None and truth.shape[1] == 1 and emb.dim == 2 and cfg.raw.get("family") == "rotation":
            _, radius, dev = circle_fit(emb.points)
            entry["circle_radius"] = radius
            entry["circle_max_relative_deviation"] = dev
        if labels is not None and np.unique(labels[idx]).size >= 2:
            entry["knn1_accuracy"] = knn_separation(emb.points, labels[idx], 1)
        report["embeddings"][tag] = entry
    for sf in sorted(glob.glob(os.path.join(out, "status_*.json"))):
        with open(sf) as fh:
            st = json.load(fh)
        if "error" in st:
            report["embeddings"].setdefault(st["tag"], {})["error"] = st["error"]
    tpath = os.path.join(out, "timings.json")
    if os.path.exists(tpath):
        with open(tpath) as fh:
            report["runtimes_s"] = json.load(fh)
    _write(os.path.join(out, "report.json"), json.dumps(report, indent=2, sort_keys=True))
    _write(os.path.join(out, "report.txt"), format_report(report))
    return report


def format_report(report: dict) -> str:
    lines = [f"experiment {report['name']}"]
    for tag, e in report["embeddings"].items():
        parts = [tag]
        if "error" in e:
            parts.append(f"failed ({e['error']})")
        if "recovery_error" in e:
            parts.append(f"recovery error {e['recovery_error']:.3e}")
            parts.append(f"recovered scale {e['recovered_scale']:.6g}")
            parts.append(f"with fitted scale {e['recovery_error_scaled']:.3e}")
        if "knn1_accuracy" in e:
            parts.append(f"1-NN accuracy {e['knn1_accuracy']:.4f}")
        if "circle_max_relative_deviation" in e:
            parts.append(f"circle deviation {e['circle_max_relative_deviation']:.3e}")
        if e.get("clamped"):
            parts.append(f"clamped eigenvalues {e['clamped']}")
        lines.append("  " + ", ".join(parts))
    for stage, sec in report.get("runtimes_s", {}).items():
        lines.append(f"  time {stage}: {sec:.2f} s")
    return "\n".join(lines) + "\n"


def run_experiment(config_path: str, out: str, overrides: dict | None = None, threads: int | None = None) -> dict:
    cmd_generate(config_path, out, overrides)
    cfg = _load_config(out)
    if cfg.method in ("wassmap", "both"):
        cmd_distances(out, threads=threads or cfg.threads)
        for d in cfg.embed_dims:
            cmd_embed(out, d)
    if cfg.method in ("isomap", "both"):
        for d in cfg.embed_dims:
            for eps in cfg.epsilons:
                cmd_isomap(out, d, epsilon=eps, largest_component=cfg.largest_component)
            for k in cfg.knn:
                cmd_isomap(out, d, knn=k, largest_component=cfg.largest_component)
    return cmd_report(out)


# svg

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def scatter_svg(points, labels=None, overlay=None, title: str = "", size: int = 480) -> str:
    """Dependency-free scatter of the first two coordinates."""
    p = np.asarray(points, dtype=np.float64)
    if p.shape[1] == 1:
        p = np.column_stack([p[:, 0], np.zeros(p.shape[0])])
    p = p[:, :2]
    allp = p if overlay is None else np.vstack([p, np.asarray(overlay)[:, :2]])
    lo, hi = allp.min(0), allp.max(0)
    span = float(max(np.max(hi - lo), 1e-12))
    pad = 40
    scale = (size - 2 * pad) / span
    mid = (lo + hi) / 2

    def xy(q):
        return pad + (size - 2 * pad) / 2 + (q[0] - mid[0]) * scale, size - pad - (size - 2 * pad) / 2 - (q[1] - mid[1]) * scale

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<line x1="{pad}" y1="{size - pad}" x2="{size - pad}" y2="{size - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{size - pad}" stroke="black"/>',
        f'<text x="{size / 2:.1f}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>',
        f'<text x="{pad}" y="{size - pad + 16}" font-family="sans-serif" font-size="10">x [{lo[0]:.3g}, {hi[0]:.3g}]</text>',
        f'<text x="4" y="{pad - 6}" font-family="sans-serif" font-size="10">y [{lo[1]:.3g}, {hi[1]:.3g}]</text>',
    ]
    if overlay is not None:
        for q in np.asarray(overlay)[:, :2]:
            cx, cy = xy(q)
            out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="5" fill="none" stroke="#999999"/>')
    for k, q in enumerate(p):
        color = PALETTE[int(labels[k]) % len(PALETTE)] if labels is not None else PALETTE[0]
        cx, cy = xy(q)
        out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# argparse


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wassmap", description="Wasserstein isometric mapping experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=False):
        if config:
            p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", required=True, help="experiment output directory")

    def overrides(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--mode", choices=("pushforward", "raster"))
        p.add_argument("--embed-dim", type=int)

    p = sub.add_parser("generate", help="write measures and ground truth")
    common(p, config=True)
    overrides(p)

    p = sub.add_parser("distances", help="pairwise W2^2 matrix")
    common(p)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--cache", help="shared pair cache file (default: inside --out)")

    p = sub.add_parser("embed", help="classical MDS of the W2^2 matrix")
    common(p)
    p.add_argument("--embed-dim", type=int, default=2)

    p = sub.add_parser("isomap", help="ISOMAP baseline on pixel vectors")
    common(p)
    p.add_argument("--embed-dim", type=int, default=2)
    rule = p.add_mutually_exclusive_group(required=True)
    rule.add_argument("--epsilon", type=float)
    rule.add_argument("--knn", type=int)
    p.add_argument("--largest-component", action="store_true", help="embed only the largest connected component")

    p = sub.add_parser("report", help="summarize an experiment directory")
    common(p)
    p.add_argument("--with-scale", action="store_true", default=None)

    p = sub.add_parser("run-all", help="run every config in a directory")
    p.add_argument("--config", nargs="*", help="config files (default: configs/*.cfg)")
    p.add_argument("--configs-dir", default="configs")
    p.add_argument("--out", required=True, help="root output directory")
    p.add_argument("--threads", type=int, help="solver threads (default: per config)")
    overrides(p)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    ov = {}
    if hasattr(args, "seed"):
        ov = {"seed": args.seed, "mode": args.mode, "embed_dim": args.embed_dim}
    try:
        if args.command == "generate":
            print(json.dumps(cmd_generate(args.config, args.out, ov)))
        elif args.command == "distances":
            print(json.dumps(cmd_distances(args.out, args.threads, args.cache)))
        elif args.command == "embed":
            emb = cmd_embed(args.out, args.embed_dim)
            print(json.dumps(emb.diagnostics()))
        elif args.command == "isomap":
            print(json.dumps(cmd_isomap(args.out, args.embed_dim, args.epsilon, args.knn, args.largest_component)))
        elif args.command == "report":
            print(format_report(cmd_report(args.out, args.with_scale)), end="")
        elif args.command == "run-all":
            configs = args.config or sorted(glob.glob(os.path.join(args.configs_dir, "*.cfg")))
            if not configs:
                raise MissingArtifacts([os.path.join(args.configs_dir, "*.cfg")])
            for c in configs:
                name = os.path.splitext(os.path.basename(c))[0]
                t0 = time.perf_counter()
                rep = run_experiment(c, os.path.join(args.out, name), ov, args.threads)
                print(format_report(rep), end="")
                print(f"  total {time.perf_counter() - t0:.1f} s")
    except WassmapError as exc:
        print(f"wassmap {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
