"""Synthetic image manifolds: base shapes and parametric families.

Two modes are supported. ``pushforward`` rasterizes the base shape once
and moves its atoms through each transformation, which is the exact
discrete family. ``raster`` rasterizes every transformed shape on a common
grid, as an imaging pipeline would.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch, EmptyShape, NonPositiveDilation
from .measure import AffineMap, DiscreteMeasure, GridImage, image_to_measure, pushforward

SHAPE_KINDS = ("disk", "ellipse", "rectangle", "annulus")
FAMILIES = ("translation", "dilation", "rotation", "deformation")
MODES = ("pushforward", "raster")


def _vec(v, name):
    a = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if a.ndim != 1 or not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be a finite vector")
    return a


@dataclass(frozen=True, eq=False)
class ShapeSpec:
    """Indicator shape used as a generating image.

    ``disk`` uses ``radius``; ``ellipse`` uses per-axis ``radii``;
    ``rectangle`` spans ``lower`` to ``upper``; ``annulus`` is the 2-D
    region between ellipses with ``radii`` (outer) and ``inner_radii``.
    All but the rectangle are centered at ``center``.
    """

    kind: str
    center: np.ndarray = None
    radii: np.ndarray = None
    inner_radii: np.ndarray = None
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        if self.kind == "rectangle":
            lo, hi = _vec(self.lower, "lower"), _vec(self.upper, "upper")
            if lo.shape != hi.shape:
                raise DimensionMismatch("rectangle corners differ in dimension")
            if np.any(lo >= hi):
                raise ValueError("rectangle endpoints must be ordered lower < upper")
            set_("lower", lo)
            set_("upper", hi)
            return
        r = _vec(1.0 if self.radii is None else self.radii, "radii")
        c = np.zeros(max(r.size, 2)) if self.center is None else _vec(self.center, "center")
        if r.size == 1:
            r = np.repeat(r, c.size)
        if r.shape != c.shape:
            raise DimensionMismatch("radii and center differ in dimension")
        if np.any(r <= 0):
            raise ValueError("radii must be positive")
        if self.kind == "disk" and np.ptp(r) != 0:
            raise ValueError("disk needs a single radius")
        set_("center", c)
        set_("radii", r)
        if self.kind == "annulus":
            if c.size != 2:
                raise DimensionMismatch("annulus is two-dimensional")
            ri = _vec(self.inner_radii, "inner_radii")
            if ri.shape != r.shape or np.any(ri <= 0) or np.any(ri >= r):
                raise ValueError("annulus inner radii must be positive and strictly inside the outer ones")
            set_("inner_radii", ri)

    @classmethod
    def disk(cls, radius=1.0, center=(0.0, 0.0)):
        return cls("disk", center=center, radii=radius)

    @classmethod
    def ellipse(cls, radii, center=(0.0, 0.0)):
        return cls("ellipse", center=center, radii=radii)

    @classmethod
    def rectangle(cls, lower, upper):
        return cls("rectangle", lower=lower, upper=upper)

    @classmethod
    def annulus(cls, outer=(1.0, 0.6), inner=(0.6, 0.3), center=(0.0, 0.0)):
        return cls("annulus", center=center, radii=outer, inner_radii=inner)

    @property
    def dim(self) -> int:
        return self.lower.size if self.kind == "rectangle" else self.center.size

    def bounds(self):
        if self.kind == "rectangle":
            return self.lower, self.upper
        return self.center - self.radii, self.center + self.radii

    def contains(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"points in R^{x.shape[-1]}, shape in R^{self.dim}")
        if self.kind == "rectangle":
            return np.all((x >= self.lower) & (x <= self.upper), axis=-1)
        z = (x - self.center) / self.radii
        inside = np.sum(z**2, axis=-1) <= 1.0
        if self.kind == "annulus":
            zi = (x - self.center) / self.inner_radii
            inside &= np.sum(zi**2, axis=-1) > 1.0
        return inside


@dataclass(frozen=True)
class Frame:
    """Axis-aligned box ``lower..upper`` split into ``resolution`` pixels per axis."""

    lower: tuple
    upper: tuple
    resolution: tuple

    def __post_init__(self):
        lo, hi = _vec(self.lower, "frame lower"), _vec(self.upper, "frame upper")
        res = np.atleast_1d(np.asarray(self.resolution, dtype=np.int64))
        if res.size == 1:
            res = np.repeat(res, lo.size)
        if not (lo.shape == hi.shape == res.shape):
            raise DimensionMismatch("frame corners and resolution differ in dimension")
        if np.any(lo >= hi) or np.any(res < 1):
            raise ValueError("frame needs lower < upper and positive resolution")
        object.__setattr__(self, "lower", tuple(lo.tolist()))
        object.__setattr__(self, "upper", tuple(hi.tolist()))
        object.__setattr__(self, "resolution", tuple(res.tolist()))

    @classmethod
    def square(cls, half_width, resolution, dim=2):
        return cls((-half_width,) * dim, (half_width,) * dim, (resolution,) * dim)

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / np.array(self.resolution)

    def grid(self, values=None) -> GridImage:
        v = np.zeros(self.resolution) if values is None else np.asarray(values).reshape(self.resolution)
        return GridImage(v, np.array(self.lower), self.spacing)

    def centers(self) -> np.ndarray:
        return self.grid().pixel_centers()


def rasterize(indicator, frame: Frame) -> DiscreteMeasure:
    """Uniform measure on pixels whose center satisfies ``indicator``."""
    inside = indicator(frame.centers()).astype(np.float64)
    if not np.any(inside):
        raise EmptyShape("no pixel center falls inside the shape")
    return image_to_measure(frame.grid(inside))


def base_measure(shape: ShapeSpec, frame: Frame) -> DiscreteMeasure:
    """Center-point rasterization of ``shape`` on ``frame``."""
    if shape.dim != len(frame.lower):
        raise DimensionMismatch("shape and frame differ in dimension")
    lo, hi = shape.bounds()
    if np.any(lo < np.array(frame.lower)) or np.any(hi > np.array(frame.upper)):
        raise ValueError("frame does not contain the shape")
    return rasterize(shape.contains, frame)


def translation_family(base: DiscreteMeasure, thetas) -> list[DiscreteMeasure]:
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    if thetas.shape[1] != base.ambient_dim:
        raise DimensionMismatch(f"translations in R^{thetas.shape[1]}, measure in R^{base.ambient_dim}")
    return [pushforward(base, AffineMap.translation(t)) for t in thetas]


def _check_dilations(thetas, dim):
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    if thetas.shape[1] != dim:
        raise DimensionMismatch(f"dilations in R^{thetas.shape[1]}, measure in R^{dim}")
    for k, t in enumerate(thetas):
        if np.any(t <= 0):
            raise NonPositiveDilation(f"dilation parameter {k} = {t.tolist()} is not strictly positive", k)
    return thetas


def dilation_family(
    base,
    thetas,
    mode: str = "pushforward",
    frame: Frame | None = None,
) -> list[DiscreteMeasure]:
    """Dilates x -> theta * x (componentwise) of a base measure or shape.

    In ``pushforward`` mode ``base`` is a DiscreteMeasure (or a ShapeSpec,
    rasterized on ``frame`` first). In ``raster`` mode ``base`` must be a
    ShapeSpec and each dilated shape is rasterized on ``frame``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "raster":
        if not isinstance(base, ShapeSpec) or frame is None:
            raise ValueError("raster mode needs a ShapeSpec and a frame")
        thetas = _check_dilations(thetas, base.dim)
        return [rasterize(lambda x, t=t: base.contains(x / t), frame) for t in thetas]
    if isinstance(base, ShapeSpec):
        if frame is None:
            raise ValueError("a ShapeSpec base needs a frame")
        base = base_measure(base, frame)
    thetas = _check_dilations(thetas, base.ambient_dim)
    return [pushforward(base, AffineMap.dilation(t)) for t in thetas]


def rotation_family(base, angles, mode: str = "pushforward", frame: Frame | None = None) -> list[DiscreteMeasure]:
    """Counterclockwise rotations about the origin."""
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "raster":
        if not isinstance(base, ShapeSpec) or frame is None:
            raise ValueError("raster mode needs a ShapeSpec and a frame")
        # a pixel belongs to the rotated shape when its back-rotated center does
        return [rasterize(lambda x, a=a: base.contains(AffineMap.rotation(-a)(x)), frame) for a in angles]
    if isinstance(base, ShapeSpec):
        if frame is None:
            raise ValueError("a ShapeSpec base needs a frame")
        base = base_measure(base, frame)
    if base.ambient_dim != 2:
        raise DimensionMismatch("rotations are planar")
    return [pushforward(base, AffineMap.rotation(a)) for a in angles]


def deformation_angle(x, theta) -> np.ndarray:
    """alpha(x) = theta1 * cos(x1 + theta2 * x2) * cos(x2)."""
    t1, t2 = theta
    return t1 * np.cos(x[:, 0] + t2 * x[:, 1]) * np.cos(x[:, 1])


def deform_points(x, theta) -> np.ndarray:
    """Rotate each point by its own angle alpha(x)."""
    a = deformation_angle(x, theta)
    c, s = np.cos(a), np.sin(a)
    return np.column_stack([c * x[:, 0] - s * x[:, 1], s * x[:, 0] + c * x[:, 1]])


def grid_deformation_family(shape: ShapeSpec, params, frame: Frame) -> list[DiscreteMeasure]:
    """Backward-warped rasters f(x) = f0(T(x)), T rotating x by alpha(x)."""
    params = np.atleast_2d(np.asarray(params, dtype=np.float64))
    if params.shape[1] != 2 or shape.dim != 2:
        raise DimensionMismatch("deformation family is planar with two parameters")
    out = []
    for k, th in enumerate(params):
        try:
            out.append(rasterize(lambda x, th=th: shape.contains(deform_points(x, th)), frame))
        except EmptyShape as exc:
            raise EmptyShape(f"deformation parameter {k} = {th.tolist()} leaves the frame empty") from exc
    return out


def uniform_grid(*axes) -> np.ndarray:
    """Inclusive uniform grid; each axis is ``(lo, hi, count)``.

    Rows are ordered with the first axis varying slowest.
    """
    lines = [np.linspace(lo, hi, int(n)) for lo, hi, n in axes]
    mesh = np.meshgrid(*lines, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def uniform_angles(n: int) -> np.ndarray:
    """k * 2 pi / n for k = 0..n-1, so every angle lies in [0, 2 pi)."""
    return 2 * np.pi * np.arange(n) / n


@dataclass(frozen=True, eq=False)
class ManifoldSpec:
    """Declarative description of a synthetic family.

    ``params`` has one row per family member: translation vectors,
    dilation factors, rotation angles (one column) or deformation
    parameters.
    """

    base: ShapeSpec
    family: str
    params: np.ndarray
    frame: Frame
    mode: str = "pushforward"
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        p = np.asarray(self.params, dtype=np.float64)
        if p.ndim == 1:
            p = p[:, None]
        if p.shape[0] == 0:
            raise ValueError("parameter list is empty")
        if self.family == "dilation":
            _check_dilations(p, self.base.dim)
        if self.family == "rotation" and np.any((p < 0) | (p >= 2 * np.pi)):
            raise ValueError("rotation angles must lie in [0, 2 pi)")
        object.__setattr__(self, "params", p)

    def generate(self) -> list[DiscreteMeasure]:
        if self.family == "deformation":
            return grid_deformation_family(self.base, self.params, self.frame)
        if self.family == "rotation":
            return rotation_family(self.base, self.params[:, 0], self.mode, self.frame)
        if self.family == "dilation":
            return dilation_family(self.base, self.params, self.mode, self.frame)
        if self.mode == "raster":
            # translated shapes rasterized on the common frame
            return [rasterize(lambda x, t=t: self.base.contains(x - t), self.frame) for t in self.params]
        return translation_family(base_measure(self.base, self.frame), self.params)


SECTION = "experiment"


def read_config(path_or_text, *, is_text: bool = False) -> dict[str, str]:
    """Parse ``key = value`` lines (``#`` comments) into a dict."""
    if is_text:
        text = path_or_text
    else:
        try:
            with open(path_or_text) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path_or_text}: {exc}") from exc
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(f"[{SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path_or_text if not is_text else ''}: {exc}") from exc
    return dict(cp[SECTION])


def floats(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.replace(",", " ").split()])


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:n, lo:hi:n`` per axis; ``|`` joins disjoint pieces."""
    pieces = []
    for piece in text.split("|"):
        axes = []
        for ax in piece.split(","):
            parts = ax.strip().split(":")
            if len(parts) != 3:
                raise ConfigError(f"grid axis {ax!r} is not lo:hi:count")
            axes.append((float(parts[0]), float(parts[1]), int(parts[2])))
        pieces.append(uniform_grid(*axes))
    return np.vstack(pieces)


def shape_from_config(cfg: dict) -> ShapeSpec:
    kind = cfg.get("shape", "disk")
    try:
        if kind == "rectangle":
            return ShapeSpec.rectangle(floats(cfg["lower"]), floats(cfg["upper"]))
        center = floats(cfg.get("center", "0 0"))
        if kind == "disk":
            return ShapeSpec.disk(float(cfg.get("radius", "1")), center)
        if kind == "ellipse":
            return ShapeSpec.ellipse(floats(cfg["radii"]), center)
        if kind == "annulus":
            return ShapeSpec.annulus(
                floats(cfg.get("radii", "1 0.6")), floats(cfg.get("inner_radii", "0.6 0.3")), center
            )
    except KeyError as exc:
        raise ConfigError(f"shape {kind!r} needs key {exc.args[0]!r}") from exc
    raise ConfigError(f"unknown shape {kind!r}")


def frame_from_config(cfg: dict) -> Frame:
    """``frame = xlo xhi ylo yhi``; ``resolution = nx ny`` (or one value)."""
    f = floats(cfg.get("frame", "-2 2 -2 2"))
    if f.size % 2:
        raise ConfigError("frame needs lo hi pairs")
    res = [int(v) for v in floats(cfg.get("resolution", "64"))]
    return Frame(tuple(f[0::2]), tuple(f[1::2]), tuple(res))


def manifold_from_config(cfg: dict) -> ManifoldSpec:
    family = cfg.get("family")
    if family not in FAMILIES:
        raise ConfigError(f"family must be one of {FAMILIES}, got {family!r}")
    if family == "rotation":
        if "angles" in cfg:
            params = uniform_angles(int(cfg["angles"]))
        else:
            params = floats(cfg["angle_list"])
    else:
        if "grid" not in cfg:
            raise ConfigError(f"{family} family needs a 'grid' key")
        params = parse_grid(cfg["grid"])
    mode = cfg.get("mode", "raster")
    try:
        return ManifoldSpec(shape_from_config(cfg), family, params, frame_from_config(cfg), mode, int(cfg.get("seed", 0)))
    except NonPositiveDilation:
        raise
    except (ValueError, DimensionMismatch) as exc:
        raise ConfigError(str(exc)) from exc
