"""Frequency sweeps, error metrics and the benchmark experiment driver."""

from __future__ import annotations

import contextlib
import csv
import io
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .data import InterpolationData, tangential_sample
from .errors import DataError, SingularKernel
from .loewner import loewner_realization
from .models import build_named_model
from .solver import realize
from .structure import StructuredRealization

__all__ = [
    "FrequencyGrid",
    "BodeSamples",
    "ErrorReport",
    "ExperimentResult",
    "BANDS",
    "evaluate_grid",
    "bode_grid",
    "error_metrics",
    "driving_points",
    "extra_points",
    "experiment_data",
    "run_experiment",
    "write_text_atomic",
    "bode_csv",
]

# frequency bands of the benchmark examples, in rad/s
BANDS = {
    "delay": (1.0, 100.0),
    "rod": (0.1, 1e3),
    "duct": (0.1, 10.0),
    "beam": (1e-5, 1e2),
    "toy": (0.1, 10.0),
}
GRID_COUNT = 500


@dataclass(frozen=True)
class FrequencyGrid:
    """Points ``i omega`` for ``omega`` log- or linearly spaced in ``[start, end]``."""

    kind: str
    start: float
    end: float
    count: int

    def __post_init__(self):
        if self.kind not in ("log", "linear"):
            raise DataError(f"grid kind must be 'log' or 'linear', got {self.kind!r}")
        if int(self.count) != self.count or self.count < 2:
            raise DataError("a grid needs at least two points")
        if not (np.isfinite(self.start) and np.isfinite(self.end)) or self.end <= self.start:
            raise DataError("grid needs finite start < end")
        if self.kind == "log" and self.start <= 0:
            raise DataError("log grid needs start > 0")

    @classmethod
    def log(cls, start, end, count=GRID_COUNT):
        return cls("log", float(start), float(end), int(count))

    @classmethod
    def linear(cls, start, end, count=GRID_COUNT):
        return cls("linear", float(start), float(end), int(count))

    @classmethod
    def parse(cls, text: str) -> "FrequencyGrid":
        """Read ``"log:a:b:count"`` or ``"linear:a:b:count"``."""
        parts = text.strip().split(":")
        if len(parts) != 4:
            raise DataError(f"grid {text!r} is not kind:start:end:count")
        try:
            return cls(parts[0], float(parts[1]), float(parts[2]), int(parts[3]))
        except ValueError as exc:
            raise DataError(f"bad grid {text!r}: {exc}") from None

    @property
    def omega(self) -> np.ndarray:
        if self.kind == "log":
            return np.logspace(np.log10(self.start), np.log10(self.end), self.count)
        return np.linspace(self.start, self.end, self.count)

    @property
    def points(self) -> np.ndarray:
        return 1j * self.omega

    def to_text(self):
        return f"{self.kind}:{self.start!r}:{self.end!r}:{self.count}"


def _one(evaluator, s):
    return np.atleast_2d(np.asarray(evaluator(s), dtype=complex))


def evaluate_grid(evaluator: Callable, points, workers: Optional[int] = None):
    """Evaluate at every point.

    Returns
    -------
    values : (N, p, m) complex
        NaN where the evaluator raised :class:`SingularKernel`.
    singular : (N,) bool

    Raises
    ------
    SingularKernel
        If no point evaluates and the output shape is unknown.
    """
    points = np.asarray(points, complex).ravel()

    def task(s):
        try:
            return _one(evaluator, s)
        except SingularKernel:
            return None

    if workers is not None and workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(task, points))
    else:
        out = [task(s) for s in points]
    good = [v for v in out if v is not None]
    if good:
        shape = good[0].shape
    elif hasattr(evaluator, "p") and hasattr(evaluator, "m"):
        shape = (evaluator.p, evaluator.m)
    else:
        raise SingularKernel(complex(points[0]), 0.0)
    values = np.full((len(points),) + shape, np.nan + 0j)
    singular = np.zeros(len(points), bool)
    for i, v in enumerate(out):
        if v is None:
            singular[i] = True
        else:
            values[i] = v
    return values, singular


def _grid_points(grid):
    if isinstance(grid, FrequencyGrid):
        return grid.points
    return np.asarray(grid, complex).ravel()


@dataclass(frozen=True, eq=False)
class BodeSamples:
    """Frequency response with magnitude in dB and unwrapped phase in degrees."""

    points: np.ndarray
    values: np.ndarray
    magnitude_db: np.ndarray
    phase_deg: np.ndarray
    singular: np.ndarray

    @property
    def omega(self):
        return self.points.imag


def _unwrap_finite(phase):
    out = np.full_like(phase, np.nan)
    ok = np.isfinite(phase)
    if ok.any():
        out[ok] = np.unwrap(phase[ok])
    return out


def bode_grid(evaluator: Callable, grid, workers: Optional[int] = None) -> BodeSamples:
    """Sweep ``evaluator`` over ``grid``; singular points are flagged, not fatal."""
    pts = _grid_points(grid)
    vals, sing = evaluate_grid(evaluator, pts, workers)
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = 20.0 * np.log10(np.abs(vals))
    ph = np.angle(vals)
    ph = np.apply_along_axis(_unwrap_finite, 0, ph)
    return BodeSamples(pts, vals, mag, np.degrees(ph), sing)


@dataclass(frozen=True, eq=False)
class ErrorReport:
    """Pointwise errors on a grid and the sampled H-infinity proxy."""

    points: np.ndarray
    abs_error: np.ndarray
    rel_error: np.ndarray
    max_abs: float
    max_rel: float
    argmax: complex
    singular: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))

    @property
    def median_abs(self):
        return float(np.median(self.abs_error))

    @property
    def median_rel(self):
        return float(np.median(self.rel_error))

    def to_dict(self):
        return {
            "max_abs": self.max_abs,
            "max_rel": self.max_rel,
            "argmax": [self.argmax.real, self.argmax.imag],
            "median_abs": self.median_abs,
            "median_rel": self.median_rel,
            "points": [[z.real, z.imag] for z in self.points.tolist()],
            "abs_error": self.abs_error.tolist(),
            "rel_error": self.rel_error.tolist(),
            "singular": np.flatnonzero(self.singular).tolist(),
        }


def _spectral(M):
    if M.shape[-2:] == (1, 1):
        return np.abs(M[..., 0, 0])
    return np.linalg.norm(M, 2, axis=(-2, -1))


def error_metrics(candidate, reference, grid, workers: Optional[int] = None) -> ErrorReport:
    """``||H_c(s) - H_r(s)||_2`` on the grid.

    Points where either evaluator is singular get an infinite error.
    Relative errors divide by ``||H_r(s)||_2`` (infinite if that vanishes
    while the difference does not).
    """
    pts = _grid_points(grid)
    Hc, sc = evaluate_grid(candidate, pts, workers)
    Hr, sr = evaluate_grid(reference, pts, workers)
    if Hc.shape != Hr.shape:
        raise DataError(f"output shapes differ: {Hc.shape[1:]} vs {Hr.shape[1:]}")
    sing = sc | sr
    D = Hc - Hr
    D[sing] = 0
    err = _spectral(D)
    ref = _spectral(np.where(sing[:, None, None], 1.0, Hr))
    err[sing] = np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(err == 0, 0.0, err / ref)
    k = int(np.argmax(err))
    return ErrorReport(pts, err, rel, float(err[k]), float(np.max(rel)), complex(pts[k]), sing)


# --- experiment setup ------------------------------------------------------------


def driving_points(a, b, n, conjugate=True):
    """Left and right points from ``n`` log-spaced frequencies in ``[a, b]``.

    With ``conjugate`` each ``i omega`` comes with its conjugate and the
    pairs alternate between the sides; otherwise the points themselves
    alternate.
    """
    n = int(n)
    if n < 2 or n % 2:
        raise DataError(f"n must be even and at least 2, got {n}")
    om = np.logspace(np.log10(a), np.log10(b), n)
    mu, sigma = [], []
    for k, w in enumerate(om):
        side = mu if k % 2 == 0 else sigma
        side.extend([1j * w, -1j * w] if conjugate else [1j * w])
    return np.array(mu), np.array(sigma)


def extra_points(a, b, count):
    """``count`` frequencies ``a (b/a)^((j + 1/2)/count)``.

    These sit strictly between the log-spaced base frequencies whenever
    the base count is even.
    """
    j = np.arange(int(count))
    return a * (b / a) ** ((j + 0.5) / count)


def experiment_data(oracle, n, band, method, qf=1, qg=2, K=3, hermite_side=None):
    """Sample ``oracle`` the way the benchmark experiments do.

    The base data are ``n`` frequencies and their conjugates.  For additional
    points, the ``(qf + qg - 2) n / 2`` extra conjugate pairs are dealt
    round-robin to the extra groups, right side first.
    """
    a, b = band
    mu, sigma = driving_points(a, b, n)
    if method == "additional":
        extra = qf + qg - 2
        if extra < 1:
            raise DataError("additional points need qf + qg >= 3")
        om = extra_points(a, b, extra * n // 2)
        pairs = [[1j * w, -1j * w] for w in om]
        deal = [pairs[q::extra] for q in range(extra)]
        right = [np.ravel(d) for d in deal[: qg - 1]]
        left = [np.ravel(d) for d in deal[qg - 1:]]
        mu = np.concatenate([mu, *left]) if left else mu
        sigma = np.concatenate([sigma, *right]) if right else sigma
        return tangential_sample(oracle, mu, sigma)
    if method == "hermite":
        side = hermite_side or ("both" if K == 4 else "left")
        return tangential_sample(oracle, mu, sigma, hermite=side)
    return tangential_sample(oracle, mu, sigma)


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    name: str
    n: int
    method: str
    report: ErrorReport
    realization: StructuredRealization
    data: InterpolationData
    grid: FrequencyGrid
    bode: BodeSamples
    options: dict

    def summary(self):
        return {
            "name": self.name,
            "n": self.n,
            "method": self.method,
            "order": self.realization.n,
            "is_real": bool(self.realization.is_real),
            "grid": self.grid.to_text(),
            "max_abs": self.report.max_abs,
            "max_rel": self.report.max_rel,
            "median_abs": self.report.median_abs,
            "argmax": [self.report.argmax.real, self.report.argmax.imag],
            "options": {k: v for k, v in self.options.items() if k != "model"},
        }


EXPERIMENT_METHODS = ("loewner", "k2", "additional", "hermite", "auto")
_OPTION_KEYS = {"qf", "qg", "make_real", "grid_count", "band", "hermite_side", "tol", "model", "workers", "seed"}


def run_experiment(name: str, n: int, method: str = "additional", options: Optional[dict] = None, out_dir=None) -> ExperimentResult:
    """Sample a benchmark, realize it and compare on a log grid.

    Parameters
    ----------
    name
        ``delay``, ``rod``, ``duct``, ``beam`` or ``toy``.
    method
        ``loewner`` (plain state space), ``k2``, ``additional``, ``hermite``
        or ``auto``.
    options
        ``qf`` / ``qg`` (default 1 and 2), ``make_real`` (default: real
        whenever the data allow), ``grid_count`` (500), ``band`` (the
        benchmark band), ``hermite_side``, ``tol``, ``model`` (keyword
        arguments for the model generator), ``workers``.
    out_dir
        If given, ``bode.csv``, ``rom.json`` and ``report.json`` are written
        there.
    """
    opts = dict(options or {})
    unknown = set(opts) - _OPTION_KEYS
    if unknown:
        raise DataError(f"unknown experiment options {sorted(unknown)}")
    if method not in EXPERIMENT_METHODS:
        raise DataError(f"unknown method {method!r}; choose from {', '.join(EXPERIMENT_METHODS)}")
    if name not in BANDS:
        raise DataError(f"unknown experiment {name!r}; choose from {', '.join(BANDS)}")
    oracle, _, structure = build_named_model(name, **opts.get("model", {}))
    band = tuple(opts.get("band", BANDS[name]))
    grid = FrequencyGrid.log(band[0], band[1], opts.get("grid_count", GRID_COUNT))
    qf, qg = int(opts.get("qf", 1)), int(opts.get("qg", 2))
    if method == "additional" and qf + qg != structure.K:
        raise DataError(f"qf + qg = {qf + qg} but the structure has K = {structure.K}")
    data = experiment_data(oracle, n, band, method, qf, qg, structure.K, opts.get("hermite_side"))
    make_real = opts.get("make_real")
    if method == "loewner":
        R = loewner_realization(data, make_real=make_real is not False)
    else:
        kw = {"make_real": make_real, "hermite_side": opts.get("hermite_side")}
        if "tol" in opts:
            kw["tol"] = float(opts["tol"])
        if method == "additional":
            kw.update(qf=qf, qg=qg)
        R = realize(data, structure, method=method, **kw)
    workers = opts.get("workers")
    report = error_metrics(R, oracle, grid, workers)
    bode = bode_grid(R, grid, workers)
    res = ExperimentResult(name, int(n), method, report, R, data, grid, bode, opts)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_text_atomic(os.path.join(out_dir, "bode.csv"), bode_csv(bode))
        write_text_atomic(os.path.join(out_dir, "rom.json"), R.to_json())
        write_text_atomic(os.path.join(out_dir, "report.json"), json.dumps(res.summary(), indent=2))
    return res


# --- output -------------------------------------------------------------------


def write_text_atomic(path, text: str):
    """Write through a temporary file in the same directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def bode_csv(bode: BodeSamples) -> str:
    """CSV text: ``omega`` then re, im, dB and phase per output/input entry, then ``singular``."""
    _, p, m = bode.values.shape
    tags = [""] if p == m == 1 else [f"_{i + 1}{j + 1}" for i in range(p) for j in range(m)]
    header = ["omega"]
    for t in tags:
        header += [f"re_H{t}", f"im_H{t}", f"mag_db{t}", f"phase_deg{t}"]
    header.append("singular")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for k in range(len(bode.points)):
        row = [repr(float(bode.points[k].imag))]
        for i in range(p):
            for j in range(m):
                v = bode.values[k, i, j]
                row += [repr(float(v.real)), repr(float(v.imag)), repr(float(bode.magnitude_db[k, i, j])), repr(float(bode.phase_deg[k, i, j]))]
        row.append(int(bode.singular[k]))
        w.writerow(row)
    return buf.getvalue()
