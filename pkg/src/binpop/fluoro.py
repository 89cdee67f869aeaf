"""Fluorophore counting with exponential bleaching.

Frame-t counts per region of interest are modeled as X ~ Bin(n_t, p_on)
with n_t = n_0 (1-B)^t, where B is the per-frame bleaching probability and
p_on the stationary on-state probability of an unbleached fluorophore. The
pipeline: estimate p_on from blink traces, estimate n_t per selected frame
from the ROI counts, then fit the log-linear decay to recover (n_0, B).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Sample, ScanCache
from .estimators import EstimateResult, EstimatorSpec, run_estimator
from .montecarlo import STREAM_FLUORO, substream

logger = logging.getLogger(__name__)


@dataclass
class CountTable:
    """Per-ROI counts at a set of strictly increasing frame indices."""

    frames: tuple[int, ...]
    counts: np.ndarray  # shape (n_rois, n_frames), non-negative ints

    def __post_init__(self):
        self.frames = tuple(int(t) for t in self.frames)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[1] != len(self.frames):
            raise ValueError("counts must be (n_rois, n_frames)")
        if any(b <= a for a, b in zip(self.frames, self.frames[1:])):
            raise ValueError("frame indices must be strictly increasing")
        if np.any(self.counts < 0):
            roi, col = map(int, np.argwhere(self.counts < 0)[0])
            raise ValueError(f"negative count at roi {roi}, "
                             f"frame t_{self.frames[col]}")

    @property
    def n_rois(self) -> int:
        return int(self.counts.shape[0])

    def column(self, frame: int) -> np.ndarray:
        try:
            j = self.frames.index(int(frame))
        except ValueError:
            raise KeyError(f"frame {frame} not present (have {self.frames})")
        return self.counts[:, j]


@dataclass(frozen=True)
class BlinkTrace:
    """Per-fluorophore on/off flags up to (excluding) the bleaching frame."""

    on_flags: tuple[bool, ...]

    def __post_init__(self):
        if len(self.on_flags) == 0:
            raise ValueError("a blink trace cannot be empty")

    @property
    def on_ratio(self) -> float:
        return sum(self.on_flags) / len(self.on_flags)


def estimate_p_on(traces: list[BlinkTrace]) -> float:
    """Mean over traces of (#on frames / trace length)."""
    if not traces:
        raise ValueError("need at least one blink trace")
    return float(np.mean([t.on_ratio for t in traces]))


def synth_blink_traces(n_traces: int, p_on: float, switch_off: float = 0.3,
                       bleach: float = 0.005, seed: int = 0) -> list[BlinkTrace]:
    """Two-state on/off chain with stationary on-probability p_on.

    P(on->off) = switch_off and P(off->on) = switch_off * p_on / (1 - p_on),
    started from stationarity; bleaching hits each frame with probability
    `bleach` independent of the state, so the per-trace on-ratio is unbiased
    for p_on."""
    if not (0.0 < p_on < 1.0):
        raise ValueError("p_on must lie in (0, 1)")
    switch_on = switch_off * p_on / (1.0 - p_on)
    if not (0.0 < switch_off <= 1.0 and switch_on <= 1.0):
        raise ValueError("switch rates must be probabilities")
    traces = []
    for i in range(n_traces):
        rng = substream(seed, STREAM_FLUORO, 0, i)
        length = int(rng.geometric(bleach))
        u = rng.random(length + 1)
        flags = np.empty(length, dtype=bool)
        state = u[0] < p_on
        for t in range(length):
            flags[t] = state
            flip = u[t + 1] < (switch_off if state else switch_on)
            state = state ^ flip
        traces.append(BlinkTrace(on_flags=tuple(bool(f) for f in flags)))
    return traces


def estimate_nt(table: CountTable, frame: int, est: EstimatorSpec,
                cache: ScanCache | None = None) -> EstimateResult:
    """Apply an estimator to the ROI counts of one frame (treated as i.i.d.
    Bin(n_t, p) draws)."""
    col = table.column(frame)
    sample = Sample(tuple(int(c) for c in col))
    return run_estimator(est, sample, cache=cache)


@dataclass
class BleachFit:
    """Log-linear fit of n_t = n_0 (1-B)^t over the usable frames."""

    n0_hat: float
    n0_rounded: int
    b_hat: float
    per_frame: list[tuple[int, float]]
    residuals: list[float]
    r_squared: float
    boundary: bool = False
    frames_used: tuple[int, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "n0_hat": self.n0_hat, "n0_rounded": self.n0_rounded,
            "b_hat": self.b_hat, "r_squared": self.r_squared,
            "boundary": self.boundary,
            "frames_used": list(self.frames_used),
            "per_frame": [{"t": t, "n_t_hat": v} for t, v in self.per_frame],
        }


def fit_bleach(per_frame: list[tuple[int, float]],
               weighted: bool = False) -> BleachFit:
    """Ordinary least squares of log(n_t_hat) on the absolute frame index t:
    intercept = log n_0, slope = log(1-B).

    Frames with non-positive estimates are dropped with a warning. A
    non-negative slope has no valid bleaching probability; b_hat is then
    clamped to 0 and flagged as a boundary fit. The optional weights
    (n_t_hat^2, a delta-method proxy for equal-variance estimates on the
    original scale) are off by default."""
    usable = [(int(t), float(v)) for t, v in per_frame if v > 0.0]
    dropped = len(per_frame) - len(usable)
    if dropped:
        logger.warning("fit_bleach: dropped %d frame(s) with non-positive "
                       "estimates", dropped)
    if len(usable) < 2:
        raise ValueError("need at least two frames with positive estimates")

    t = np.array([u[0] for u in usable], dtype=np.float64)
    y = np.log([u[1] for u in usable])
    w = np.array([u[1] ** 2 for u in usable]) if weighted \
        else np.ones(len(usable))
    wsum = w.sum()
    t_bar = float(np.dot(w, t) / wsum)
    y_bar = float(np.dot(w, y) / wsum)
    var_t = float(np.dot(w, (t - t_bar) ** 2))
    if var_t == 0.0:
        raise ValueError("frames are all identical; slope is undefined")
    slope = float(np.dot(w, (t - t_bar) * (y - y_bar)) / var_t)
    intercept = y_bar - slope * t_bar

    resid = y - (intercept + slope * t)
    ss_res = float(np.dot(w, resid**2))
    ss_tot = float(np.dot(w, (y - y_bar) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot

    boundary = slope >= 0.0
    b_hat = 0.0 if boundary else -math.expm1(slope)
    n0_hat = math.exp(intercept)
    return BleachFit(
        n0_hat=n0_hat,
        n0_rounded=int(math.floor(n0_hat + 0.5)),
        b_hat=b_hat,
        per_frame=usable,
        residuals=[float(r) for r in resid],
        r_squared=r2,
        boundary=boundary,
        frames_used=tuple(int(x) for x in t),
    )


@dataclass(frozen=True)
class SynthConfig:
    """Synthetic bleaching dataset: per ROI the initial load is
    Bin(n_anchor, occupancy_p); fluorophores then die independently with
    per-frame probability b, and frame-t observations are
    Bin(alive_t, p_on)."""

    n_anchor: int
    occupancy_p: float
    n_rois: int
    b: float
    p_on: float
    frames: tuple[int, ...]
    seed: int = 0
    frame_exact: bool = False

    def __post_init__(self):
        for name, val in (("occupancy_p", self.occupancy_p),
                          ("b", self.b), ("p_on", self.p_on)):
            if not (0.0 <= val <= 1.0):
                raise ValueError(f"{name} must be a probability")
        if self.n_anchor < 0 or self.n_rois < 1:
            raise ValueError("n_anchor >= 0 and n_rois >= 1 required")
        object.__setattr__(self, "frames",
                           tuple(int(t) for t in self.frames))
        if any(t < 0 for t in self.frames) or \
                any(y <= x for x, y in zip(self.frames, self.frames[1:])):
            raise ValueError("frames must be non-negative and increasing")


def simulate_alive(cfg: SynthConfig) -> np.ndarray:
    """Survivor counts per (roi, frame).

    Aggregated mode jumps between requested frames with survival probability
    (1-b)^dt; frame-exact mode steps frame by frame. Both are distributionally
    identical for independent per-frame bleaching."""
    rng_init = substream(cfg.seed, STREAM_FLUORO, 1)
    alive = rng_init.binomial(cfg.n_anchor, cfg.occupancy_p,
                              size=cfg.n_rois).astype(np.int64)
    rng = substream(cfg.seed, STREAM_FLUORO, 2)
    out = np.empty((cfg.n_rois, len(cfg.frames)), dtype=np.int64)
    t_prev = 0
    for j, t in enumerate(cfg.frames):
        dt = t - t_prev
        if dt > 0:
            if cfg.frame_exact:
                for _ in range(dt):
                    alive = rng.binomial(alive, 1.0 - cfg.b)
            else:
                alive = rng.binomial(alive, (1.0 - cfg.b) ** dt)
        out[:, j] = alive
        t_prev = t
    return out


def synth_dataset(cfg: SynthConfig) -> CountTable:
    alive = simulate_alive(cfg)
    rng = substream(cfg.seed, STREAM_FLUORO, 3)
    counts = rng.binomial(alive, cfg.p_on)
    return CountTable(frames=cfg.frames, counts=counts)


def fit_pipeline(table: CountTable, est: EstimatorSpec,
                 frames: tuple[int, ...] | None = None,
                 weighted: bool = False) -> BleachFit:
    """estimate_nt on every requested frame, then the bleaching fit.

    Frames where the estimator fails are dropped with a warning (fit_bleach
    additionally drops non-positive estimates)."""
    frames = table.frames if frames is None else tuple(frames)
    cache = ScanCache(table.n_rois, est.beta) if est.beta is not None else None
    per_frame = []
    for t in frames:
        try:
            res = estimate_nt(table, t, est, cache=cache)
            per_frame.append((t, res.value))
        except Exception as exc:  # estimator failure on one frame is not fatal
            logger.warning("fit_pipeline: frame %d failed (%s)", t, exc)
    return fit_bleach(per_frame, weighted=weighted)


def write_counts(table: CountTable, path) -> None:
    """CSV with header roi,t_<f1>,t_<f2>,...: one row per ROI."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["roi"] + [f"t_{t}" for t in table.frames])
        for i in range(table.n_rois):
            writer.writerow([i] + [int(c) for c in table.counts[i]])


def ingest_counts(path) -> CountTable:
    """Parse the CSV format written by write_counts, validating as it goes."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file")
        if not header or header[0].strip() != "roi":
            raise ValueError(f"{path}: header must start with 'roi'")
        frames = []
        for cell in header[1:]:
            cell = cell.strip()
            if not cell.startswith("t_"):
                raise ValueError(f"{path}: frame column {cell!r} must look "
                                 "like t_<index>")
            frames.append(int(cell[2:]))
        if len(set(frames)) != len(frames):
            raise ValueError(f"{path}: duplicate frame columns")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(frames) + 1:
                raise ValueError(f"{path}: line {lineno} has {len(row)} "
                                 f"cells, expected {len(frames) + 1}")
            try:
                vals = [int(c) for c in row[1:]]
            except ValueError:
                raise ValueError(f"{path}: line {lineno} has a non-integer "
                                 "count")
            for j, v in enumerate(vals):
                if v < 0:
                    raise ValueError(f"{path}: negative count at line "
                                     f"{lineno}, column t_{frames[j]}")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no count rows")
    return CountTable(frames=tuple(frames),
                      counts=np.asarray(rows, dtype=np.int64))
