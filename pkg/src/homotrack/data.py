"""Trajectory datasets: CSV ingestion, resampling, clustering and synthesis.

Trajectories are canonicalized to a fixed length (default T=100) by linear
interpolation at uniformly spaced fractions of elapsed time, matching the GMM
layout downstream.  Datasets can be clustered by full (unreduced) crossing
word and split per class; a Gaussian-process sampler around template paths
generates synthetic corpora with guaranteed class purity.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import (
    BoundaryViolation,
    DegenerateTrajectory,
    InsufficientClassMembers,
    ParseError,
    RejectionBudgetExceeded,
)

DEFAULT_T = 100
BOUNDARY_TOL_FRACTION = 0.05  # of the smaller domain extent


@dataclass(frozen=True)
class Trajectory:
    id: str
    timestamps: np.ndarray   # (T,) seconds, monotone
    positions: np.ndarray    # (T, 2) metres

    def __len__(self):
        return len(self.positions)

    def flat(self) -> np.ndarray:
        """Positions flattened to [x0, y0, x1, y1, ...]."""
        return self.positions.reshape(-1)


@dataclass
class Dataset:
    trajectories: list[Trajectory] = field(default_factory=list)
    # filled by cluster_by_signature
    signatures: dict = field(default_factory=dict)   # id -> full unreduced word
    classes: dict = field(default_factory=dict)      # word -> [ids]

    def __len__(self):
        return len(self.trajectories)

    def by_id(self, traj_id: str) -> Trajectory:
        for t in self.trajectories:
            if t.id == traj_id:
                return t
        raise KeyError(traj_id)


def canonicalize(traj: Trajectory, T: int = DEFAULT_T) -> Trajectory:
    """Resample to T points at uniform fractions of total elapsed time.

    Endpoints are preserved exactly; resampling an already-canonical
    trajectory is the identity.
    """
    if len(traj) < 2:
        raise DegenerateTrajectory(f"{traj.id}: fewer than 2 points")
    t = np.asarray(traj.timestamps, dtype=float)
    if t[-1] - t[0] <= 0:
        raise DegenerateTrajectory(f"{traj.id}: zero total duration")
    query = np.linspace(t[0], t[-1], T)
    xs = np.interp(query, t, traj.positions[:, 0])
    ys = np.interp(query, t, traj.positions[:, 1])
    return Trajectory(traj.id, query, np.column_stack([xs, ys]))


def boundary_tolerance(env: geometry.Environment) -> float:
    return BOUNDARY_TOL_FRACTION * min(env.extent)


def check_boundary_endpoints(traj: Trajectory, env: geometry.Environment) -> bool:
    tol = boundary_tolerance(env)
    return (env.boundary_distance(traj.positions[0]) <= tol
            and env.boundary_distance(traj.positions[-1]) <= tol)


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

CSV_HEADER = ["id", "t", "x", "y"]


def load_csv(path, env: geometry.Environment | None = None,
             skip_boundary_violations: bool = False) -> Dataset:
    """Read a trajectory CSV (`id,t,x,y`; rows per id contiguous, time-sorted).

    With `env` given, trajectories whose endpoints are not near the boundary
    raise BoundaryViolation (or are skipped with a warning flag set).
    """
    groups: list[tuple[str, list, list]] = []
    seen: set[str] = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, expected header id,t,x,y", line=1)
        if [h.strip() for h in header] != CSV_HEADER:
            raise ParseError(f"bad header {header!r}, expected id,t,x,y", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 fields, got {len(row)}", line=lineno)
            traj_id = row[0].strip()
            try:
                t, x, y = float(row[1]), float(row[2]), float(row[3])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno)
            if not groups or groups[-1][0] != traj_id:
                if traj_id in seen:
                    raise ParseError(
                        f"rows for id {traj_id!r} are not contiguous", line=lineno)
                seen.add(traj_id)
                groups.append((traj_id, [], []))
            _, times, points = groups[-1]
            if times and t <= times[-1]:
                raise ParseError(
                    f"non-increasing timestamp for id {traj_id!r}", line=lineno)
            times.append(t)
            points.append((x, y))

    trajectories = []
    for traj_id, times, points in groups:
        traj = Trajectory(traj_id, np.asarray(times, dtype=float),
                          np.asarray(points, dtype=float))
        if env is not None and not check_boundary_endpoints(traj, env):
            if skip_boundary_violations:
                continue
            raise BoundaryViolation(
                f"{traj_id}: endpoints not within tolerance of the boundary")
        trajectories.append(traj)
    return Dataset(trajectories)


def save_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for traj in dataset.trajectories:
            for t, (x, y) in zip(traj.timestamps, traj.positions):
                writer.writerow([traj.id, repr(float(t)),
                                 repr(float(x)), repr(float(y))])


# ---------------------------------------------------------------------------
# Clustering and splitting
# ---------------------------------------------------------------------------

def cluster_by_signature(dataset: Dataset, env: geometry.Environment,
                         rays=None) -> dict:
    """Key every trajectory by its full unreduced crossing word.

    Fills `dataset.signatures` and `dataset.classes`; returns the class map.
    """
    if rays is None:
        rays = geometry.build_rays(env)
    signatures: dict[str, tuple] = {}
    classes: dict[tuple, list] = {}
    for traj in dataset.trajectories:
        word = geometry.h_signature(traj.positions, rays)
        signatures[traj.id] = word
        classes.setdefault(word, []).append(traj.id)
    dataset.signatures = signatures
    dataset.classes = classes
    return classes


def split(dataset: Dataset, train_per_class: int, test_per_class: int,
          seed: int) -> tuple[Dataset, Dataset]:
    """Disjoint seeded per-class split with exact counts."""
    if not dataset.classes:
        raise ValueError("dataset has no class map; run cluster_by_signature first")
    rng = np.random.default_rng(seed)
    train_ids, test_ids = [], []
    for word in sorted(dataset.classes, key=lambda w: (len(w), w)):
        ids = sorted(dataset.classes[word])
        need = train_per_class + test_per_class
        if len(ids) < need:
            raise InsufficientClassMembers(
                f"class {word}: {len(ids)} members < {need} requested")
        order = rng.permutation(len(ids))
        chosen = [ids[i] for i in order[:need]]
        train_ids.extend(chosen[:train_per_class])
        test_ids.extend(chosen[train_per_class:need])

    def subset(wanted):
        wanted = set(wanted)
        sub = Dataset([t for t in dataset.trajectories if t.id in wanted])
        sub.signatures = {i: dataset.signatures[i] for i in wanted}
        sub.classes = {}
        for i in sorted(wanted):
            sub.classes.setdefault(dataset.signatures[i], []).append(i)
        return sub

    return subset(train_ids), subset(test_ids)


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------

def _gp_chol(T: int, length_scale: float, amplitude: float) -> np.ndarray:
    """Cholesky factor of a squared-exponential kernel on the time index,
    conditioned to vanish at both endpoints (keeps samples on the boundary)."""
    idx = np.arange(T, dtype=float)
    K = amplitude ** 2 * np.exp(-0.5 * ((idx[:, None] - idx[None, :]) / length_scale) ** 2)
    ends = np.array([0, T - 1])
    Kee = K[np.ix_(ends, ends)] + 1e-10 * np.eye(2)
    Ke = K[:, ends]
    K = K - Ke @ np.linalg.solve(Kee, Ke.T)
    K[np.diag_indices(T)] += 1e-10
    return np.linalg.cholesky(K)


def synthesize_dataset(env: geometry.Environment, templates: list[Trajectory],
                       samples_per_template: int, length_scale: float = 10.0,
                       amplitude: float = 0.2, seed: int = 0,
                       rays=None, max_rejections: int = 100) -> Dataset:
    """Draw class-pure samples from a GP centred on each template.

    Per-coordinate independent squared-exponential kernel on the time index,
    pinned at the first and last timestep so endpoints stay on the boundary.
    Samples that hit an obstacle, leave the bounds, or change the template's
    full crossing word are rejected and redrawn.
    """
    if rays is None:
        rays = geometry.build_rays(env)
    rng = np.random.default_rng(seed)
    xmin, ymin, xmax, ymax = env.bounds
    out = []
    for template in templates:
        T = len(template)
        L = _gp_chol(T, length_scale, amplitude)
        target_word = geometry.h_signature(template.positions, rays)
        for k in range(samples_per_template):
            for attempt in range(max_rejections + 1):
                if attempt == max_rejections:
                    raise RejectionBudgetExceeded(
                        f"template {template.id}: sample {k} rejected "
                        f"{max_rejections} times")
                noise = L @ rng.standard_normal((T, 2))
                pos = template.positions + noise
                if (pos[:, 0].min() < xmin or pos[:, 0].max() > xmax
                        or pos[:, 1].min() < ymin or pos[:, 1].max() > ymax):
                    continue
                if env.path_hits_obstacle(pos):
                    continue
                if geometry.h_signature(pos, rays) != target_word:
                    continue
                out.append(Trajectory(f"{template.id}_s{k:03d}",
                                      template.timestamps.copy(), pos))
                break
    ds = Dataset(out)
    cluster_by_signature(ds, env, rays)
    return ds


def mean_speed(dataset: Dataset) -> float:
    """Mean target speed over all trajectories (m per timestep unit)."""
    speeds = []
    for traj in dataset.trajectories:
        steps = np.diff(traj.positions, axis=0)
        dts = np.diff(traj.timestamps)
        speeds.append(float(np.mean(np.hypot(steps[:, 0], steps[:, 1]) / dts)))
    return float(np.mean(speeds))


def make_template(traj_id: str, waypoints, T: int = DEFAULT_T) -> Trajectory:
    """Uniform-speed template trajectory through waypoints, canonicalized."""
    wp = np.asarray(waypoints, dtype=float)
    seg = np.linalg.norm(np.diff(wp, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    raw = Trajectory(traj_id, s, wp)  # arc length as pseudo-time
    return canonicalize(raw, T)
