"""Data model and ingestion for shape/pose trajectories.

A trajectory stores column arrays (time, shape, shape velocity, world pose,
gait phase, body velocity); a dataset groups trajectories sharing the same
shape and body dimensions and carries the stride segmentation. Flattened
graph points use the canonical ordering (r, rdot, vb) — inputs first — so
the input block always precedes the output block downstream.
"""

import csv
import dataclasses
from dataclasses import dataclass

import numpy as np

from .se2 import PoseSE2, log_se2, relative
from .validation import ParseError, ValidationError, check_vector

#: body velocity lives in se(2): (vx, vy, omega)
NB_SE2 = 3

#: a phase drop larger than this between consecutive samples is a wrap event
PHASE_WRAP_DROP = np.pi


@dataclass(frozen=True)
class ShapeSample:
    """One sample: time, shape, and the optional derived/measured channels."""

    t: float
    r: np.ndarray
    rdot: np.ndarray = None
    pose: PoseSE2 = None
    phase: float = None
    vb: np.ndarray = None


@dataclass(frozen=True)
class GraphPoint:
    """One point of the motility-map graph in R^{2 Ns + Nb}."""

    r: np.ndarray
    rdot: np.ndarray
    vb: np.ndarray

    def flatten(self):
        return np.concatenate([self.r, self.rdot, self.vb])

    @staticmethod
    def from_vector(v, ns, nb=NB_SE2):
        v = check_vector(v, dim=2 * ns + nb, name="graph point")
        return GraphPoint(v[:ns].copy(), v[ns:2 * ns].copy(), v[2 * ns:].copy())


@dataclass(frozen=True)
class Trajectory:
    """Column-oriented sample storage for one recording."""

    t: np.ndarray
    r: np.ndarray
    rdot: np.ndarray = None
    pose: np.ndarray = None      # (N, 3) world x, y, theta (theta unwrapped)
    phase: np.ndarray = None     # (N,) in [0, 2*pi)
    vb: np.ndarray = None        # (N, 3) body velocity

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ValidationError("t must be a nonempty 1-D array")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("t must be strictly increasing")
        object.__setattr__(self, "t", t)
        r = np.asarray(self.r, dtype=float)
        if r.ndim != 2 or r.shape[0] != t.size:
            raise ValidationError(f"r must be ({t.size}, Ns), got {r.shape}")
        object.__setattr__(self, "r", r)
        for name, width in (("rdot", r.shape[1]), ("pose", 3), ("vb", NB_SE2)):
            col = getattr(self, name)
            if col is None:
                continue
            col = np.asarray(col, dtype=float)
            if col.shape != (t.size, width):
                raise ValidationError(
                    f"{name} must have shape ({t.size}, {width}), got {col.shape}"
                )
            if name == "pose":
                col = col.copy()
                col[:, 2] = np.unwrap(col[:, 2])
            object.__setattr__(self, name, col)
        if self.phase is not None:
            phase = np.asarray(self.phase, dtype=float)
            if phase.shape != (t.size,):
                raise ValidationError("phase must be 1-D, one value per sample")
            if np.any(phase < 0.0) or np.any(phase >= 2.0 * np.pi):
                raise ValidationError("phase values must lie in [0, 2*pi)")
            object.__setattr__(self, "phase", phase)

    def __len__(self):
        return self.t.size

    @property
    def ns(self):
        return self.r.shape[1]

    def sample(self, i):
        return ShapeSample(
            t=float(self.t[i]),
            r=self.r[i].copy(),
            rdot=None if self.rdot is None else self.rdot[i].copy(),
            pose=None if self.pose is None else PoseSE2.from_array(self.pose[i]),
            phase=None if self.phase is None else float(self.phase[i]),
            vb=None if self.vb is None else self.vb[i].copy(),
        )

    def poses(self):
        if self.pose is None:
            raise ValidationError("trajectory has no pose data")
        return [PoseSE2.from_array(row) for row in self.pose]


@dataclass(frozen=True)
class Dataset:
    """Trajectories plus the stride segmentation over them.

    stride_ranges holds (trajectory index, start, end) with end exclusive
    in the sense that the stride's displacement runs from sample ``start``
    to sample ``end``; ranges within one trajectory are disjoint and
    ordered. Immutable after construction.
    """

    trajectories: tuple
    nb: int = NB_SE2
    stride_ranges: tuple = ()

    def __post_init__(self):
        trajs = tuple(self.trajectories)
        if not trajs:
            raise ValidationError("dataset needs at least one trajectory")
        ns = trajs[0].ns
        for tr in trajs:
            if tr.ns != ns:
                raise ValidationError("all trajectories must share Ns")
        object.__setattr__(self, "trajectories", trajs)
        ranges = tuple(tuple(map(int, rng)) for rng in self.stride_ranges)
        last_end = {}
        for ti, start, end in ranges:
            if not 0 <= ti < len(trajs):
                raise ValidationError(f"stride range names trajectory {ti}")
            if not 0 <= start < end < len(trajs[ti]):
                raise ValidationError(f"stride range ({start}, {end}) out of bounds")
            if start < last_end.get(ti, 0):
                raise ValidationError("stride ranges overlap or are unordered")
            last_end[ti] = end
        object.__setattr__(self, "stride_ranges", ranges)

    @property
    def ns(self):
        return self.trajectories[0].ns

    def n_samples(self):
        return sum(len(tr) for tr in self.trajectories)

    def iter_samples(self):
        for tr in self.trajectories:
            for i in range(len(tr)):
                yield tr.sample(i)

    def graph_arrays(self):
        """Stacked (inputs, outputs) = ((r, rdot), vb) over all samples."""
        xs, ys = [], []
        for tr in self.trajectories:
            if tr.rdot is None or tr.vb is None:
                raise ValidationError(
                    "graph points need rdot and vb; run derive_velocities first"
                )
            xs.append(np.hstack([tr.r, tr.rdot]))
            ys.append(tr.vb)
        return np.vstack(xs), np.vstack(ys)

    def graph_points(self):
        """Flattened graph points, canonical ordering (r, rdot, vb)."""
        X, y = self.graph_arrays()
        return np.hstack([X, y])


# ---------------------------------------------------------------------------
# CSV ingestion / export

def _schema_columns(schema):
    shape_cols = list(schema["shape"])
    if not shape_cols:
        raise ValidationError("schema must name at least one shape column")
    cols = {"time": schema["time"]}
    for key in ("shape_vel", "pose", "body_vel"):
        val = schema.get(key)
        if val is not None:
            val = list(val)
            want = len(shape_cols) if key == "shape_vel" else 3
            if len(val) != want:
                raise ValidationError(f"schema {key} must name {want} columns")
        cols[key] = val
    cols["shape"] = shape_cols
    cols["phase"] = schema.get("phase")
    return cols


def ingest_csv(path, schema):
    """Read one trajectory from a CSV file with a header row.

    ``schema`` maps roles to column names: required keys "time" and "shape"
    (list); optional "shape_vel" (list), "pose" (x, y, theta), "phase", and
    "body_vel" (vx, vy, omega). Angles radians, lengths meters, time seconds.
    """
    cols = _schema_columns(schema)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        index = {name.strip(): i for i, name in enumerate(header)}
        needed = [cols["time"]] + cols["shape"]
        for group in ("shape_vel", "pose", "body_vel"):
            if cols[group] is not None:
                needed += cols[group]
        if cols["phase"] is not None:
            needed.append(cols["phase"])
        for name in needed:
            if name not in index:
                raise ValidationError(f"{path}: missing column {name!r}")

        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(row[index[name]]) for name in needed])
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}: {exc}", line=lineno) from None

    if not rows:
        raise ValidationError(f"{path}: no data rows")
    data = np.array(rows)
    pos = 0

    def take(count):
        nonlocal pos
        block = data[:, pos:pos + count]
        pos += count
        return block

    t = take(1)[:, 0]
    if np.any(np.diff(t) <= 0):
        raise ValidationError(f"{path}: time column must be strictly increasing")
    r = take(len(cols["shape"]))
    rdot = take(len(cols["shape"])) if cols["shape_vel"] is not None else None
    pose = take(3) if cols["pose"] is not None else None
    vb = take(3) if cols["body_vel"] is not None else None
    phase = take(1)[:, 0] if cols["phase"] is not None else None
    return Dataset(trajectories=(
        Trajectory(t=t, r=r, rdot=rdot, pose=pose, phase=phase, vb=vb),
    ))


def ingest_csv_many(paths, schema):
    """One trajectory per file, merged into a single dataset."""
    trajs = []
    for path in paths:
        trajs.extend(ingest_csv(path, schema).trajectories)
    return Dataset(trajectories=tuple(trajs))


def _fmt(value):
    # repr of a Python float is shortest-round-trip exact
    return repr(float(value))


def export_csv(dataset, path, schema):
    """Write a dataset back out under the same schema (lossless floats)."""
    cols = _schema_columns(schema)
    header = [cols["time"]] + cols["shape"]
    groups = []
    for key in ("shape_vel", "pose", "body_vel"):
        if cols[key] is not None:
            header += cols[key]
            groups.append(key)
    if cols["phase"] is not None:
        header.append(cols["phase"])
    attr = {"shape_vel": "rdot", "pose": "pose", "body_vel": "vb"}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for tr in dataset.trajectories:
            for i in range(len(tr)):
                row = [_fmt(tr.t[i])] + [_fmt(v) for v in tr.r[i]]
                for key in groups:
                    col = getattr(tr, attr[key])
                    if col is None:
                        raise ValidationError(f"dataset has no {key} to export")
                    row += [_fmt(v) for v in col[i]]
                if cols["phase"] is not None:
                    if tr.phase is None:
                        raise ValidationError("dataset has no phase to export")
                    row.append(_fmt(tr.phase[i]))
                writer.writerow(row)


# ---------------------------------------------------------------------------
# Derivation and segmentation

def _central_diff(values, t):
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (t[2:] - t[:-2])[:, None]
    out[0] = (values[1] - values[0]) / (t[1] - t[0])
    out[-1] = (values[-1] - values[-2]) / (t[-1] - t[-2])
    return out


def derive_velocities(dataset, want_vb=True):
    """Fill in missing rdot (central differences) and vb (pose logarithm).

    vb at step i is log(g_i^{-1} g_{i+1}) / dt_i — the body-frame twist over
    the following interval — with the last sample carrying the preceding
    interval's value. Channels already present are left untouched.
    """
    trajs = []
    for tr in dataset.trajectories:
        if len(tr) < 3:
            raise ValidationError("derive_velocities needs at least 3 samples")
        rdot = tr.rdot if tr.rdot is not None else _central_diff(tr.r, tr.t)
        vb = tr.vb
        if vb is None and want_vb:
            if tr.pose is None:
                raise ValidationError("cannot derive vb without pose data")
            poses = tr.poses()
            vb = np.empty((len(tr), 3))
            for i in range(len(tr) - 1):
                dt = tr.t[i + 1] - tr.t[i]
                vb[i] = log_se2(relative(poses[i], poses[i + 1])) / dt
            vb[-1] = vb[-2]
        trajs.append(dataclasses.replace(tr, rdot=rdot, vb=vb))
    return dataclasses.replace(dataset, trajectories=tuple(trajs))


def find_phase_wraps(phase):
    """Indices i where a wrap event occurs between samples i and i+1."""
    return np.flatnonzero(np.diff(phase) < -PHASE_WRAP_DROP)


def segment_strides(dataset, warn=None):
    """Populate stride ranges from phase wrap events.

    A stride spans from the sample after one wrap to the sample after the
    next, so partial leading and trailing cycles are excluded; n wrap events
    yield n - 1 strides.
    """
    ranges = []
    total = 0
    for ti, tr in enumerate(dataset.trajectories):
        if tr.phase is None:
            raise ValidationError("segment_strides needs a phase column")
        wraps = find_phase_wraps(tr.phase)
        for a, b in zip(wraps[:-1], wraps[1:]):
            ranges.append((ti, int(a) + 1, int(b) + 1))
        total += max(0, wraps.size - 1)
    if total == 0 and warn is not None:
        warn("no complete strides found (phase never wrapped twice)")
    return dataclasses.replace(dataset, stride_ranges=tuple(ranges))
