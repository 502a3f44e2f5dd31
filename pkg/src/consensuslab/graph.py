"""Time-varying weighted graphs.

Piecewise-constant weight schedules, Laplacian and incidence algebra, and
joint (delta, T)-connectivity certificates.  All matrices are dense numpy
arrays; node counts are desk scale.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import (
    ConfigurationError,
    HorizonError,
    InvalidSnapshotError,
    NegativeLinkError,
    SignedGraphError,
)

__all__ = [
    "GraphSnapshot",
    "WeightSchedule",
    "IncidenceMatrix",
    "WindowEvidence",
    "ConnectivityCertificate",
    "NegativeLinkReport",
    "edge_pairs",
    "laplacian",
    "incidence",
    "sqrt_laplacian_factor",
    "integrated_weights",
    "integrated_laplacian",
    "lambda2",
    "window_starts",
    "check_joint_connectivity",
    "negative_link_assumption_holds",
    "schedule_from_dict",
    "schedule_to_dict",
    "load_schedule",
    "save_schedule",
]


def edge_pairs(node_count):
    """Fixed lexicographic edge order: all pairs (i, j), i < j, 0-based."""
    return [(i, j) for i in range(node_count) for j in range(i + 1, node_count)]


class GraphSnapshot:
    """Weighted undirected graph at a single instant.

    The weight matrix must be exactly symmetric with a zero diagonal;
    negative entries are allowed (signed graphs).
    """

    def __init__(self, weights):
        w = np.array(weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InvalidSnapshotError(f"weight matrix must be square, got shape {w.shape}")
        if not np.array_equal(w, w.T):
            raise InvalidSnapshotError("weight matrix must be exactly symmetric")
        if np.any(np.diag(w) != 0.0):
            raise InvalidSnapshotError("weight matrix must have a zero diagonal")
        if not np.all(np.isfinite(w)):
            raise InvalidSnapshotError("weights must be finite")
        w.setflags(write=False)
        self.weights = w
        self.node_count = w.shape[0]

    @property
    def is_nonnegative(self):
        return bool(np.all(self.weights >= 0.0))


def _as_snapshot(g):
    return g if isinstance(g, GraphSnapshot) else GraphSnapshot(g)


def laplacian(g):
    """Weighted Laplacian L = D - A of a snapshot (or raw weight matrix).

    Valid for signed weights as well; L stays symmetric with L @ 1 = 0.
    """
    snap = _as_snapshot(g)
    w = snap.weights
    return np.diag(w.sum(axis=1)) - w


@dataclass(frozen=True)
class IncidenceMatrix:
    """Weighted incidence matrix with the fixed lexicographic edge order.

    Column for edge (i, j) holds -sqrt(a_ij) at row i and +sqrt(a_ij) at
    row j (i < j is the tail); absent edges keep an all-zero column so the
    shape is always N x N(N-1)/2.  Satisfies entries @ entries.T == laplacian.
    """

    entries: np.ndarray
    edge_order: tuple

    @property
    def node_count(self):
        return self.entries.shape[0]

    @property
    def edge_count(self):
        return self.entries.shape[1]


def incidence(g):
    """Build the weighted incidence matrix H of a nonnegative snapshot."""
    snap = _as_snapshot(g)
    w = snap.weights
    if np.any(w < 0.0):
        raise SignedGraphError(
            "incidence factorization needs nonnegative weights; "
            "use sqrt_laplacian_factor for signed graphs"
        )
    n = snap.node_count
    pairs = edge_pairs(n)
    h = np.zeros((n, len(pairs)))
    for k, (i, j) in enumerate(pairs):
        root = np.sqrt(w[i, j])
        h[i, k] = -root
        h[j, k] = root
    return IncidenceMatrix(entries=h, edge_order=tuple(pairs))


def sqrt_laplacian_factor(matrix, tol=None):
    """Symmetric PSD square root S of a symmetric PSD matrix, S @ S = matrix.

    Intended for Laplacians of signed graphs under the assumption that the
    positive links dominate.  Eigenvalues inside [-tol, 0) are clamped to 0;
    an eigenvalue below -tol raises NegativeLinkError with the eigenvalue.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max()))
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12 * scale):
        raise ValueError("matrix must be symmetric")
    if tol is None:
        tol = 1e-9 * m.shape[0] * scale
    lam, q = np.linalg.eigh((m + m.T) / 2.0)
    if lam[0] < -tol:
        raise NegativeLinkError(
            f"matrix has eigenvalue {lam[0]:.6e} below -{tol:.1e}; "
            "Negative-Link Assumption violated",
            eigenvalue=float(lam[0]),
        )
    s = (q * np.sqrt(np.clip(lam, 0.0, None))) @ q.T
    return (s + s.T) / 2.0


class Segment(NamedTuple):
    t_start: float
    t_end: float
    weights: np.ndarray


class WeightSchedule:
    """Piecewise-constant symmetric edge-weight function of time.

    Segments tile [0, horizon] contiguously.  A periodic schedule repeats
    with period equal to its horizon; a non-periodic one is undefined past
    it.  ``weight_bound`` is the declared bound A* with |a_ij(t)| <= A*.
    """

    def __init__(self, segments, periodic=False, weight_bound=None, name=None):
        segs = []
        for raw in segments:
            t0, t1, w = raw
            snap = _as_snapshot(w)
            segs.append(Segment(float(t0), float(t1), snap.weights))
        if not segs:
            raise ConfigurationError("schedule needs at least one segment")
        n = segs[0].weights.shape[0]
        if n < 2:
            raise ConfigurationError("schedule needs at least two nodes")
        if any(s.weights.shape[0] != n for s in segs):
            raise ConfigurationError("all segments must share the node count")
        if segs[0].t_start != 0.0:
            raise ConfigurationError("first segment must start at t = 0")
        for k, s in enumerate(segs):
            if not s.t_end > s.t_start:
                raise ConfigurationError(f"segment {k} has non-positive duration")
            if k > 0 and s.t_start != segs[k - 1].t_end:
                raise ConfigurationError(
                    f"segment {k} starts at {s.t_start}, previous ends at {segs[k - 1].t_end}"
                )
        wmax = max(float(np.abs(s.weights).max()) for s in segs)
        if weight_bound is None:
            weight_bound = wmax if wmax > 0.0 else 1.0
        elif wmax > weight_bound:
            raise ConfigurationError(
                f"weight magnitude {wmax} exceeds the declared bound {weight_bound}"
            )
        self.segments = tuple(segs)
        self.node_count = n
        self.periodic = bool(periodic)
        self.weight_bound = float(weight_bound)
        self.name = name
        self.horizon = segs[-1].t_end
        self.period = self.horizon if self.periodic else None
        self._starts = [s.t_start for s in segs]

    def __len__(self):
        return len(self.segments)

    @property
    def is_nonnegative(self):
        return all(float(s.weights.min()) >= 0.0 for s in self.segments)

    def scaled(self, factor):
        """Same switching pattern with every weight multiplied by ``factor``."""
        return WeightSchedule(
            [(s.t_start, s.t_end, s.weights * factor) for s in self.segments],
            periodic=self.periodic,
            weight_bound=abs(factor) * self.weight_bound,
            name=self.name,
        )

    def _local_index(self, tau):
        idx = bisect.bisect_right(self._starts, tau) - 1
        return min(max(idx, 0), len(self.segments) - 1)

    def segment_index_at(self, t):
        """Segment holding time t; right-continuous at interior boundaries.

        The final instant of a non-periodic schedule maps to the last segment.
        """
        t = float(t)
        if t < 0.0:
            raise HorizonError(f"time {t} is before the schedule start")
        if self.periodic:
            _, tau = divmod(t, self.period)
            return self._local_index(tau)
        tol = 1e-9 * max(1.0, self.horizon)
        if t > self.horizon + tol:
            raise HorizonError(f"time {t} exceeds the horizon {self.horizon}")
        return self._local_index(min(t, self.horizon))

    def weights_at(self, t):
        return self.segments[self.segment_index_at(t)].weights

    def snapshot_at(self, t):
        return GraphSnapshot(self.weights_at(t))

    def pieces(self, t0, t1):
        """Split [t0, t1] at segment boundaries.

        Returns a list of (ta, tb, segment_index) with ta < tb covering the
        window in order.  Periodic schedules unwrap across periods; indices
        refer to the base segments.
        """
        t0, t1 = float(t0), float(t1)
        if t1 < t0:
            raise ValueError(f"window end {t1} precedes start {t0}")
        tiny = 1e-12 * max(1.0, abs(t1))
        if t1 - t0 <= tiny:
            return []
        if t0 < -tiny:
            raise HorizonError(f"window start {t0} is before the schedule start")
        t0 = max(t0, 0.0)
        out = []
        if self.periodic:
            p = self.period
            k0, tau = divmod(t0, p)
            idx = self._local_index(tau)
            abs_end = k0 * p + self.segments[idx].t_end
            t = t0
            while t < t1 - tiny:
                tb = min(abs_end, t1)
                if tb > t + tiny:
                    out.append((t, tb, idx))
                t = tb
                idx += 1
                if idx == len(self.segments):
                    idx = 0
                    k0 += 1
                abs_end = k0 * p + self.segments[idx].t_end
            return out
        tol = 1e-9 * max(1.0, self.horizon)
        if t1 > self.horizon + tol:
            raise HorizonError(
                f"window [{t0}, {t1}] leaves the horizon {self.horizon} of a non-periodic schedule"
            )
        t1 = min(t1, self.horizon)
        idx = self._local_index(t0)
        t = t0
        while t < t1 - tiny:
            tb = min(self.segments[idx].t_end, t1)
            if tb > t + tiny:
                out.append((t, tb, idx))
            t = tb
            idx = min(idx + 1, len(self.segments) - 1)
        return out

    def boundaries_between(self, t0, t1):
        """Segment switching times strictly inside (t0, t1)."""
        pieces = self.pieces(t0, t1)
        return [tb for _, tb, _ in pieces[:-1]]


def integrated_weights(sched, s, duration):
    """Per-edge integrals int_s^{s+duration} a_ij(t) dt as an N x N matrix.

    Exact: the integrand is piecewise constant, so this is an overlap sum.
    """
    if duration < 0.0:
        raise ValueError("duration must be nonnegative")
    acc = np.zeros((sched.node_count, sched.node_count))
    for ta, tb, k in sched.pieces(s, s + duration):
        acc += (tb - ta) * sched.segments[k].weights
    return acc


def integrated_laplacian(sched, s, duration):
    """Exact segment-wise integral of the Laplacian over [s, s+duration]."""
    w = integrated_weights(sched, s, duration)
    return np.diag(w.sum(axis=1)) - w


def lambda2(matrix):
    """Second-smallest eigenvalue of a symmetric matrix (ascending order)."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
        raise ValueError(f"expected a square matrix of size >= 2, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max()))
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12 * scale):
        raise ValueError("matrix must be symmetric")
    return float(np.linalg.eigvalsh((m + m.T) / 2.0)[1])


def _components_connected(node_count, edges):
    # union-find; exact, no tolerances involved
    parent = list(range(node_count))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    return len({find(v) for v in range(node_count)}) == 1


def _dedupe_sorted(values, tol):
    out = []
    for v in sorted(values):
        if not out or v - out[-1] > tol:
            out.append(v)
    return out


def window_starts(sched, window_length, stride):
    """Candidate window starts for checks quantified over all s >= 0.

    Per-edge window integrals are piecewise linear in s with kinks only
    where s or s + window_length crosses a segment boundary, so extrema sit
    at boundary-aligned starts; a stride grid is added on top.  Periodic
    schedules are covered exactly by one period of starts; for non-periodic
    schedules the result is a grid-limited sample of [0, horizon - T].
    """
    if stride <= 0.0:
        raise ValueError("stride must be positive")
    if window_length < 0.0:
        raise ValueError("window length must be nonnegative")
    bounds = [seg.t_start for seg in sched.segments] + [sched.horizon]
    tol = 1e-9 * max(1.0, stride)
    if sched.periodic:
        p = sched.period
        vals = list(np.arange(0.0, p, stride))
        vals += [b for b in bounds if b < p]
        vals += [(b - window_length) % p for b in bounds]
        vals = [v if v < p - tol else 0.0 for v in vals]
        return _dedupe_sorted(vals, tol)
    s_max = sched.horizon - window_length
    if s_max < -tol:
        raise HorizonError(
            f"window length {window_length} exceeds the horizon {sched.horizon}"
        )
    s_max = max(s_max, 0.0)
    vals = list(np.arange(0.0, s_max, stride)) + [s_max]
    vals += [b for b in bounds if 0.0 <= b <= s_max + tol]
    vals += [b - window_length for b in bounds if -tol <= b - window_length <= s_max + tol]
    vals = [min(max(v, 0.0), s_max) for v in vals]
    return _dedupe_sorted(vals, tol)


@dataclass(frozen=True)
class WindowEvidence:
    """Threshold graph of one checked window [start, start + T]."""

    start: float
    edges: tuple
    lambda2: float
    connected: bool


@dataclass(frozen=True)
class ConnectivityCertificate:
    """Outcome of a joint (delta, T)-connectivity check.

    ``verdict`` is "connected" only if every checked window's threshold
    graph is connected; otherwise ``counterexample_window`` holds the first
    failing window start.
    """

    delta: float
    T: float
    verdict: str
    windows: tuple
    counterexample_window: float | None = None

    @property
    def connected(self):
        return self.verdict == "connected"

    def as_dict(self):
        return {
            "delta": self.delta,
            "T": self.T,
            "verdict": self.verdict,
            "counterexample_window": self.counterexample_window,
            "windows": [
                {
                    "start": w.start,
                    "edges": [[i + 1, j + 1] for i, j in w.edges],
                    "lambda2": w.lambda2,
                    "connected": w.connected,
                }
                for w in self.windows
            ],
        }


def check_joint_connectivity(sched, delta, T, window_stride):
    """Certify joint (delta, T)-connectivity of a weight schedule.

    For each candidate window start s the edges with
    int_s^{s+T} a_ij dt >= delta form the threshold graph; connectivity of
    that graph is decided exactly by union-find, with the algebraic
    connectivity of its unweighted Laplacian reported as evidence.  Window
    starts come from :func:`window_starts`; for periodic schedules one
    period of starts covers all s >= 0, otherwise the check is documented
    as grid-limited.
    """
    if delta <= 0.0 or T <= 0.0:
        raise ValueError("delta and T must be positive")
    pairs = edge_pairs(sched.node_count)
    evidence = []
    counterexample = None
    for s in window_starts(sched, T, window_stride):
        acc = integrated_weights(sched, s, T)
        edges = tuple((i, j) for i, j in pairs if acc[i, j] >= delta)
        connected = _components_connected(sched.node_count, edges)
        thresh = np.zeros((sched.node_count, sched.node_count))
        for i, j in edges:
            thresh[i, j] = thresh[j, i] = 1.0
        evidence.append(
            WindowEvidence(
                start=float(s),
                edges=edges,
                lambda2=lambda2(laplacian(thresh)),
                connected=connected,
            )
        )
        if not connected and counterexample is None:
            counterexample = float(s)
    verdict = "connected" if counterexample is None else "not_connected"
    return ConnectivityCertificate(
        delta=float(delta),
        T=float(T),
        verdict=verdict,
        windows=tuple(evidence),
        counterexample_window=counterexample,
    )


@dataclass(frozen=True)
class NegativeLinkReport:
    """Worst instantaneous Laplacian eigenvalue across all segments."""

    holds: bool
    worst_eigenvalue: float
    segment_index: int

    def __bool__(self):
        return self.holds


def negative_link_assumption_holds(sched, tol=None):
    """Check lambda_min(L_k) >= -tol for every segment of the schedule."""
    if tol is None:
        tol = 1e-9 * sched.node_count * sched.weight_bound
    worst = np.inf
    worst_idx = 0
    for k, seg in enumerate(sched.segments):
        lam_min = float(np.linalg.eigvalsh(laplacian(seg.weights))[0])
        if lam_min < worst:
            worst = lam_min
            worst_idx = k
    return NegativeLinkReport(
        holds=bool(worst >= -tol),
        worst_eigenvalue=worst,
        segment_index=worst_idx,
    )


# ---------------------------------------------------------------------------
# schedule file format
#
# { "nodes": N, "bound": A*, "periodic": bool, "period": P, "name": ...,
#   "segments": [ {"t0": .., "t1": .., "edges": [{"i": 1, "j": 2, "w": 0.5}]} ] }
#
# Node indices are 1-based; omitted edges have weight 0.


def schedule_from_dict(data, name=None):
    if not isinstance(data, dict):
        raise ConfigurationError("schedule must be a JSON object")
    if "nodes" not in data:
        raise ConfigurationError("schedule is missing required field 'nodes'")
    n = data["nodes"]
    if not isinstance(n, int) or n < 2:
        raise ConfigurationError(f"'nodes' must be an integer >= 2, got {n!r}")
    raw_segments = data.get("segments")
    if not isinstance(raw_segments, list) or not raw_segments:
        raise ConfigurationError("schedule needs a non-empty 'segments' list")
    segments = []
    for k, seg in enumerate(raw_segments):
        if not isinstance(seg, dict) or "t0" not in seg or "t1" not in seg:
            raise ConfigurationError(f"segment {k} needs 't0' and 't1'")
        w = np.zeros((n, n))
        seen = set()
        for e in seg.get("edges", []):
            try:
                i, j, wt = e["i"], e["j"], e["w"]
            except (TypeError, KeyError) as exc:
                raise ConfigurationError(
                    f"segment {k}: each edge needs 'i', 'j', 'w'"
                ) from exc
            if not (isinstance(i, int) and isinstance(j, int)):
                raise ConfigurationError(f"segment {k}: edge indices must be integers")
            if i >= j:
                raise ConfigurationError(
                    f"segment {k}: edge ({i},{j}) must satisfy i < j (1-based, no self-loops)"
                )
            if i < 1 or j > n:
                raise ConfigurationError(f"segment {k}: edge ({i},{j}) out of range 1..{n}")
            if (i, j) in seen:
                raise ConfigurationError(f"segment {k}: duplicate edge ({i},{j})")
            seen.add((i, j))
            w[i - 1, j - 1] = w[j - 1, i - 1] = float(wt)
        segments.append((seg["t0"], seg["t1"], w))
    periodic = bool(data.get("periodic", False))
    if periodic and "period" in data and data["period"] != segments[-1][1]:
        raise ConfigurationError(
            f"declared period {data['period']} differs from the last segment end {segments[-1][1]}"
        )
    return WeightSchedule(
        segments,
        periodic=periodic,
        weight_bound=data.get("bound"),
        name=data.get("name", name),
    )


def schedule_to_dict(sched):
    segments = []
    for seg in sched.segments:
        edges = []
        for i, j in edge_pairs(sched.node_count):
            if seg.weights[i, j] != 0.0:
                edges.append({"i": i + 1, "j": j + 1, "w": float(seg.weights[i, j])})
        segments.append({"t0": seg.t_start, "t1": seg.t_end, "edges": edges})
    out = {
        "nodes": sched.node_count,
        "bound": sched.weight_bound,
        "periodic": sched.periodic,
        "segments": segments,
    }
    if sched.periodic:
        out["period"] = sched.period
    if sched.name is not None:
        out["name"] = sched.name
    return out


def load_schedule(path):
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return schedule_from_dict(data, name=path.stem)


def save_schedule(sched, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schedule_to_dict(sched), fh, indent=2, sort_keys=True)
        fh.write("\n")
