"""Exact Frobenius projections, a Dykstra engine, and a bisection wrapper.

This is the numerical core standing in for a general conic solver.  All
machinery is batch-first: a "problem" is a stack of Hermitian matrices of
shape ``(B, n, n)`` sharing the same list of convex sets, where set
parameters (ball centers, radii, affine targets) may vary per problem.
Feasibility of an intersection is decided by cycling exact projections with
Dykstra correction terms; infeasibility is inferred heuristically from a
stabilized projection gap, and surfaced as such.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matkernel as mk

FEASIBLE = 1
INFEASIBLE = 2
INCONCLUSIVE = 3

_STATUS_NAMES = {FEASIBLE: "feasible", INFEASIBLE: "infeasible", INCONCLUSIVE: "inconclusive"}


class InfeasibleAffine(ValueError):
    """Rank-deficient affine pairings with incompatible targets."""


class BracketInvalid(ValueError):
    """bisect_radius was handed a hi endpoint that is not feasible."""


@dataclass(frozen=True)
class DykstraConfig:
    delta_feas: float = 1e-7
    max_cycles: int = 20000
    stall_window: int = 200       # cycles over which the gap must stabilize
    stall_rel: float = 1e-3
    check_every: int = 8
    # give up on sub-geometric gap decay well above tolerance; cheap but can
    # misread slowly-converging feasible runs, so accuracy-critical callers
    # turn it off
    slow_decay_cutoff: bool = True


class ConvexSet:
    """A convex set with an exact Frobenius-nearest-point projection."""

    def project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def take(self, idx: np.ndarray) -> "ConvexSet":
        """Slice per-problem parameters down to a sub-batch."""
        return self


class Subspace(ConvexSet):
    """Real span of an orthonormal family of Hermitian matrices."""

    def __init__(self, basis: np.ndarray):
        self.basis = np.asarray(basis, dtype=np.complex128)

    def project(self, x):
        coords = np.real(np.einsum("kij,...ij->...k", np.conj(self.basis), x))
        return np.einsum("...k,kij->...ij", coords, self.basis)


class PsdCone(ConvexSet):
    def project(self, x):
        return mk.psd_clip(x)


class ProjectorSet(ConvexSet):
    """A subspace given by its orthogonal projector as a callable."""

    def __init__(self, projector):
        self.projector = projector

    def project(self, x):
        return self.projector(x)


class PsdConeShifted(ConvexSet):
    """{p : p - anchor >= 0}."""

    def __init__(self, anchor: np.ndarray):
        self.anchor = np.asarray(anchor, dtype=np.complex128)

    def project(self, x):
        return self.anchor + mk.psd_clip(x - self.anchor)

    def take(self, idx):
        if self.anchor.ndim == 3:
            return PsdConeShifted(self.anchor[idx])
        return self


class OpNormBall(ConvexSet):
    """{m : ||m - center||_op <= radius}; eigenvalue clamp of the difference."""

    def __init__(self, center: np.ndarray, radius):
        self.center = np.asarray(center, dtype=np.complex128)
        self.radius = np.asarray(radius, dtype=np.float64)

    def project(self, x):
        d = x - self.center
        w, v = np.linalg.eigh(0.5 * (d + mk.adjoint(d)))
        r = self.radius[..., None] if self.radius.ndim else self.radius
        w = np.clip(w, -r, r)
        return self.center + (v * w[..., None, :]) @ mk.adjoint(v)

    def take(self, idx):
        center = self.center[idx] if self.center.ndim == 3 else self.center
        radius = self.radius[idx] if self.radius.ndim else self.radius
        return OpNormBall(center, radius)


def _l1_ball_clip(v: np.ndarray, radius: np.ndarray) -> np.ndarray:
    """Project rows of v onto the l1 ball: sorted-threshold rule, sign-safe."""
    a = np.abs(v)
    r = np.broadcast_to(np.asarray(radius, dtype=np.float64), a.shape[:-1])
    over = a.sum(axis=-1) > r
    if not np.any(over):
        return v
    u = np.sort(a, axis=-1)[..., ::-1]
    css = np.cumsum(u, axis=-1)
    k = np.arange(1, a.shape[-1] + 1)
    cond = u * k > (css - r[..., None])
    rho = np.where(np.any(cond, axis=-1), cond.shape[-1] - 1 - np.argmax(cond[..., ::-1], axis=-1), 0)
    theta = (np.take_along_axis(css, rho[..., None], axis=-1)[..., 0] - r) / (rho + 1.0)
    theta = np.maximum(theta, 0.0)
    clipped = np.sign(v) * np.maximum(a - theta[..., None], 0.0)
    return np.where(over[..., None], clipped, v)


class TraceNormBall(ConvexSet):
    """{m : ||m - center||_tr <= radius}; eigenvalue shrinkage via l1 ball."""

    def __init__(self, center: np.ndarray, radius):
        self.center = np.asarray(center, dtype=np.complex128)
        self.radius = np.asarray(radius, dtype=np.float64)

    def project(self, x):
        d = x - self.center
        w, v = np.linalg.eigh(0.5 * (d + mk.adjoint(d)))
        w = _l1_ball_clip(w, self.radius)
        return self.center + (v * w[..., None, :]) @ mk.adjoint(v)

    def take(self, idx):
        center = self.center[idx] if self.center.ndim == 3 else self.center
        radius = self.radius[idx] if self.radius.ndim else self.radius
        return TraceNormBall(center, radius)


class AffinePairings(ConvexSet):
    """{m : Re Tr(G_i* m) = c_i} for Hermitian pairing matrices G_i.

    The pairings are orthonormalized once; a dependent pairing whose target
    is inconsistent with the ones before it raises
    :class:`InfeasibleAffine`.  Targets may be per-problem ``(B, m)`` only
    when the pairing matrices are linearly independent.
    """

    def __init__(self, mats, targets, tol: float = 1e-9):
        mats = [mk.hermitian_part(g) for g in mats]
        targets = np.asarray(targets, dtype=np.float64)
        ortho: list[np.ndarray] = []
        coeff_rows: list[np.ndarray] = []   # expansion of each ortho vector in the originals
        dropped = False
        m = len(mats)
        for j, g in enumerate(mats):
            v = g.copy()
            row = np.zeros(m)
            row[j] = 1.0
            for b, rb in zip(ortho, coeff_rows):
                r = mk.re_inner(b, v)
                v = v - r * b
                row = row - r * rb
            nrm = mk.frobenius(v)
            scale = max(1.0, mk.frobenius(g))
            if nrm > tol * scale:
                ortho.append(v / nrm)
                coeff_rows.append(row / nrm)
            else:
                dropped = True
                # consistency: the dropped constraint must be implied
                implied_err = targets[..., j] - _combine(targets, row, j)
                if np.any(np.abs(implied_err) > 1e-7 * max(1.0, float(np.max(np.abs(targets))))):
                    raise InfeasibleAffine("inconsistent affine pairings")
        if dropped and targets.ndim > 1:
            raise InfeasibleAffine("per-problem targets need independent pairings")
        self.mats = np.stack(ortho) if ortho else np.zeros((0,) + mats[0].shape, np.complex128)
        coeffs = np.stack(coeff_rows) if coeff_rows else np.zeros((0, m))
        self.targets = np.einsum("km,...m->...k", coeffs, targets)

    def project(self, x):
        if self.mats.shape[0] == 0:
            return np.asarray(x)
        vals = np.real(np.einsum("kij,...ij->...k", np.conj(self.mats), x))
        return x - np.einsum("...k,kij->...ij", vals - self.targets, self.mats)

    def take(self, idx):
        if self.targets.ndim > 1:
            out = object.__new__(AffinePairings)
            out.mats = self.mats
            out.targets = self.targets[idx]
            return out
        return self


def _combine(targets: np.ndarray, row: np.ndarray, j: int) -> np.ndarray:
    """Value implied for constraint j by the accepted orthonormal pairings."""
    # row holds the expansion of (the rejected) G_j in the original pairings;
    # since G_j = sum_i row_i G_i with row_j = 1, the implied target is the
    # same combination of the original targets with the j-th term removed.
    r = row.copy()
    r[j] = 0.0
    return -np.einsum("m,...m->...", r, targets)


@dataclass
class FeasibilityResult:
    """Batched outcome of a Dykstra run."""

    status: np.ndarray            # (B,) in {FEASIBLE, INFEASIBLE, INCONCLUSIVE}
    point: np.ndarray             # (B, n, n)
    residuals: np.ndarray         # (B, m) Frobenius distances to each set
    iterations: np.ndarray        # (B,) cycles used when resolved
    gap_estimate: np.ndarray      # (B,)

    def status_str(self, i: int = 0) -> str:
        return _STATUS_NAMES[int(self.status[i])]

    @property
    def all_feasible(self) -> bool:
        return bool(np.all(self.status == FEASIBLE))


def _residuals(sets, x) -> np.ndarray:
    res = [mk.frobenius(x - s.project(x)) for s in sets]
    return np.stack([np.atleast_1d(r) for r in res], axis=-1)


def dykstra_batch(sets, start: np.ndarray, cfg: DykstraConfig | None = None,
                  witnesses: list[np.ndarray] | None = None) -> FeasibilityResult:
    """Dykstra's alternating projections with one correction term per set.

    ``witnesses`` are optional candidate points checked before iterating;
    a candidate that already satisfies every set within delta_feas resolves
    its problem as Feasible with zero iterations.  Witnesses can only ever
    short-circuit genuinely feasible problems.
    """
    if len(sets) < 2:
        raise ValueError("dykstra needs at least two sets")
    cfg = cfg or DykstraConfig()
    x = np.array(start, dtype=np.complex128, copy=True)
    if x.ndim == 2:
        x = x[None]
    batch = x.shape[0]

    status = np.zeros(batch, dtype=np.int8)
    point = x.copy()
    res_out = np.full((batch, len(sets)), np.inf)
    iters = np.zeros(batch, dtype=np.int64)
    gap = np.full(batch, np.inf)

    if witnesses:
        for w in witnesses:
            w = np.asarray(w, dtype=np.complex128)
            if w.ndim == 2:
                w = np.broadcast_to(w, x.shape)
            open_idx = np.flatnonzero(status == 0)
            if open_idx.size == 0:
                break
            sub_sets = [s.take(open_idx) for s in sets]
            r = _residuals(sub_sets, w[open_idx])
            ok = np.max(r, axis=-1) <= cfg.delta_feas
            sel = open_idx[ok]
            status[sel] = FEASIBLE
            point[sel] = w[sel]
            res_out[sel] = r[ok]
            gap[sel] = np.max(r[ok], axis=-1)

    active_idx = np.flatnonzero(status == 0)
    if active_idx.size == 0:
        return FeasibilityResult(status, point, res_out, iters, gap)

    cur_sets = [s.take(active_idx) for s in sets]
    cur_x = x[active_idx]
    corrections = np.zeros((len(sets),) + cur_x.shape, dtype=np.complex128)
    # gap history for the stall heuristic: (cycle, gap over current sub-batch)
    history: list[tuple[int, np.ndarray]] = []

    for cycle in range(1, cfg.max_cycles + 1):
        for i, s in enumerate(cur_sets):
            y = cur_x + corrections[i]
            z = s.project(y)
            corrections[i] = y - z
            cur_x = z
        if not (cycle <= 8 or cycle % cfg.check_every == 0 or cycle == cfg.max_cycles):
            continue
        res = _residuals(cur_sets, cur_x)
        g = np.max(res, axis=-1)
        feas = g <= cfg.delta_feas

        stalled = np.zeros_like(feas)
        ref = None
        ref_slow = None
        for c_old, g_old in history:
            if cycle - c_old >= cfg.stall_window:
                ref = g_old
            if cycle - c_old >= 5 * cfg.stall_window:
                ref_slow = g_old
            if cycle - c_old < cfg.stall_window:
                break
        if ref is not None:
            stalled = (~feas) & (g > 2 * cfg.delta_feas) & (
                np.abs(g - ref) <= cfg.stall_rel * np.maximum(ref, cfg.delta_feas)
            )
        if ref_slow is not None and cfg.slow_decay_cutoff:
            # secondary heuristic: a gap well above tolerance decaying slower
            # than geometrically cannot close within the cycle budget
            slow = (~feas) & (g > 50 * cfg.delta_feas) & (
                (ref_slow - g) <= 0.25 * np.maximum(ref_slow, cfg.delta_feas))
            stalled = stalled | slow
        history.append((cycle, g.copy()))
        history = [(c, h) for c, h in history if cycle - c <= 6 * cfg.stall_window]

        newly = feas | stalled
        if np.any(newly):
            sel = active_idx[newly]
            status[sel] = np.where(feas[newly], FEASIBLE, INFEASIBLE)
            point[sel] = cur_x[newly]
            res_out[sel] = res[newly]
            iters[sel] = cycle
            gap[sel] = g[newly]
            keep = np.flatnonzero(~newly)
            if keep.size == 0:
                break
            active_idx = active_idx[keep]
            cur_x = cur_x[keep]
            corrections = corrections[:, keep]
            cur_sets = [s.take(keep) for s in cur_sets]
            history = [(c, h[keep]) for c, h in history]
        else:
            gap[active_idx] = g

    open_idx = np.flatnonzero(status == 0)
    if open_idx.size:
        # still-running problems are exactly the current sub-batch
        status[open_idx] = INCONCLUSIVE
        point[open_idx] = cur_x
        res_out[open_idx] = _residuals(cur_sets, cur_x)
        iters[open_idx] = cfg.max_cycles
        gap[open_idx] = np.max(res_out[open_idx], axis=-1)
    return FeasibilityResult(status, point, res_out, iters, gap)


def dykstra(sets, start: np.ndarray, cfg: DykstraConfig | None = None,
            witnesses=None) -> FeasibilityResult:
    """Single-problem convenience wrapper around :func:`dykstra_batch`."""
    return dykstra_batch(sets, np.asarray(start)[None] if np.asarray(start).ndim == 2 else start,
                         cfg, witnesses)


@dataclass
class BisectionResult:
    threshold: np.ndarray          # (B,)
    point: np.ndarray | None       # last feasible point per problem, (B, n, n)
    feasible_seen: np.ndarray      # (B,) bool
    inconclusive_seen: np.ndarray  # (B,) bool
    infeasible_numerical: np.ndarray  # (B,) bool: Infeasible verdicts were used
    bracket_invalid: np.ndarray    # (B,) bool
    steps: int = 0

    def flags(self) -> list[str]:
        out = []
        if np.any(self.inconclusive_seen):
            out.append("inconclusive-treated-infeasible")
        if np.any(self.infeasible_numerical):
            out.append("numerical-infeasibility")
        if np.any(self.bracket_invalid):
            out.append("bracket-invalid")
        return out


def bisect_radius_batch(problem, lo, hi, tol: float,
                        cfg: DykstraConfig | None = None,
                        witnesses_at=None,
                        check_hi: bool = True) -> BisectionResult:
    """Bisection on a radius-parametrized feasibility family.

    ``problem(t)`` with ``t`` of shape ``(B,)`` must return ``(sets, start)``
    for the whole batch.  Feasibility must be monotone in t.  Inconclusive
    inner results are treated as Infeasible and flagged.  ``witnesses_at``,
    if given, is a callable ``t -> list of candidate points`` forwarded to
    the Dykstra engine.
    """
    cfg = cfg or DykstraConfig()
    lo = np.array(lo, dtype=np.float64, copy=True).reshape(-1)
    hi = np.array(hi, dtype=np.float64, copy=True).reshape(-1)
    batch = lo.shape[0]
    feasible_seen = np.zeros(batch, dtype=bool)
    inconclusive_seen = np.zeros(batch, dtype=bool)
    infeasible_used = np.zeros(batch, dtype=bool)
    bracket_invalid = np.zeros(batch, dtype=bool)
    point: np.ndarray | None = None
    steps = 0

    def run(t, idx):
        sets, start = problem(t)
        sets = [s.take(idx) for s in sets]
        start = start[idx] if start.ndim == 3 and start.shape[0] == batch else start
        wit = None
        if witnesses_at is not None:
            wit = [w[idx] if w.ndim == 3 and w.shape[0] == batch else w for w in witnesses_at(t)]
        return dykstra_batch(sets, start, cfg, witnesses=wit)

    if check_hi:
        res = run(hi, np.arange(batch))
        steps += 1
        ok = res.status == FEASIBLE
        feasible_seen |= ok
        inconclusive_seen |= res.status == INCONCLUSIVE
        bracket_invalid = ~ok
        point = res.point.copy()
    while True:
        active = (~bracket_invalid) & ((hi - lo) > tol)
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        t = np.where(active, 0.5 * (lo + hi), hi)
        res = run(t, idx)
        steps += 1
        feas = res.status == FEASIBLE
        hi[idx[feas]] = t[idx[feas]]
        lo[idx[~feas]] = t[idx[~feas]]
        if point is None:
            point = np.zeros((batch,) + res.point.shape[1:], dtype=np.complex128)
        point[idx[feas]] = res.point[feas]
        feasible_seen[idx[feas]] = True
        inconclusive_seen[idx] |= res.status == INCONCLUSIVE
        infeasible_used[idx] |= ~feas
    threshold = 0.5 * (lo + hi)
    threshold[bracket_invalid] = hi[bracket_invalid]
    return BisectionResult(threshold, point, feasible_seen, inconclusive_seen,
                           infeasible_used, bracket_invalid, steps)


def bisect_radius(problem, lo: float, hi: float, tol: float,
                  cfg: DykstraConfig | None = None) -> float:
    """Single-problem bisection; raises :class:`BracketInvalid` when the
    upper endpoint is not feasible."""

    def batched(t):
        sets, start = problem(float(t[0]))
        return sets, (start[None] if start.ndim == 2 else start)

    res = bisect_radius_batch(batched, [lo], [hi], tol, cfg)
    if bool(res.bracket_invalid[0]):
        raise BracketInvalid("problem(hi) is not feasible")
    return float(res.threshold[0])
