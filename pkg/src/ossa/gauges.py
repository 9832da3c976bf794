"""Distances to matrix-level cones, Russell's maximal gauge, and gap searches.

The central computation is dist(x, M_n(E)_+) in the operator norm, obtained
by bisecting the radius of an operator-norm ball against feasibility of
{y in span} /\ {y >= 0} /\ {||x - y||_op <= t}.  Cheap constructive
witnesses (the positive part when it stays in the span, the unital shift
x + ||x_-|| I, the Frobenius cone projection) short-circuit feasible cases;
infeasibility always comes from the Dykstra gap heuristic.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import convexproj as cvx
from . import matkernel as mk
from . import opspace as osp

#: default bisection tolerance on distances
TOL_DIST = 1e-4
#: default tolerance on gauge gaps
TOL_GAP = 5e-4


def spectral_neg(x) -> np.ndarray | float:
    """||x_-|| = max(0, -lambda_min)."""
    lo, _ = mk.spectral_bounds(np.asarray(x, dtype=np.complex128))
    out = np.maximum(0.0, -lo)
    return float(out) if out.ndim == 0 else out


def spectral_pos(x) -> np.ndarray | float:
    """||x_+|| = max(0, lambda_max)."""
    _, hi = mk.spectral_bounds(np.asarray(x, dtype=np.complex128))
    out = np.maximum(0.0, hi)
    return float(out) if out.ndim == 0 else out


def _cone_witnesses(level: osp.Level, xs: np.ndarray, extra: list[np.ndarray]) -> list[np.ndarray]:
    """Candidate points of span /\ PSD near xs; invalid ones are filtered by
    the engine's residual check, so candidates need not be verified here."""
    pos, _ = mk.pos_neg_parts(xs)
    ident = mk.eye(level.dim)
    shift = xs + spectral_neg(xs)[..., None, None] * ident
    return [np.zeros_like(xs), pos, shift] + extra


def frobenius_cone_projection(level: osp.Level, xs: np.ndarray,
                              cfg: cvx.DykstraConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Frobenius-nearest points of span /\ PSD, plus op-norm upper bounds
    on the operator-norm distance they certify."""
    sets = [cvx.Subspace(level.sa_basis), cvx.PsdCone()]
    res = cvx.dykstra_batch(sets, xs, cfg)
    upper = mk.op_norm_hermitian(xs - res.point) + 2.0 * np.max(res.residuals, axis=-1)
    return res.point, np.atleast_1d(upper)


def cone_ball_feasibility(level: osp.Level, centers: np.ndarray, radii,
                          cfg: cvx.DykstraConfig | None = None,
                          extra_witnesses: list[np.ndarray] | None = None) -> cvx.FeasibilityResult:
    """Feasibility of {y in span} /\ {y >= 0} /\ {||center - y||_op <= r},
    the single test behind every dist(x, cone) <= r decision."""
    centers = np.asarray(centers, dtype=np.complex128)
    if centers.ndim == 2:
        centers = centers[None]
    sets = [cvx.Subspace(level.sa_basis), cvx.PsdCone(), cvx.OpNormBall(centers, radii)]
    wits = _cone_witnesses(level, centers, list(extra_witnesses or []))
    return cvx.dykstra_batch(sets, centers, cfg, witnesses=wits)


def dist_to_cone_batch(level: osp.Level, xs: np.ndarray, tol: float = TOL_DIST,
                       cfg: cvx.DykstraConfig | None = None) -> cvx.BisectionResult:
    """Batched dist(x, M_n(E)_+) in operator norm via radius bisection.

    Bracket: lo = ||x_-|| (spectral lower bound), hi = ||x|| (0 is in the
    cone).  Inputs must pass membership; raises :class:`opspace.NotInSpan`.
    """
    xs = np.asarray(xs, dtype=np.complex128)
    if xs.ndim == 2:
        xs = xs[None]
    osp.sa_coords(level.sa_basis, xs)
    lo = np.atleast_1d(spectral_neg(xs)).astype(float)
    hi = np.atleast_1d(mk.op_norm_hermitian(xs)).astype(float)
    hi = np.maximum(hi, lo)
    proj_pts, _ = frobenius_cone_projection(level, xs, cfg)
    base_wits = _cone_witnesses(level, xs, [proj_pts])

    def problem(t):
        return [cvx.Subspace(level.sa_basis), cvx.PsdCone(), cvx.OpNormBall(xs, t)], xs

    def witnesses_at(t):
        return base_wits

    return cvx.bisect_radius_batch(problem, lo, hi, tol, cfg, witnesses_at=witnesses_at)


def dist_to_cone(level: osp.Level, x: np.ndarray, tol: float = TOL_DIST,
                 cfg: cvx.DykstraConfig | None = None) -> float:
    """dist(x, M_n(E)_+) for a single Hermitian element of the level span."""
    res = dist_to_cone_batch(level, np.asarray(x)[None] if np.asarray(x).ndim == 2 else x, tol, cfg)
    return float(res.threshold[0])


def gauge_max(level: osp.Level, x: np.ndarray, tol: float = TOL_DIST,
              cfg: cvx.DykstraConfig | None = None) -> float:
    """Russell's maximal gauge nu_max(x) = dist(x, -M_n(E)_+) = dist(-x, cone)."""
    return dist_to_cone(level, -np.asarray(x, dtype=np.complex128), tol, cfg)


@dataclass
class GaugeReport:
    level_n: int
    dist_pos: float
    nu_max: float
    spectral_neg: float
    spectral_pos: float
    gap: float
    flags: list[str] = field(default_factory=list)


def gauge_report(level: osp.Level, x: np.ndarray, tol: float = TOL_DIST,
                 cfg: cvx.DykstraConfig | None = None) -> GaugeReport:
    x = mk.hermitian_part(np.asarray(x, dtype=np.complex128))
    both = dist_to_cone_batch(level, np.stack([x, -x]), tol, cfg)
    sn = float(spectral_neg(x))
    return GaugeReport(
        level_n=level.n,
        dist_pos=float(both.threshold[0]),
        nu_max=float(both.threshold[1]),
        spectral_neg=sn,
        spectral_pos=float(spectral_pos(x)),
        gap=float(both.threshold[0]) - sn,
        flags=both.flags(),
    )


def deterministic_probes(level: osp.Level, max_pairs: int = 36) -> np.ndarray:
    """+-(each basis element) and +-(normalized sums/differences of pairs).

    The probe order is fixed; gap-search ties break by first occurrence here.
    """
    basis = level.sa_basis
    k = basis.shape[0]
    out: list[np.ndarray] = []
    for i in range(k):
        b = basis[i] / mk.op_norm_hermitian(basis[i])
        out.append(b)
        out.append(-b)
    pairs = 0
    for i in range(k):
        for j in range(i + 1, k):
            if pairs >= max_pairs:
                break
            for combo in (basis[i] + basis[j], basis[i] - basis[j]):
                nrm = mk.op_norm_hermitian(combo)
                if nrm > 1e-12:
                    out.append(combo / nrm)
                    out.append(-combo / nrm)
            pairs += 1
        if pairs >= max_pairs:
            break
    return np.stack(out)


@dataclass
class GapSearchResult:
    max_gap: float
    witness: np.ndarray | None
    witness_index: int
    certified: bool            # True when max_gap came from an exact bisection
    screened_bound: float      # largest screening upper bound over all samples
    n_candidates: int
    n_refined: int
    flags: list[str] = field(default_factory=list)


def gauge_gap_search(level: osp.Level, samples: int = 200, seed: int = 42,
                     tol_gap: float = TOL_GAP, tol_dist: float = TOL_DIST,
                     cfg: cvx.DykstraConfig | None = None,
                     refine_cap: int = 32) -> GapSearchResult:
    """Maximize dist(x, cone) - ||x_-|| over probes plus a sampled sphere.

    Every sample is first screened with a certified upper bound on the
    distance (constructive witnesses plus the Frobenius cone projection);
    only samples whose screened gap exceeds tol_gap are refined with the
    exact bisection.  A Fail therefore always carries a bisection-certified
    gap, while a no-gap outcome is backed by per-sample upper bounds.
    """
    probes = deterministic_probes(level)
    xs = np.concatenate([probes, osp.sample_sa_unit(level, seed, samples)], axis=0)
    sneg = np.atleast_1d(spectral_neg(xs))

    proj_pts, upper_proj = frobenius_cone_projection(level, xs, cfg)
    upper = upper_proj.copy()
    # constructive witnesses give exact upper bounds where they stay in span
    pos, _ = mk.pos_neg_parts(xs)
    for cand, bound in ((pos, sneg), (xs + sneg[..., None, None] * mk.eye(level.dim), sneg)):
        coords = np.real(np.einsum("kij,bij->bk", np.conj(level.sa_basis), cand))
        recon = np.einsum("bk,kij->bij", coords, level.sa_basis)
        ok = mk.frobenius(cand - recon) <= osp.TAU_MEM * np.maximum(1.0, mk.frobenius(cand))
        psd = mk.min_eig(cand) >= -1e-9
        upper = np.where(ok & psd, np.minimum(upper, bound), upper)
    gap_bound = upper - sneg

    order = np.argsort(-gap_bound, kind="stable")
    candidates = [int(i) for i in order if gap_bound[i] > tol_gap]
    flags: list[str] = []
    refined = 0
    best_gap = -np.inf
    best_idx = -1
    # refine in bound-descending chunks; a certified failure ends the search
    # early (the largest screened bound was refined first), while a clean
    # outcome requires every candidate to be refined
    for lo_pos in range(0, len(candidates), refine_cap):
        chunk = candidates[lo_pos:lo_pos + refine_cap]
        res = dist_to_cone_batch(level, xs[chunk], tol_dist, cfg)
        refined += len(chunk)
        flags.extend(f for f in res.flags() if f not in flags)
        gaps = res.threshold - sneg[chunk]
        # ties break by probe/sample order, i.e. smallest original index
        j = min(range(len(chunk)), key=lambda q: (-gaps[q], chunk[q]))
        if gaps[j] > best_gap:
            best_gap = float(gaps[j])
            best_idx = chunk[j]
        if best_gap > tol_gap:
            if refined < len(candidates):
                flags.append("refine-stopped-on-fail")
            break
    if best_idx >= 0:
        return GapSearchResult(best_gap, xs[best_idx], best_idx, True,
                               float(np.max(gap_bound)), len(candidates), refined, flags)
    # nothing refined above tol: certified no-gap via the screening bounds
    idx = int(np.argmax(gap_bound))
    return GapSearchResult(float(gap_bound[idx]), xs[idx], idx, False,
                           float(np.max(gap_bound)), len(candidates), refined, flags)


def dual_certificate_check(level: osp.Level, x: np.ndarray, rho: np.ndarray,
                           dist_value: float | None = None, tol: float = TOL_GAP,
                           cfg: cvx.DykstraConfig | None = None) -> tuple[bool, float, float]:
    """Cross-check -phi(x) <= dist(x, cone) + tol for a validated functional.

    Returns (ok, dual_value, dist).  Never used as the primary verdict.
    """
    x = mk.hermitian_part(np.asarray(x, dtype=np.complex128))
    rho = mk.hermitian_part(np.asarray(rho, dtype=np.complex128))
    value = -float(np.real(np.trace(rho @ x)))
    d = dist_to_cone(level, x, cfg=cfg) if dist_value is None else float(dist_value)
    return value <= d + tol, value, d
