"""Werner's unitisation cone and order-unit norm, and Russell's hat gauge.

A unitised element at level n is a pair (x, a) with x in M_n(E) (realized in
M_{nd}) and a an n x n Hermitian scalar part.  Werner positivity compresses
x by (a + eps)^{-1/2} and asks the distance to the level cone to stay <= 1
for every eps in a geometric grid; the order-unit norm and Russell's hat
gauge are bisections on top of that single feasibility test.

The compressed distance is provably non-increasing in eps (the extra
compression is a scalar-level contraction that the cone absorbs), so inner
bisections test only the smallest grid epsilon; the public membership check
still evaluates the full grid, and every report is "grid-verified".
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import convexproj as cvx
from . import gauges
from . import matkernel as mk
from . import opspace as osp

#: geometric epsilon grid: eps0 * ratio^k, k = 0..count-1
EPS0 = 1.0
EPS_RATIO = 0.25
EPS_COUNT = 9

#: default tolerance on unitised norms and memberships
TOL_UNIT = 1e-4


def epsilon_grid() -> list[float]:
    return [EPS0 * EPS_RATIO ** k for k in range(EPS_COUNT)]


def _check_pair(level: osp.Level, x: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = mk.require_hermitian(x)
    a = mk.require_hermitian(a)
    if x.shape != (level.dim, level.dim):
        raise osp.DimensionMismatch("matrix part has wrong level dimension")
    if a.shape != (level.n, level.n):
        raise osp.DimensionMismatch("scalar part must be n x n at level n")
    osp.sa_coords(level.sa_basis, x)
    return x, a


def _compress(level: osp.Level, xs: np.ndarray, scalars: np.ndarray, eps) -> np.ndarray:
    """(a + eps)^{-1/2} x (a + eps)^{-1/2} with the scalar leg on M_n."""
    eps = np.asarray(eps, dtype=np.float64)
    a_eps = scalars + eps[..., None, None] * mk.eye(level.n)
    s = mk.inv_sqrt_psd(a_eps)
    d = level.base.dim
    s_full = np.kron(s, np.eye(d))
    return s_full @ xs @ s_full


@dataclass
class WernerMembership:
    positive: bool
    failing_eps: float | None
    # per-eps outcome; distances only filled when requested
    checks: list[tuple[float, bool, float | None]]
    scalar_min_eig: float
    flags: list[str] = field(default_factory=list)


def werner_cone_member(level: osp.Level, x: np.ndarray, a: np.ndarray,
                       tol: float = TOL_UNIT, cfg: cvx.DykstraConfig | None = None,
                       with_distances: bool = False) -> WernerMembership:
    """Membership of the selfadjoint pair (x, a) in the Werner cone.

    Positive iff a >= -tol and dist((a+eps)^{-1/2} x (a+eps)^{-1/2}, cone)
    <= 1 + tol for every eps on the grid (plus eps = 0 when a is PD).
    """
    x, a = _check_pair(level, x, a)
    lam_min = float(mk.min_eig(a))
    flags = ["grid-verified"]
    grid = list(epsilon_grid())
    if lam_min > 1e-8:
        grid.append(0.0)
    if lam_min < -tol:
        return WernerMembership(False, None, [], lam_min, flags)
    a_psd = a + max(0.0, -lam_min) * mk.eye(level.n)  # clip tiny dips for the compression
    zs = np.stack([_compress(level, x, a_psd, e) for e in grid])
    res = gauges.cone_ball_feasibility(level, zs, 1.0 + tol, cfg)
    feas = res.status == cvx.FEASIBLE
    flags.extend(f for f in (["inconclusive-treated-infeasible"]
                             if np.any(res.status == cvx.INCONCLUSIVE) else []))
    dists: list[float | None] = [None] * len(grid)
    if with_distances:
        dres = gauges.dist_to_cone_batch(level, zs, tol, cfg)
        dists = [float(t) for t in dres.threshold]
    checks = [(float(e), bool(f), dv) for e, f, dv in zip(grid, feas, dists)]
    bad = [c for c in checks if not c[1]]
    return WernerMembership(not bad, bad[0][0] if bad else None, checks, lam_min, flags)


def _pair_membership_batch(level: osp.Level, xs: np.ndarray, scalars: np.ndarray,
                           tol: float, cfg: cvx.DykstraConfig | None,
                           eps: float | None = None) -> np.ndarray:
    """Vectorized Werner membership of pairs (xs[i], scalars[i]) at the
    binding epsilon (the smallest grid point, by monotonicity)."""
    lam = np.linalg.eigh(scalars)[0][..., 0]
    ok_scalar = lam >= -tol
    shift = np.maximum(0.0, -lam)
    a_psd = scalars + shift[..., None, None] * mk.eye(level.n)
    e = epsilon_grid()[-1] if eps is None else eps
    zs = _compress(level, xs, a_psd, np.full(xs.shape[0], e))
    res = gauges.cone_ball_feasibility(level, zs, 1.0 + tol, cfg)
    return ok_scalar & (res.status == cvx.FEASIBLE)


def unitised_norm(level: osp.Level, x: np.ndarray, a: np.ndarray,
                  tol: float = TOL_UNIT, cfg: cvx.DykstraConfig | None = None) -> float:
    """Order-unit norm in the unitisation: inf{t : t(0,1) +- (x,a) positive}."""
    x, a = _check_pair(level, x, a)
    res = unitised_norm_batch(level, x[None], a[None], tol, cfg)
    return float(res[0])


def unitised_norm_batch(level: osp.Level, xs: np.ndarray, scalars: np.ndarray,
                        tol: float = TOL_UNIT,
                        cfg: cvx.DykstraConfig | None = None) -> np.ndarray:
    """Batched order-unit norms by bisection over stacked +- memberships."""
    xs = np.asarray(xs, dtype=np.complex128)
    scalars = np.asarray(scalars, dtype=np.complex128)
    batch = xs.shape[0]
    norm_a = np.atleast_1d(mk.op_norm_hermitian(scalars)).astype(float)
    lo = norm_a.copy()
    hi = norm_a + np.atleast_1d(mk.op_norm_hermitian(xs)) + tol
    ident = mk.eye(level.n)
    while np.any(hi - lo > tol):
        mid = np.where(hi - lo > tol, 0.5 * (lo + hi), hi)
        stack_x = np.concatenate([xs, -xs], axis=0)
        stack_a = np.concatenate([mid[:, None, None] * ident + scalars,
                                  mid[:, None, None] * ident - scalars], axis=0)
        ok = _pair_membership_batch(level, stack_x, stack_a, tol, cfg)
        both = ok[:batch] & ok[batch:]
        hi = np.where((hi - lo > tol) & both, mid, hi)
        lo = np.where((hi - lo > tol) & ~both, mid, lo)
    return 0.5 * (lo + hi)


def russell_hat_gauge(level: osp.Level, x: np.ndarray, a: np.ndarray,
                      tol: float = TOL_UNIT, cfg: cvx.DykstraConfig | None = None) -> float:
    """Russell's unitised gauge: inf{t > lambda_max(a) : nu_max of the
    (tI - a)^{-1/2}-compression of x is <= 1}."""
    x, a = _check_pair(level, x, a)
    return float(_russell_gauge_batch(level, x[None], a[None], tol, cfg)[0])


def _russell_gauge_batch(level: osp.Level, xs: np.ndarray, scalars: np.ndarray,
                         tol: float, cfg: cvx.DykstraConfig | None) -> np.ndarray:
    lam_max = np.linalg.eigh(scalars)[0][..., -1]
    lo = lam_max + 1e-12
    hi = lam_max + np.atleast_1d(mk.op_norm_hermitian(xs)) + 1.0
    while np.any(hi - lo > tol):
        mid = np.where(hi - lo > tol, 0.5 * (lo + hi), hi)
        c = mid[:, None, None] * mk.eye(level.n) - scalars
        s = mk.inv_sqrt_psd(c, floor=1e-14)
        s_full = np.kron(s, np.eye(level.base.dim))
        zs = s_full @ xs @ s_full
        # nu_max(z) <= 1  <=>  dist(-z, cone) <= 1
        res = gauges.cone_ball_feasibility(level, -zs, 1.0 + tol, cfg)
        ok = res.status == cvx.FEASIBLE
        hi = np.where((hi - lo > tol) & ok, mid, hi)
        lo = np.where((hi - lo > tol) & ~ok, mid, lo)
    return 0.5 * (lo + hi)


def _double(level: osp.Level, x: np.ndarray, a: np.ndarray) -> tuple[osp.Level, np.ndarray, np.ndarray]:
    """Selfadjoint doubling [[0, z], [z*, 0]] of a general pair, at level 2n."""
    lev2 = osp.amplify(level.base, 2 * level.n)
    up = np.zeros((2, 2), dtype=np.complex128)
    up[0, 1] = 1.0
    x2 = mk.kron(up, x) + mk.kron(up.T, mk.adjoint(x))
    a2 = np.kron(up, a) + np.kron(up.T, np.conj(a).T)
    return lev2, x2, a2


def unitised_norm_general(level: osp.Level, x: np.ndarray, a: np.ndarray,
                          tol: float = TOL_UNIT,
                          cfg: cvx.DykstraConfig | None = None) -> float:
    """Unitised norm of a not-necessarily-selfadjoint pair (x, a).

    Routed through the standard selfadjoint 2x2 embedding at level 2n; for
    selfadjoint pairs this agrees with :func:`unitised_norm`.
    """
    x = np.asarray(x, dtype=np.complex128)
    a = np.asarray(a, dtype=np.complex128)
    if x.shape != (level.dim, level.dim) or a.shape != (level.n, level.n):
        raise osp.DimensionMismatch("pair has wrong level dimensions")
    osp.complex_coords(level.sa_basis, x)
    lev2, x2, a2 = _double(level, x, a)
    return unitised_norm(lev2, x2, a2, tol, cfg)


def russell_norm_general(level: osp.Level, x: np.ndarray, a: np.ndarray,
                         tol: float = TOL_UNIT,
                         cfg: cvx.DykstraConfig | None = None) -> float:
    """Hat-gauge norm of a general pair via the doubling formula."""
    x = np.asarray(x, dtype=np.complex128)
    a = np.asarray(a, dtype=np.complex128)
    if x.shape != (level.dim, level.dim) or a.shape != (level.n, level.n):
        raise osp.DimensionMismatch("pair has wrong level dimensions")
    osp.complex_coords(level.sa_basis, x)
    lev2, x2, a2 = _double(level, x, a)
    vals = _russell_gauge_batch(lev2, np.stack([x2, -x2]), np.stack([a2, -a2]), tol, cfg)
    return float(np.max(vals))


def russell_norm(level: osp.Level, x: np.ndarray, a: np.ndarray,
                 tol: float = TOL_UNIT, cfg: cvx.DykstraConfig | None = None) -> float:
    """The norm induced by the hat gauge, via the 2n off-diagonal doubling.

    For selfadjoint (x, a) the two doubled gauges coincide; both are
    evaluated and the max is returned.
    """
    x, a = _check_pair(level, x, a)
    lev2, x2, a2 = _double(level, x, a)
    vals = _russell_gauge_batch(lev2, np.stack([x2, -x2]), np.stack([a2, -a2]), tol, cfg)
    return float(np.max(vals))


def concrete_unitised_norm(space: osp.OperatorSpace, level: osp.Level,
                           x: np.ndarray, a: np.ndarray,
                           algebra: osp.GeneratedAlgebra | None = None) -> float:
    """Norm of (x, a) under the concrete realisation of the unitisation.

    ||x + a (x) I_d|| when the unit of C*(E) differs from the ambient
    identity; max of that with ||a|| when the unit is the ambient identity
    (the extra corner of H + C).  In a finite-dimensional ambient the
    generated algebra always has a support-projection unit, so these are the
    only two cases.
    """
    x, a = _check_pair(level, x, a)
    alg = algebra or osp.generated_algebra(space)
    main = float(mk.op_norm_hermitian(x + mk.kron(a, mk.eye(space.dim))))
    if alg.unit_is_identity:
        return max(main, float(mk.op_norm_hermitian(a)))
    return main


@dataclass
class UnitisationGapResult:
    max_gap: float
    witness_x: np.ndarray | None
    witness_a: np.ndarray | None
    certified: bool
    n_candidates: int
    n_refined: int
    one_sided_violation: float    # max(concrete - abstract) observed, ~<= tol
    flags: list[str] = field(default_factory=list)


def unitisation_gap_search(space: osp.OperatorSpace, level: osp.Level,
                           samples: int = 100, seed: int = 42,
                           tol_gap: float = 1e-3, tol: float = TOL_UNIT,
                           cfg: cvx.DykstraConfig | None = None,
                           algebra: osp.GeneratedAlgebra | None = None,
                           refine_cap: int = 48) -> UnitisationGapResult:
    """Largest observed abstract-minus-concrete unitised norm difference.

    Candidates are screened by testing Werner membership of
    (+-x, (c + 0.9 tol_gap) I +- a) in one batched feasibility run; only
    failing candidates get the full norm bisection.
    """
    alg = algebra or osp.generated_algebra(space)
    probes_x = gauges.deterministic_probes(level)
    n = level.n
    ident = mk.eye(n)
    cand_x: list[np.ndarray] = []
    cand_a: list[np.ndarray] = []
    for px in probes_x:
        nx = float(mk.op_norm_hermitian(px))
        for av in (0.0, -0.5 * nx, -nx, 0.5 * nx):
            cand_x.append(px)
            cand_a.append(av * ident)
    rng = np.random.default_rng(seed)
    xs = osp.sample_sa_unit(level, seed, samples)
    for i in range(samples):
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        am = mk.hermitian_part(g)
        nrm = mk.op_norm_hermitian(am)
        cand_x.append(xs[i])
        cand_a.append(am / max(nrm, 1e-12))
    cx = np.stack(cand_x)
    ca = np.stack(cand_a)
    batch = cx.shape[0]

    conc = np.array([concrete_unitised_norm(space, level, cx[i], ca[i], alg)
                     for i in range(batch)])
    t_test = conc + 0.9 * tol_gap
    stack_x = np.concatenate([cx, -cx], axis=0)
    stack_a = np.concatenate([t_test[:, None, None] * ident + ca,
                              t_test[:, None, None] * ident - ca], axis=0)
    ok = _pair_membership_batch(level, stack_x, stack_a, tol, cfg)
    passed = ok[:batch] & ok[batch:]

    flags: list[str] = []
    candidates = [int(i) for i in np.flatnonzero(~passed)]
    refined = 0
    best_gap = -np.inf
    best_i = -1
    one_sided = 0.0
    for lo_pos in range(0, len(candidates), refine_cap):
        chunk = candidates[lo_pos:lo_pos + refine_cap]
        vals = unitised_norm_batch(level, cx[chunk], ca[chunk], tol, cfg)
        refined += len(chunk)
        gaps = vals - conc[chunk]
        one_sided = max(one_sided, float(np.max(conc[chunk] - vals)))
        j = min(range(len(chunk)), key=lambda q: (-gaps[q], chunk[q]))
        if gaps[j] > best_gap:
            best_gap = float(gaps[j])
            best_i = chunk[j]
        if best_gap > tol_gap:
            if refined < len(candidates):
                flags.append("refine-stopped-on-fail")
            break
    if best_i >= 0:
        return UnitisationGapResult(best_gap, cx[best_i], ca[best_i], True,
                                    len(candidates), refined, one_sided, flags)
    return UnitisationGapResult(0.9 * tol_gap, None, None, False, 0, 0, 0.0, flags)
