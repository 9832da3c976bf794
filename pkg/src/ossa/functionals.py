"""Functionals on matrix levels, their norms, positivity and extensions.

A selfadjoint functional on M_n(E) is stored through a Hermitian matrix rho
of size n*d, acting as M -> Tr(rho M).  The restricted norm is computed by
quotient trace-norm duality (minimal trace norm over the annihilator coset);
positive extensions are minimum-trace PSD feasibility problems; the Arveson
correspondence moves between functionals on M_n(E) and completely positive
maps E -> M_n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import convexproj as cvx
from . import gauges
from . import matkernel as mk
from . import opspace as osp

#: cone samples per level for sampled positivity / apg rank decisions
N_CONE = 64
#: singular-value threshold in apg rank decisions
TAU_RANK_APG = 1e-7


class SpectrumOneSided(ValueError):
    """cp_extend_singly_generated needs lambda_min < 0 < lambda_max."""


@dataclass(frozen=True)
class Functional:
    """M -> Tr(rho M) restricted to M_n(E); rho Hermitian on the level space."""

    level: osp.Level
    rho: np.ndarray

    def __post_init__(self):
        rho = mk.require_hermitian(self.rho)
        if rho.shape != (self.level.dim, self.level.dim):
            raise osp.DimensionMismatch("functional representative has wrong dimension")
        object.__setattr__(self, "rho", rho)


def evaluate(func: Functional, m: np.ndarray) -> float:
    """Tr(rho M) for Hermitian M in the level span (real up to round-off)."""
    m = mk.require_hermitian(m)
    osp.sa_coords(func.level.sa_basis, m)
    val = np.trace(func.rho @ m)
    return float(np.real(val))


def pairings(func: Functional) -> np.ndarray:
    """Re Tr(B_i rho) against the level's orthonormal sa basis."""
    return np.real(np.einsum("kij,ji->k", func.level.sa_basis, func.rho))


def restricted_norm(func: Functional, tol: float = 1e-7, max_iter: int = 50000) -> float:
    """Norm of the functional on the span, via Hahn-Banach duality.

    Equals the minimum of ||sigma||_tr over Hermitian sigma that agree with
    rho on every sa-basis element.  The trace-norm ball is tangent to the
    coset at the optimum, which starves alternating projections, so the
    minimum is computed by Douglas-Rachford splitting (eigenvalue
    soft-threshold against the exact affine projection); the reported value
    is the trace norm of a feasible iterate.
    """
    level = func.level
    rho = func.rho
    if mk.trace_norm(rho) < 1e-14:
        return 0.0
    aff = cvx.AffinePairings(level.sa_basis, pairings(func))
    lam = 0.25 * float(mk.trace_norm(rho))
    z = rho.copy()
    best = float(mk.trace_norm(aff.project(rho)))
    last = np.inf
    for it in range(1, max_iter + 1):
        w, v = np.linalg.eigh(0.5 * (z + mk.adjoint(z)))
        w = np.sign(w) * np.maximum(np.abs(w) - lam, 0.0)
        s = (v * w[None, :]) @ mk.adjoint(v)
        y = aff.project(2.0 * s - z)
        z = z + y - s
        if it % 25 == 0 or it == max_iter:
            feas = aff.project(s)
            val = float(mk.trace_norm(feas))
            best = min(best, val)
            if abs(val - last) <= tol * max(1.0, val) and mk.frobenius(s - y) <= 1e-6 * max(1.0, val):
                break
            last = val
    return best


def restricted_norm_bisect(func: Functional, tol: float = 1e-3,
                           cfg: cvx.DykstraConfig | None = None) -> float:
    """The bisect-radius route over {coset} /\ {trace-norm ball}.

    Kept as an independent cross-check of :func:`restricted_norm`; near the
    threshold the ball is tangent to the coset, limiting the attainable
    accuracy to roughly sqrt(delta_feas).
    """
    level = func.level
    targets = pairings(func)
    rho = func.rho
    hi = float(mk.trace_norm(rho))
    if hi < 1e-14:
        return 0.0
    # |phi(B_i)| <= ||phi|| for unit-norm probes gives a cheap lower bracket
    probes = gauges.deterministic_probes(level)
    lo = float(np.max(np.abs(np.real(np.einsum("pij,ji->p", probes, rho)))))

    def problem(t):
        sets = [cvx.AffinePairings(level.sa_basis, targets),
                cvx.TraceNormBall(np.zeros_like(rho), t)]
        return sets, rho[None]

    res = cvx.bisect_radius_batch(problem, [lo], [hi], tol, cfg)
    return float(res.threshold[0])


@dataclass
class PositivityCheck:
    kind: str                 # "exact" | "sampled" | "fail"
    witness: np.ndarray | None = None
    min_value: float = 0.0
    n_points: int = 0


def _project_onto_span_psd(basis: np.ndarray, targets: np.ndarray,
                           cfg: cvx.DykstraConfig | None) -> np.ndarray:
    sets = [cvx.Subspace(basis), cvx.PsdCone()]
    return cvx.dykstra_batch(sets, targets, cfg).point


def _restrict_span_to_face(basis: np.ndarray, face: np.ndarray,
                           tol: float = 1e-6) -> np.ndarray:
    """Basis of {x in span : x = P x P} for a face projection P."""
    resid = basis - face[None] @ basis @ face[None]
    flat = resid.reshape(basis.shape[0], -1)
    a = np.concatenate([flat.real, flat.imag], axis=1)
    u, sv, _ = np.linalg.svd(a, full_matrices=True)
    scale = max(float(sv[0]) if sv.size else 0.0, 1.0)
    null = u[:, np.sum(sv > tol * scale):] if sv.size else u
    mats = [np.einsum("k,kij->ij", null[:, j], basis) for j in range(null.shape[1])]
    if not mats:
        return np.zeros((0,) + basis.shape[1:], dtype=np.complex128)
    return osp._gram_schmidt_hermitian(mats)


@dataclass
class ConeSample:
    """Facial-reduction view of the level cone span /\ PSD.

    ``span_basis`` spans the linear hull of the cone (empty for a trivial
    cone); ``points`` are cone elements collected inside the reduced span,
    where the intersection has relative interior and Dykstra residuals are
    trustworthy (no tangential drift).
    """

    points: np.ndarray
    span_basis: np.ndarray
    rank: int
    rounds: int
    face: np.ndarray | None = None


_LIGHT_CFG = cvx.DykstraConfig(delta_feas=1e-9, max_cycles=1500, stall_window=150)


def _psd_annihilator(basis: np.ndarray, face: np.ndarray, seed: int) -> np.ndarray | None:
    """A verified nonzero PSD matrix supported on the face and orthogonal to
    the span, or None if sampling finds no certificate.

    Verification is strict (exact linear residual, eigenvalue floor), so a
    returned certificate is always a valid facial-reduction cut.
    """
    d = basis.shape[-1]
    v_dim = basis.shape[0]
    face_rank = int(round(float(np.real(np.trace(face)))))
    if face_rank * face_rank - v_dim <= 0:
        return None

    def project_w(x):
        y = face @ x @ face
        coords = np.real(np.einsum("kij,...ij->...k", np.conj(basis), y))
        return y - np.einsum("...k,kij->...ij", coords, basis)

    rng = np.random.default_rng(seed)
    g = rng.standard_normal((8, d, d)) + 1j * rng.standard_normal((8, d, d))
    targets = g @ mk.adjoint(g)
    targets /= np.maximum(mk.op_norm_hermitian(targets), 1e-12)[..., None, None]
    targets = np.concatenate([face[None], targets], axis=0)
    sets = [cvx.ProjectorSet(project_w), cvx.PsdCone()]
    raw = cvx.dykstra_batch(sets, targets, _LIGHT_CFG).point
    cands = np.concatenate([raw, np.sum(raw, axis=0, keepdims=True)], axis=0)
    for _ in range(60):
        cands = project_w(mk.psd_clip(cands))
    # candidates end inside W exactly; only the PSD defect needs verifying
    nrm = mk.op_norm_hermitian(cands)
    psd_resid = np.maximum(0.0, -mk.min_eig(cands))
    ok = (nrm > 1e-5) & (psd_resid <= 1e-9 * np.maximum(nrm, 1.0))
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return None
    best = idx[int(np.argmax(nrm[idx]))]
    return cands[best]


def facial_cone_sample(level: osp.Level, n_points: int = N_CONE, seed: int = 7,
                       cfg: cvx.DykstraConfig | None = None) -> ConeSample:
    """Sample the cone span /\ PSD behind a facial-reduction loop.

    Raw Frobenius projections can sit far off the cone where the span is
    tangent to the PSD boundary.  Each round therefore looks for a PSD
    annihilator Z of the current span: cone points must then live on ker Z,
    so the span is restricted to that face and the search repeats.  When no
    certificate exists the reduced problem has a relative-interior point and
    projections are clean.
    """
    d = level.dim
    basis = level.sa_basis
    face = mk.eye(d)
    rounds = 0
    for rounds in range(1, d + 2):
        if basis.shape[0] == 0:
            return ConeSample(np.zeros((0, d, d), np.complex128), basis, 0, rounds, face)
        z = _psd_annihilator(basis, face, seed + 101 * rounds)
        if z is None:
            break
        w, v = np.linalg.eigh(z)
        keep = w <= 1e-6 * max(float(w[-1]), 1e-12)
        new_face = mk.hermitian_part(v[:, keep] @ np.conj(v[:, keep]).T)
        face = mk.hermitian_part(face @ new_face @ face)
        # face is a product of commuting-kernel projections; re-orthogonalize
        wf, vf = np.linalg.eigh(face)
        face = mk.hermitian_part(vf[:, wf > 0.5] @ np.conj(vf[:, wf > 0.5]).T)
        basis = _restrict_span_to_face(basis, face, tol=1e-6)

    if basis.shape[0] == 0:
        return ConeSample(np.zeros((0, d, d), np.complex128), basis, 0, rounds, face)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n_points, d, d)) + 1j * rng.standard_normal((n_points, d, d))
    targets = face @ (g @ mk.adjoint(g)) @ face
    targets /= np.maximum(mk.op_norm_hermitian(targets), 1e-12)[..., None, None]
    pts = _project_onto_span_psd(basis, targets, cfg)
    keep = mk.frobenius(pts) > 1e-5
    return ConeSample(pts[keep], basis, basis.shape[0], rounds, face)


def sample_cone_points(level: osp.Level, n_points: int = N_CONE, seed: int = 7,
                       cfg: cvx.DykstraConfig | None = None) -> np.ndarray:
    """Cone points by Dykstra projection of random PSD targets, facially
    cleaned; near-zero projections are dropped."""
    return facial_cone_sample(level, n_points, seed, cfg).points


def validate_positive(func: Functional, generators=None, tol: float = 1e-8,
                      n_points: int = N_CONE, seed: int = 7,
                      cfg: cvx.DykstraConfig | None = None) -> PositivityCheck:
    """Positivity of the functional on the level cone.

    With declared cone generators (level 1) the check is exact against the
    generators; otherwise it is sampled on Dykstra-projected cone points and
    labeled as such.
    """
    level = func.level
    if generators is None and level.n == 1 and func.level.base.cone_generators:
        generators = func.level.base.cone_generators
    if generators is not None and level.n == 1:
        vals = [float(np.real(np.trace(func.rho @ g))) for g in generators]
        bad = [i for i, v in enumerate(vals) if v < -tol]
        if bad:
            return PositivityCheck("fail", np.asarray(generators[bad[0]]), min(vals), len(vals))
        return PositivityCheck("exact", None, min(vals) if vals else 0.0, len(vals))
    pts = sample_cone_points(level, n_points, seed, cfg)
    if pts.shape[0] == 0:
        return PositivityCheck("sampled", None, 0.0, 0)  # trivial cone: vacuous
    vals = np.real(np.einsum("bij,ji->b", pts, func.rho))
    scale = np.maximum(mk.op_norm_hermitian(pts), 1e-12)
    worst = int(np.argmin(vals / scale))
    if vals[worst] < -tol * scale[worst]:
        return PositivityCheck("fail", pts[worst], float(vals[worst]), pts.shape[0])
    return PositivityCheck("sampled", None, float(np.min(vals)), pts.shape[0])


@dataclass
class ExtensionResult:
    status: str                      # "feasible" | "infeasible" | "inconclusive"
    sigma: np.ndarray | None
    trace: float
    certificate: str | None = None
    flags: list[str] = field(default_factory=list)


def _psd_certificate(level: osp.Level, targets: np.ndarray, tol: float = 1e-9) -> str | None:
    """Look for the structured contradiction sigma_kk = 0 but sigma_kl != 0.

    The affine constraints imply sigma_kk = v whenever E_kk lies in the level
    span; combined with PSD, v = 0 kills the whole k-th row, so any implied
    nonzero off-diagonal entry in that row is a dual certificate of
    infeasibility.
    """
    dim = level.dim
    basis = level.sa_basis

    def implied(h) -> float | None:
        try:
            coords = osp.sa_coords(basis, h)
        except osp.NotInSpan:
            return None
        return float(coords @ targets)

    for k in range(dim):
        e_kk = np.zeros((dim, dim), dtype=np.complex128)
        e_kk[k, k] = 1.0
        v = implied(e_kk)
        if v is None or abs(v) > tol:
            continue
        for l in range(dim):
            if l == k:
                continue
            h_re = np.zeros((dim, dim), dtype=np.complex128)
            h_re[k, l] = 1.0
            h_re[l, k] = 1.0
            h_im = np.zeros((dim, dim), dtype=np.complex128)
            h_im[k, l] = 1j
            h_im[l, k] = -1j
            for tag, h in (("Re", h_re), ("Im", h_im)):
                w = implied(h)
                if w is not None and abs(w) > 1e-7:
                    return (f"sigma[{k},{k}]=0 forces sigma[{k},{l}]=0, but the "
                            f"constraints give {tag} sigma[{k},{l}] = {w / 2:.6g}")
    return None


def min_norm_positive_extension(func: Functional, tol: float = 1e-4,
                                cfg: cvx.DykstraConfig | None = None,
                                escalation_steps: int = 9) -> ExtensionResult:
    """Minimize Tr(sigma) over PSD sigma matching rho on the level span.

    For PSD sigma the trace equals the trace norm, so the result is the
    minimal norm of a positive extension.  Returns Infeasible when no
    positive extension exists (heuristic Dykstra gap, plus a structured
    affine dual certificate when one can be derived).
    """
    level = func.level
    dim = level.dim
    targets = pairings(func)
    match = list(level.sa_basis)
    ident = mk.eye(dim)
    flags: list[str] = []

    def feasible_at(traces: np.ndarray, starts: np.ndarray) -> cvx.FeasibilityResult:
        sets = [cvx.PsdCone(),
                cvx.AffinePairings(match + [ident], np.concatenate(
                    [np.broadcast_to(targets, (traces.shape[0], targets.shape[0])),
                     traces[:, None]], axis=1))]
        return cvx.dykstra_batch(sets, starts, cfg)

    rho_pos = mk.psd_clip(func.rho)
    # trace may be pinned by the match constraints (I in the level span)
    try:
        coords_i = osp.sa_coords(level.sa_basis, ident)
    except osp.NotInSpan:
        coords_i = None
    if coords_i is not None:
        t_pin = float(coords_i @ targets)
        if t_pin < -tol:
            return ExtensionResult("infeasible", None, math.inf,
                                   "constraints force Tr(sigma) < 0", flags)

        def feasible_pinned(start):
            # 1-D targets: the dependent identity pairing passes through the
            # consistency check since t_pin is exactly the implied value
            sets = [cvx.PsdCone(),
                    cvx.AffinePairings(match + [ident], np.append(targets, t_pin))]
            return cvx.dykstra_batch(sets, start, cfg)

        res = feasible_pinned(rho_pos[None])
        if res.status[0] == cvx.FEASIBLE:
            return ExtensionResult("feasible", res.point[0], max(t_pin, 0.0), None, flags)
        cert = _psd_certificate(level, targets)
        status = "infeasible" if res.status[0] == cvx.INFEASIBLE or cert else "inconclusive"
        flags.append("numerical-infeasibility" if cert is None else "certified-infeasibility")
        return ExtensionResult(status, None, math.inf, cert, flags)

    if mk.min_eig(func.rho) >= -1e-10:
        hi = float(np.real(np.trace(func.rho)))
        hi_point = func.rho
    else:
        t0 = max(float(mk.trace_norm(func.rho)), 1.0)
        traces = t0 * (2.0 ** np.arange(escalation_steps))
        starts = np.stack([rho_pos * (t / max(np.real(np.trace(rho_pos)), 1e-12))
                           for t in traces])
        res = feasible_at(traces, starts)
        feas = np.flatnonzero(res.status == cvx.FEASIBLE)
        if feas.size == 0:
            cert = _psd_certificate(level, targets)
            if np.any(res.status == cvx.INCONCLUSIVE) and cert is None:
                flags.append("inconclusive-treated-infeasible")
                return ExtensionResult("inconclusive", None, math.inf, None, flags)
            flags.append("numerical-infeasibility" if cert is None else "certified-infeasibility")
            return ExtensionResult("infeasible", None, math.inf, cert, flags)
        j = int(feas[0])
        hi = float(traces[j])
        hi_point = res.point[j]

    def problem(t):
        sets = [cvx.PsdCone(),
                cvx.AffinePairings(match + [ident],
                                   np.concatenate([np.broadcast_to(targets, (t.shape[0], targets.shape[0])),
                                                   np.asarray(t)[:, None]], axis=1))]
        return sets, hi_point[None]

    res = cvx.bisect_radius_batch(problem, [0.0], [hi], tol, cfg,
                                  witnesses_at=lambda t: [hi_point])
    flags.extend(f for f in res.flags() if f not in flags)
    sigma = res.point[0] if res.point is not None else hi_point
    return ExtensionResult("feasible", sigma, float(res.threshold[0]), None, flags)


@dataclass
class SeparatingResult:
    separating: bool
    witness: np.ndarray | None     # a state annihilating the level span
    witness_level: int
    per_level: list[str]
    consistent: bool               # same answer at every level checked
    flags: list[str] = field(default_factory=list)


def separating_check(space: osp.OperatorSpace, max_level: int = 3,
                     cfg: cvx.DykstraConfig | None = None) -> SeparatingResult:
    """Search each level for a state of C*(E) vanishing on M_n(E).

    Feasibility of {sigma in M_n(C*(E))_sa, sigma >= 0, Tr sigma = 1,
    sigma _|_ M_n(E)}; Feasible => NotSeparating with the state as witness.
    """
    alg = osp.generated_algebra(space)
    per_level: list[str] = []
    flags: list[str] = []
    witness = None
    witness_level = 0
    for n in range(1, max_level + 1):
        lev_e = osp.amplify(space, n)
        lev_a = osp.amplify(alg.space, n)
        ident = mk.eye(lev_a.dim)
        try:
            pair = cvx.AffinePairings(list(lev_e.sa_basis) + [ident],
                                      np.append(np.zeros(lev_e.sa_dim), 1.0))
        except cvx.InfeasibleAffine:
            # the span forces Tr = 0: exact certificate that no state vanishes
            per_level.append("infeasible")
            flags.append(f"affine-certified-level-{n}")
            continue
        sets = [cvx.Subspace(lev_a.sa_basis), cvx.PsdCone(), pair]
        start = mk.kron(mk.eye(n), alg.unit)
        start = start / max(np.real(np.trace(start)), 1.0)
        res = cvx.dykstra_batch(sets, start[None], cfg)
        code = int(res.status[0])
        per_level.append(cvx._STATUS_NAMES[code])
        if code == cvx.FEASIBLE and witness is None:
            witness = res.point[0]
            witness_level = n
        if code == cvx.INCONCLUSIVE:
            flags.append(f"inconclusive-at-level-{n}")
    found = [s == "feasible" for s in per_level]
    return SeparatingResult(
        separating=not any(found),
        witness=witness,
        witness_level=witness_level,
        per_level=per_level,
        consistent=len(set(found)) == 1,
        flags=flags,
    )


@dataclass
class ApgResult:
    apg: bool
    per_level: list[tuple[int, int, int]]   # (level, cone rank, sa_dim)
    deficient: np.ndarray | None
    consistent: bool


def check_apg(space: osp.OperatorSpace, max_level: int = 3, n_points: int = N_CONE,
              seed: int = 7, cfg: cvx.DykstraConfig | None = None) -> ApgResult:
    """Approximate positive generation: does span(E_+) fill E_sa?

    Cone points are collected by Dykstra projection of random PSD targets;
    the verdict at each level compares the rank of their coordinate span
    with the level's sa dimension.
    """
    per_level: list[tuple[int, int, int]] = []
    deficient = None
    for n in range(1, max_level + 1):
        lev = osp.amplify(space, n)
        sample = facial_cone_sample(lev, n_points, seed + n, cfg)
        rank = sample.rank
        # the reduced span is the cone's linear hull, but only directions the
        # collected points actually exhibit count as evidenced
        if sample.points.shape[0] and rank:
            coords = np.real(np.einsum("kij,bij->bk", np.conj(sample.span_basis),
                                       sample.points / mk.frobenius(sample.points)[:, None, None]))
            sv = np.linalg.svd(coords, compute_uv=False)
            rank = int(np.sum(sv > TAU_RANK_APG))
        per_level.append((n, rank, lev.sa_dim))
        if n == 1 and rank < lev.sa_dim and deficient is None:
            if rank == 0:
                deficient = osp.from_sa_coords(lev.sa_basis, np.eye(lev.sa_dim)[0])
            else:
                full_coords = np.real(np.einsum("kij,bij->bk", np.conj(lev.sa_basis),
                                                sample.points))
                _, _, vt = np.linalg.svd(full_coords, full_matrices=True)
                deficient = osp.from_sa_coords(lev.sa_basis, vt[-1])
    full = [rank == sa for (_, rank, sa) in per_level]
    return ApgResult(apg=full[0], per_level=per_level, deficient=deficient,
                     consistent=len(set(full)) == 1)


@dataclass
class DecompositionResult:
    value: float                   # +inf marks NoDecomposition
    p: np.ndarray | None
    q: np.ndarray | None
    flags: list[str] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.value)


def min_decomposition_maxnorm(level: osp.Level, x: np.ndarray, tol: float = 1e-4,
                              cfg: cvx.DykstraConfig | None = None,
                              escalation_steps: int = 9) -> DecompositionResult:
    """Least t with x = p - q, p,q in the level cone, ||p||,||q|| <= t.

    Single-variable formulation in p: {p in span} /\ {p >= 0} /\ {p >= x}
    /\ {||p|| <= t} /\ {||p - x|| <= t}.  Monotone in t; the lower bracket
    is ||x|| (p >= max(x,0) and p - x >= max(-x,0) force it).
    """
    x = mk.hermitian_part(np.asarray(x, dtype=np.complex128))
    osp.sa_coords(level.sa_basis, x)
    lo = float(mk.op_norm_hermitian(x))
    if lo < 1e-14:
        return DecompositionResult(0.0, np.zeros_like(x), np.zeros_like(x))
    pos, _ = mk.pos_neg_parts(x)

    def sets_at(t):
        return [cvx.Subspace(level.sa_basis), cvx.PsdCone(), cvx.PsdConeShifted(x),
                cvx.OpNormBall(np.zeros_like(x), t), cvx.OpNormBall(x, t)]

    ts = lo * (2.0 ** np.arange(escalation_steps))
    res = cvx.dykstra_batch(  # escalation over a shared start, batched in t
        sets_at(ts), np.broadcast_to(pos, (len(ts),) + pos.shape), cfg,
        witnesses=[pos])
    feas = np.flatnonzero(res.status == cvx.FEASIBLE)
    flags: list[str] = []
    if feas.size == 0:
        if np.any(res.status == cvx.INCONCLUSIVE):
            flags.append("inconclusive-treated-infeasible")
        flags.append("numerical-infeasibility")
        return DecompositionResult(math.inf, None, None, flags)
    j = int(feas[0])
    hi = float(ts[j])
    hi_point = res.point[j]

    def problem(t):
        return sets_at(t), hi_point[None]

    bres = cvx.bisect_radius_batch(problem, [lo], [hi], tol, cfg,
                                   witnesses_at=lambda t: [hi_point, pos])
    flags.extend(bres.flags())
    p = bres.point[0] if bres.point is not None else hi_point
    return DecompositionResult(float(bres.threshold[0]), p, p - x, flags)


@dataclass(frozen=True)
class CpMap:
    """A selfadjoint map E -> M_k given by its images on the sa basis."""

    base: osp.OperatorSpace
    k: int
    images: np.ndarray   # (sa_dim, k, k), Hermitian slices

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Complex-linear extension of the sa-basis action."""
        coords = osp.complex_coords(self.base.sa_basis, x)
        return np.einsum("m,mij->ij", coords, self.images)

    def apply_level(self, level_x: np.ndarray, n: int) -> np.ndarray:
        """The amplification M_n(E) -> M_n(M_k) applied blockwise."""
        d = self.base.dim
        blk = mk.blocks(level_x, n, d)
        out = np.zeros((n * self.k, n * self.k), dtype=np.complex128)
        for a in range(n):
            for b in range(n):
                out[a * self.k:(a + 1) * self.k, b * self.k:(b + 1) * self.k] = self.apply(blk[a, b])
        return out


def arveson_to_cp(func: Functional) -> CpMap:
    """phi_s(x)_{ij} = s(x placed in entry (i,j)); block formula on rho."""
    level = func.level
    blk = mk.blocks(func.rho, level.n, level.base.dim)
    images = np.einsum("jiab,kba->kij", blk, level.base.sa_basis)
    return CpMap(level.base, level.n, images)


def arveson_to_functional(cp: CpMap) -> Functional:
    """s_phi((x_ij)) = sum_ij <phi(x_ij) e_j, e_i>, as a Hermitian rep."""
    base = cp.base
    n = cp.k
    d = base.dim
    blk = np.einsum("mij,mab->jiab", cp.images, base.sa_basis)
    rho = np.swapaxes(blk, 1, 2).reshape(n * d, n * d)
    level = osp.amplify(base, n)
    return Functional(level, mk.hermitian_part(rho))


def cb_norm_singly_generated(x: np.ndarray, image: np.ndarray) -> float:
    """||phi||_cb = ||phi(x)|| / ||x|| on a singly generated domain."""
    return float(mk.op_norm(image)) / float(mk.op_norm(x))


def cb_norm_estimate(cp: CpMap, max_level: int | None = None, samples: int = 24,
                     seed: int = 11) -> float:
    """Lower-bound estimate of ||phi||_cb from sampled amplified actions."""
    max_level = max_level or cp.k
    best = 0.0
    for n in range(1, max_level + 1):
        lev = osp.amplify(cp.base, n)
        xs = osp.sample_sa_unit(lev, seed + n, samples)
        for x in xs:
            best = max(best, float(mk.op_norm(cp.apply_level(x, n))))
    return best


@dataclass(frozen=True)
class TwoPointExtension:
    """The constructive CP extension off a singly generated domain.

    Phi(f) = f(m) Q_m + f(M) Q_M reproduces the prescribed image at x and
    has cb-norm ||Y|| with Y = Q_m + Q_M.
    """

    m: float
    M: float
    Q_m: np.ndarray
    Q_M: np.ndarray
    Y: np.ndarray

    @property
    def cb_norm(self) -> float:
        return float(mk.op_norm_hermitian(self.Y))

    def apply_spectral(self, f_at_m: float, f_at_M: float) -> np.ndarray:
        return f_at_m * self.Q_m + f_at_M * self.Q_M


def cp_extend_singly_generated(x: np.ndarray, image: np.ndarray,
                               tol: float = 1e-12) -> TwoPointExtension:
    """Two-point spectral-measure extension for x with both parts nonzero.

    Raises :class:`SpectrumOneSided` when min(sigma(x)) >= 0 or
    max(sigma(x)) <= 0; the one-sided case has the trivial same-norm
    extension and is not handled here.
    """
    x = mk.require_hermitian(x)
    image = mk.require_hermitian(image)
    lo, hi = mk.spectral_bounds(x)
    m, big = float(lo), float(hi)
    if m >= -tol or big <= tol:
        raise SpectrumOneSided("generator spectrum does not straddle zero")
    t_pos, t_neg = mk.pos_neg_parts(image)
    y = t_pos / big + t_neg / abs(m)
    q_big = (image - m * y) / (big - m)
    q_small = (big * y - image) / (big - m)
    return TwoPointExtension(m, big, mk.hermitian_part(q_small),
                             mk.hermitian_part(q_big), mk.hermitian_part(y))
