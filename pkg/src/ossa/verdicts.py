"""High-level checkers combining structural fast paths with numerical search.

Certified passes come from structure (product-closed span, ambient unit in
the span, one-sided or norm-balanced single generator); everything else is
search-based and can only refute, never certify, so a clean search reports
pass_no_gap_found rather than a pass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import convexproj as cvx
from . import functionals as fns
from . import gauges
from . import matkernel as mk
from . import opspace as osp
from . import unitisation as un

PASS_CERTIFIED = "pass_certified"
PASS_NO_GAP = "pass_no_gap_found"
FAIL = "fail"
INFEASIBLE = "infeasible"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class CheckConfig:
    max_level: int = 3
    samples: int = 200
    seed: int = 42
    tol_dist: float = 1e-4
    tol_gap: float = 5e-4
    tol_unit_gap: float = 1e-3
    kappa_tol: float = 1e-3
    n_cone: int = 64

    def dykstra(self) -> cvx.DykstraConfig:
        # search workloads run thousands of feasibility subproblems; cap the
        # per-problem cycle budget well below the standalone default
        return cvx.DykstraConfig(max_cycles=2500)


@dataclass
class Verdict:
    question: str
    status: str
    theorem: str | None = None
    witness: np.ndarray | None = None
    witness_scalar: np.ndarray | None = None
    gap: float | None = None
    values: dict = field(default_factory=dict)
    levels_checked: list[int] = field(default_factory=list)
    samples: int = 0
    seed: int = 0
    method: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status in (PASS_CERTIFIED, PASS_NO_GAP)


def _singly_generated_embedding(space: osp.OperatorSpace, cls: osp.SpaceClass,
                                cfg: CheckConfig) -> Verdict:
    gen = space.sa_basis[0]
    gen = gen / mk.op_norm_hermitian(gen)
    p = float(gauges.spectral_pos(gen))
    m = float(gauges.spectral_neg(gen))
    values = {"pos_part_norm": p, "neg_part_norm": m}
    if p <= cfg.tol_gap or m <= cfg.tol_gap:
        return Verdict("embedding", PASS_CERTIFIED, theorem="one-sided-generator",
                       values=values, method=["classify:singly_generated_sa"])
    if abs(p - m) <= cfg.tol_gap:
        return Verdict("embedding", PASS_CERTIFIED, theorem="balanced-generator",
                       values=values, method=["classify:singly_generated_sa"])
    witness = gen if p > m else -gen
    gap = abs(p - m)
    values["witness_level"] = 1.0
    return Verdict("embedding", FAIL, witness=witness, gap=gap, values=values,
                   method=["classify:singly_generated_sa",
                           "exact criterion |pos - neg| on the generator"])


def check_embedding(space: osp.OperatorSpace, cfg: CheckConfig | None = None) -> Verdict:
    """Is the inclusion E in C*(E) an embedding (unitisation isometric)?"""
    cfg = cfg or CheckConfig()
    cls = osp.classify(space)
    if cls.tag == "csubalgebra":
        return Verdict("embedding", PASS_CERTIFIED, theorem="subalgebra-inclusion",
                       method=["classify:csubalgebra"])
    if cls.tag == "unital_system":
        return Verdict("embedding", PASS_CERTIFIED, theorem="unital-system",
                       method=["classify:unital_system"])
    if cls.tag == "singly_generated_sa":
        return _singly_generated_embedding(space, cls, cfg)

    dcfg = cfg.dykstra()
    algebra = osp.generated_algebra(space)
    method = ["classify:generic"]
    flags: list[str] = []
    best_gauge = (-math.inf, None, False, 0)       # (gap, witness, certified, level)
    best_unit = (-math.inf, None, None, False, 0)  # (gap, x, a, certified, level)
    levels = list(range(1, cfg.max_level + 1))
    for n in levels:
        lev = osp.amplify(space, n)
        g = gauges.gauge_gap_search(lev, cfg.samples, cfg.seed, cfg.tol_gap,
                                    cfg.tol_dist, dcfg)
        method.append(f"gauge-search level {n}: max_gap={g.max_gap:.3e}"
                      + ("" if g.certified else " (bound)"))
        flags.extend(f for f in g.flags if f not in flags)
        if g.max_gap > best_gauge[0]:
            best_gauge = (g.max_gap, g.witness, g.certified, n)
        u = un.unitisation_gap_search(space, lev, cfg.samples, cfg.seed,
                                      cfg.tol_unit_gap, gauges.TOL_DIST, dcfg, algebra)
        method.append(f"unitisation-search level {n}: max_gap={u.max_gap:.3e}"
                      + ("" if u.certified else " (bound)"))
        flags.extend(f for f in u.flags if f not in flags)
        if u.max_gap > best_unit[0]:
            best_unit = (u.max_gap, u.witness_x, u.witness_a, u.certified, n)
        gauge_fail = best_gauge[2] and best_gauge[0] > cfg.tol_gap
        unit_fail = best_unit[3] and best_unit[0] > cfg.tol_unit_gap
        if gauge_fail or unit_fail:
            break
    values = {"gauge_gap": best_gauge[0], "unitisation_gap": best_unit[0]}
    gauge_fail = best_gauge[2] and best_gauge[0] > cfg.tol_gap
    unit_fail = best_unit[3] and best_unit[0] > cfg.tol_unit_gap
    if gauge_fail or unit_fail:
        if best_gauge[0] >= best_unit[0]:
            witness, wscalar, gap, wlev = best_gauge[1], None, best_gauge[0], best_gauge[3]
        else:
            witness, wscalar, gap, wlev = best_unit[1], best_unit[2], best_unit[0], best_unit[4]
        values["witness_level"] = float(wlev)
        return Verdict("embedding", FAIL, witness=witness, witness_scalar=wscalar,
                       gap=gap, values=values, levels_checked=levels,
                       samples=cfg.samples, seed=cfg.seed, method=method, flags=flags)
    return Verdict("embedding", PASS_NO_GAP, values=values, levels_checked=levels,
                   samples=cfg.samples, seed=cfg.seed, method=method, flags=flags)


def check_kappa(space: osp.OperatorSpace, kappa: float,
                cfg: CheckConfig | None = None) -> Verdict:
    """Is every selfadjoint contraction a difference of cone elements of
    norm <= kappa, at levels 1..N?  Sampling can only refute."""
    cfg = cfg or CheckConfig()
    dcfg = cfg.dykstra()
    method: list[str] = []
    flags: list[str] = []
    worst = 0.0
    levels = list(range(1, cfg.max_level + 1))
    for n in levels:
        lev = osp.amplify(space, n)
        probes = gauges.deterministic_probes(lev)
        xs = np.concatenate([probes, osp.sample_sa_unit(lev, cfg.seed, cfg.samples)])
        # cheap certified upper bounds: generator coefficient splits (level 1)
        # and positive parts that stay in the span
        upper = np.full(xs.shape[0], np.inf)
        pos, neg = mk.pos_neg_parts(xs)
        for cand in (pos,):
            coords = np.real(np.einsum("kij,bij->bk", np.conj(lev.sa_basis), cand))
            recon = np.einsum("bk,kij->bij", coords, lev.sa_basis)
            ok = mk.frobenius(cand - recon) <= osp.TAU_MEM * np.maximum(1.0, mk.frobenius(cand))
            bound = np.maximum(mk.op_norm_hermitian(pos), mk.op_norm_hermitian(neg))
            upper = np.where(ok, np.minimum(upper, bound), upper)
        if n == 1 and space.cone_generators:
            gens = np.stack(space.cone_generators)
            gcoords = np.stack([osp.sa_coords(space.sa_basis, g) for g in gens])
            try:
                split = np.linalg.lstsq(gcoords.T, np.real(np.einsum(
                    "kij,bij->bk", np.conj(lev.sa_basis), xs)).T, rcond=None)[0].T
                p_mats = np.einsum("bg,gij->bij", np.clip(split, 0.0, None), gens)
                q_mats = np.einsum("bg,gij->bij", np.clip(-split, 0.0, None), gens)
                resid = mk.frobenius(xs - (p_mats - q_mats))
                ok = resid <= 1e-8 * np.maximum(1.0, mk.frobenius(xs))
                bound = np.maximum(mk.op_norm_hermitian(p_mats), mk.op_norm_hermitian(q_mats))
                upper = np.where(ok, np.minimum(upper, bound), upper)
            except np.linalg.LinAlgError:
                pass
        worst = max(worst, float(np.max(np.where(np.isfinite(upper), upper, 0.0), initial=0.0)))
        order = np.argsort(-np.where(np.isfinite(upper), upper, np.inf), kind="stable")
        need = [int(i) for i in order if not np.isfinite(upper[i]) or upper[i] > kappa + cfg.kappa_tol]
        method.append(f"level {n}: {len(need)} of {xs.shape[0]} samples refined")
        for i in need:
            dec = fns.min_decomposition_maxnorm(lev, xs[i], cfg.kappa_tol, dcfg)
            flags.extend(f for f in dec.flags if f not in flags)
            if not dec.feasible or dec.value > kappa + cfg.kappa_tol:
                if kappa <= 1.0 + cfg.kappa_tol:
                    # 1-generation implies the embedding property, not conversely;
                    # a kappa = 1 failure must not be read as an embedding refutation
                    flags.append("no-embedding-inference")
                if not dec.feasible:
                    return Verdict("kappa_generation", FAIL, witness=xs[i], gap=math.inf,
                                   values={"kappa": kappa, "worst_value": math.inf,
                                           "no_decomposition": 1.0},
                                   levels_checked=levels[:n], samples=cfg.samples,
                                   seed=cfg.seed, method=method, flags=flags)
                return Verdict("kappa_generation", FAIL, witness=xs[i],
                               gap=dec.value - kappa,
                               values={"kappa": kappa, "worst_value": dec.value},
                               levels_checked=levels[:n], samples=cfg.samples,
                               seed=cfg.seed, method=method, flags=flags)
            worst = max(worst, dec.value)
    return Verdict("kappa_generation", PASS_NO_GAP,
                   values={"kappa": kappa, "worst_value": worst},
                   levels_checked=levels, samples=cfg.samples, seed=cfg.seed,
                   method=method, flags=flags)


def check_separating(space: osp.OperatorSpace, cfg: CheckConfig | None = None) -> Verdict:
    cfg = cfg or CheckConfig()
    res = fns.separating_check(space, cfg.max_level, cfg.dykstra())
    flags = list(res.flags)
    if not res.consistent:
        flags.append("level-inconsistent")
    if res.separating:
        return Verdict("separating", PASS_NO_GAP,
                       values={"levels_consistent": float(res.consistent)},
                       levels_checked=list(range(1, cfg.max_level + 1)),
                       seed=cfg.seed, method=list(res.per_level), flags=flags)
    return Verdict("separating", FAIL, witness=res.witness,
                   values={"witness_level": float(res.witness_level),
                           "levels_consistent": float(res.consistent)},
                   levels_checked=list(range(1, cfg.max_level + 1)),
                   seed=cfg.seed, method=list(res.per_level), flags=flags)


def check_apg(space: osp.OperatorSpace, cfg: CheckConfig | None = None) -> Verdict:
    cfg = cfg or CheckConfig()
    res = fns.check_apg(space, cfg.max_level, cfg.n_cone, cfg.seed, cfg.dykstra())
    method = [f"level {n}: cone rank {r} of {s}" for (n, r, s) in res.per_level]
    flags = [] if res.consistent else ["level-inconsistent"]
    if res.apg:
        return Verdict("approx_positive_generation", PASS_NO_GAP,
                       values={"levels_consistent": float(res.consistent)},
                       levels_checked=[n for n, _, _ in res.per_level],
                       seed=cfg.seed, method=method, flags=flags)
    return Verdict("approx_positive_generation", FAIL, witness=res.deficient,
                   values={"levels_consistent": float(res.consistent)},
                   levels_checked=[n for n, _, _ in res.per_level],
                   seed=cfg.seed, method=method, flags=flags)


def audit_separating_chain(apg: Verdict, embedding: Verdict,
                           separating: Verdict) -> list[str]:
    """Self-test of the positive-generation/separation implication chain:
    apg Pass and embedding Pass must force separating Pass."""
    if apg.passed and embedding.passed and not separating.passed:
        return ["inconsistent-theorems"]
    return []
