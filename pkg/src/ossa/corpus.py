"""Built-in worked-example corpus with expected values and tolerances.

Each case constructs its space, runs the relevant checkers, and emits rows
(case, quantity, expected, computed, delta, pass).  Expected values are the
curated constants for these spaces; tolerances are per quantity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import functionals as fns
from . import gauges
from . import matkernel as mk
from . import opspace as osp
from . import verdicts as vd

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass
class CorpusRow:
    case: str
    quantity: str
    expected: str
    computed: str
    delta: float | None
    passed: bool


def _value_row(case, quantity, expected, computed, tol) -> CorpusRow:
    delta = abs(computed - expected)
    return CorpusRow(case, quantity, f"{expected:.9g}", f"{computed:.9g}", delta, delta <= tol)


def _status_row(case, quantity, expected, computed) -> CorpusRow:
    return CorpusRow(case, quantity, expected, computed, None, expected == computed)


def intro_space(r: float) -> osp.OperatorSpace:
    x = np.diag([1.0, -r]).astype(np.complex128)
    return osp.build_space(2, [x], f"intro-r-{r:g}")


def nonemb_space() -> osp.OperatorSpace:
    a = np.array([[1.0, 1.0], [1.0, 1.0]], dtype=np.complex128)
    b = np.diag([0.0, 1.0]).astype(np.complex128)
    return osp.build_space(2, [a, b], "nonemb", cone_generators=[a, b])


def nonemb_functional(space: osp.OperatorSpace) -> fns.Functional:
    level = osp.amplify(space, 1)
    rho = (1.0 / math.sqrt(2.0)) * np.array([[1.0, -1.0], [-1.0, 1.0]], dtype=np.complex128)
    return fns.Functional(level, rho)


def nopositive_ext2_space() -> osp.OperatorSpace:
    e11 = np.zeros((2, 2), dtype=np.complex128)
    e11[0, 0] = 1.0
    e12 = np.zeros((2, 2), dtype=np.complex128)
    e12[0, 1] = 1.0
    return osp.build_space(2, [e11, e12, e12.conj().T], "nopositive-ext2",
                           cone_generators=[e11])


def nopositive_ext2_functional(space: osp.OperatorSpace) -> fns.Functional:
    level = osp.amplify(space, 1)
    rho = np.array([[0.0, -1.0], [-1.0, 0.0]], dtype=np.complex128)
    return fns.Functional(level, rho)


def m2_space() -> osp.OperatorSpace:
    units = []
    for j in range(2):
        for k in range(2):
            e = np.zeros((2, 2), dtype=np.complex128)
            e[j, k] = 1.0
            units.append(e)
    return osp.build_space(2, units, "m2-full")


def truncated_diag_space(balanced: bool, terms: int = 8) -> osp.OperatorSpace:
    """Finite 2K x 2K truncations of the alternating diagonal generators.

    The positive part has entries 1/(n+1) on even slots; the negative part
    1/(n+1) (balanced) or 1/(n+2) (unbalanced) on odd slots.  Truncation
    preserves both part norms, which are attained at the first coordinates.
    """
    entries = []
    for n in range(terms):
        entries.append(1.0 / (n + 1))
        entries.append(-(1.0 / (n + 1) if balanced else 1.0 / (n + 2)))
    x = np.diag(entries).astype(np.complex128)
    name = "tables-iv" if balanced else "tables-viii"
    return osp.build_space(2 * terms, [x], name)


def _run_intro(cfg: vd.CheckConfig) -> list[CorpusRow]:
    rows: list[CorpusRow] = []
    for r in (0.25, 0.5, 0.75, 1.0):
        space = intro_space(r)
        case = space.name
        emb = vd.check_embedding(space, cfg)
        expected = "pass" if r == 1.0 else "fail"
        rows.append(_status_row(case, "embedding", expected,
                                "pass" if emb.passed else "fail"))
        if r < 1.0:
            rows.append(_value_row(case, "embedding_gap", 1.0 - r, emb.gap or 0.0, 5e-4))
        x = np.diag([1.0, -r]).astype(np.complex128)
        level = osp.amplify(space, 1)
        rows.append(_value_row(case, "dist_to_cone(x_r)", 1.0,
                               gauges.dist_to_cone(level, x, cfg.tol_dist), 1e-3))
        apg = vd.check_apg(space, cfg)
        rows.append(_status_row(case, "approx_positive_generation", "fail",
                                "pass" if apg.passed else "fail"))
        sep = vd.check_separating(space, cfg)
        rows.append(_status_row(case, "separating", "fail",
                                "pass" if sep.passed else "fail"))
    return rows


def _run_nonemb(cfg: vd.CheckConfig) -> list[CorpusRow]:
    rows: list[CorpusRow] = []
    space = nonemb_space()
    case = space.name
    a, b = space.spanning[0], space.spanning[1]
    x = a - b
    rows.append(_value_row(case, "norm(A-B)", GOLDEN, float(mk.op_norm(x)), 1e-9))
    level = osp.amplify(space, 1)
    dec = fns.min_decomposition_maxnorm(level, x, cfg.kappa_tol, cfg.dykstra())
    rows.append(_value_row(case, "min_decomposition_maxnorm(A-B)", 2.0, dec.value, 1e-3))
    phi = nonemb_functional(space)
    rows.append(_value_row(case, "restricted_norm(phi)", 1.0,
                           fns.restricted_norm(phi), 1e-3))
    ext = fns.min_norm_positive_extension(phi, cfg.tol_dist, cfg.dykstra())
    rows.append(_status_row(case, "positive_extension", "feasible", ext.status))
    rows.append(_value_row(case, "positive_extension_trace", math.sqrt(2.0), ext.trace, 1e-3))
    target = (1.0 / math.sqrt(2.0)) * np.array([[1.0, -1.0], [-1.0, 1.0]])
    ext_err = float(np.max(np.abs(ext.sigma - target))) if ext.sigma is not None else math.inf
    rows.append(_value_row(case, "positive_extension_matrix_error", 0.0, ext_err, 1e-3))
    apg = vd.check_apg(space, cfg)
    rows.append(_status_row(case, "approx_positive_generation", "pass",
                            "pass" if apg.passed else "fail"))
    kap = vd.check_kappa(space, 1.0, cfg)
    rows.append(_status_row(case, "kappa_1_generation", "fail",
                            "pass" if kap.passed else "fail"))
    emb = vd.check_embedding(space, cfg)
    rows.append(_status_row(case, "embedding", "fail", "pass" if emb.passed else "fail"))
    sep = vd.check_separating(space, cfg)
    rows.append(_status_row(case, "separating", "pass",
                            "pass" if sep.passed else "fail"))
    return rows


def _run_nopositive_ext2(cfg: vd.CheckConfig) -> list[CorpusRow]:
    rows: list[CorpusRow] = []
    space = nopositive_ext2_space()
    case = space.name
    sep = vd.check_separating(space, cfg)
    rows.append(_status_row(case, "separating", "fail",
                            "pass" if sep.passed else "fail"))
    e22 = np.diag([0.0, 1.0]).astype(np.complex128)
    wit_err = (float(np.max(np.abs(sep.witness - e22)))
               if sep.witness is not None else math.inf)
    rows.append(_value_row(case, "separating_witness_error", 0.0, wit_err, 1e-6))
    phi = nopositive_ext2_functional(space)
    ext = fns.min_norm_positive_extension(phi, cfg.tol_dist, cfg.dykstra())
    rows.append(_status_row(case, "positive_extension", "infeasible", ext.status))
    rows.append(_status_row(case, "extension_dual_certificate", "found",
                            "found" if ext.certificate else "missing"))
    apg = vd.check_apg(space, cfg)
    rows.append(_status_row(case, "approx_positive_generation", "fail",
                            "pass" if apg.passed else "fail"))
    emb = vd.check_embedding(space, cfg)
    rows.append(_status_row(case, "embedding", "fail", "pass" if emb.passed else "fail"))
    return rows


def _run_m2(cfg: vd.CheckConfig) -> list[CorpusRow]:
    rows: list[CorpusRow] = []
    space = m2_space()
    case = space.name
    emb = vd.check_embedding(space, cfg)
    rows.append(_status_row(case, "embedding", "pass", "pass" if emb.passed else "fail"))
    rows.append(_status_row(case, "embedding_certificate", "subalgebra-inclusion",
                            emb.theorem or "none"))
    sep = vd.check_separating(space, cfg)
    rows.append(_status_row(case, "separating", "pass",
                            "pass" if sep.passed else "fail"))
    apg = vd.check_apg(space, cfg)
    rows.append(_status_row(case, "approx_positive_generation", "pass",
                            "pass" if apg.passed else "fail"))
    kap = vd.check_kappa(space, 1.0, cfg)
    rows.append(_status_row(case, "kappa_1_generation", "pass",
                            "pass" if kap.passed else "fail"))
    return rows


def _run_tables(cfg: vd.CheckConfig) -> list[CorpusRow]:
    rows: list[CorpusRow] = []
    for balanced in (True, False):
        space = truncated_diag_space(balanced)
        case = space.name
        gen = space.sa_basis[0] / mk.op_norm_hermitian(space.sa_basis[0])
        rows.append(_value_row(case, "pos_part_norm", 1.0,
                               float(gauges.spectral_pos(gen)), 1e-9))
        rows.append(_value_row(case, "neg_part_norm", 1.0 if balanced else 0.5,
                               float(gauges.spectral_neg(gen)), 1e-9))
        emb = vd.check_embedding(space, cfg)
        rows.append(_status_row(case, "embedding", "pass" if balanced else "fail",
                                "pass" if emb.passed else "fail"))
        if not balanced:
            rows.append(_value_row(case, "embedding_gap", 0.5, emb.gap or 0.0, 5e-4))
        apg = vd.check_apg(space, cfg)
        rows.append(_status_row(case, "approx_positive_generation", "fail",
                                "pass" if apg.passed else "fail"))
        sep = vd.check_separating(space, cfg)
        rows.append(_status_row(case, "separating", "fail",
                                "pass" if sep.passed else "fail"))
    # table row (v) is the positively-generated non-embedding space; its full
    # value set already runs as the nonemb case, so only the verdict repeats
    space = nonemb_space()
    emb = vd.check_embedding(space, cfg)
    rows.append(_status_row("tables-v", "embedding", "fail",
                            "pass" if emb.passed else "fail"))
    space = intro_space(0.5)
    emb = vd.check_embedding(space, cfg)
    rows.append(_status_row("tables-vi", "embedding", "fail",
                            "pass" if emb.passed else "fail"))
    return rows


CASES = {
    "intro": _run_intro,
    "nonemb": _run_nonemb,
    "nopositive-ext2": _run_nopositive_ext2,
    "m2-full": _run_m2,
    "tables": _run_tables,
}


def run_corpus(name_filter: str | None = None,
               cfg: vd.CheckConfig | None = None,
               max_workers: int | None = None) -> list[CorpusRow]:
    """Run every corpus case (optionally filtered by substring)."""
    cfg = cfg or vd.CheckConfig()
    names = [n for n in CASES if name_filter is None or name_filter in n]
    if max_workers is None or max_workers <= 1 or len(names) <= 1:
        rows: list[CorpusRow] = []
        for n in names:
            rows.extend(CASES[n](cfg))
        return rows
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(CASES[n], cfg) for n in names]
        rows = []
        for fut in futures:   # assembly stays in submission order
            rows.extend(fut.result())
        return rows
