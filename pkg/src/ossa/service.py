"""FastAPI service wrapping the checkers; the CLI reuses these handlers.

Endpoints take the request models of :mod:`ossa.schemas` and return a
:class:`ossa.schemas.Report`.  Handlers are plain functions so they can be
called in-process (the CLI default) or behind uvicorn.
"""
from __future__ import annotations

import os
from datetime import datetime, timezone

from fastapi import FastAPI, HTTPException

from . import __version__
from . import corpus as corpus_mod
from . import gauges
from . import matkernel as mk
from . import opspace as osp
from . import unitisation as un
from . import verdicts as vd
from .schemas import (CheckRequest, CorpusRequest, CorpusRowPayload,
                      DistRequest, Quantity, Report, UnitiseRequest,
                      matrix_from_wire, matrix_to_wire, verdict_payload)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _exit_code(verdict_statuses: list[str], any_fail_rows: bool = False) -> int:
    if any(s == vd.INCONCLUSIVE for s in verdict_statuses):
        return 2
    if any_fail_rows or any(s in (vd.FAIL, vd.INFEASIBLE) for s in verdict_statuses):
        return 1
    return 0


def worker_count() -> int:
    env = os.environ.get("OSSA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _load_space(req_space) -> osp.OperatorSpace:
    try:
        return req_space.to_space()
    except (osp.NotSelfadjointSpan, osp.DimensionMismatch, osp.DegenerateSpace,
            osp.NotInSpan, ValueError) as exc:
        raise HTTPException(status_code=422, detail=f"invalid space file: {exc}")


def handle_check(req: CheckRequest) -> Report:
    space = _load_space(req.space)
    cfg = req.config.to_check_config()
    questions = set(req.questions)
    run_all = "all" in questions
    jobs: list = []
    if run_all or "embedding" in questions:
        jobs.append(lambda: vd.check_embedding(space, cfg))
    if run_all or "apg" in questions:
        jobs.append(lambda: vd.check_apg(space, cfg))
    if run_all or "separating" in questions:
        jobs.append(lambda: vd.check_separating(space, cfg))
    if (run_all and req.kappa is not None) or "kappa" in questions:
        jobs.append(lambda: vd.check_kappa(space, float(req.kappa), cfg))
    workers = min(worker_count(), len(jobs)) or 1
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(job) for job in jobs]
            verdicts = [f.result() for f in futures]   # assembly in submission order
    else:
        verdicts = [job() for job in jobs]
    flags: list[str] = []
    by_q = {v.question: v for v in verdicts}
    if {"embedding", "approx_positive_generation", "separating"} <= set(by_q):
        flags.extend(vd.audit_separating_chain(
            by_q["approx_positive_generation"], by_q["embedding"], by_q["separating"]))
    return Report(
        created_at=_now(), command="check", space_name=space.name,
        config=req.config,
        verdicts=[verdict_payload(v, space) for v in verdicts],
        flags=flags,
        exit_code=_exit_code([v.status for v in verdicts]),
    )


def handle_dist(req: DistRequest) -> Report:
    space = _load_space(req.space)
    level = osp.amplify(space, req.level)
    try:
        x = osp.element_from_spanning_coords(level, req.coords)
    except (osp.DimensionMismatch, osp.NotInSpan, mk.InvalidMatrix) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    cfg = req.config.to_check_config()
    rep = gauges.gauge_report(level, x, cfg.tol_dist)
    provenance = {"kind": "radius-bisection over span/psd/op-ball feasibility",
                  "tol": cfg.tol_dist,
                  "bracket_lo": rep.spectral_neg,
                  "bracket_hi": float(mk.op_norm_hermitian(x))}
    quantities = [
        Quantity(name="dist_to_cone", value=rep.dist_pos, method=provenance, flags=rep.flags),
        Quantity(name="nu_max", value=rep.nu_max, method=provenance, flags=rep.flags),
        Quantity(name="neg_part_norm", value=rep.spectral_neg,
                 method={"kind": "spectral"}),
        Quantity(name="pos_part_norm", value=rep.spectral_pos,
                 method={"kind": "spectral"}),
        Quantity(name="gauge_gap", value=rep.gap, method=provenance, flags=rep.flags),
        Quantity(name="element", text="realized from spanning-basis coordinates",
                 method={"spanning_coords": list(map(float, req.coords)),
                         "sa_basis_coords": [float(c) for c in osp.sa_coords(level.sa_basis, x)],
                         "matrix": matrix_to_wire(x)}),
    ]
    code = 2 if "inconclusive-treated-infeasible" in rep.flags else 0
    return Report(created_at=_now(), command="dist", space_name=space.name,
                  config=req.config, quantities=quantities, exit_code=code)


def handle_unitise(req: UnitiseRequest) -> Report:
    space = _load_space(req.space)
    level = osp.amplify(space, req.level)
    try:
        x = osp.element_from_spanning_coords(level, req.coords)
    except (osp.DimensionMismatch, osp.NotInSpan, mk.InvalidMatrix) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    a = matrix_from_wire(req.scalar_part)
    if a.shape != (req.level, req.level):
        raise HTTPException(status_code=422,
                            detail=f"scalar part must be {req.level}x{req.level}")
    if not mk.is_hermitian(a, 1e-8):
        raise HTTPException(status_code=422, detail="scalar part must be Hermitian")
    cfg = req.config.to_check_config()
    dcfg = cfg.dykstra()
    membership = un.werner_cone_member(level, x, a, cfg=dcfg, with_distances=True)
    abstract = un.unitised_norm(level, x, a, cfg=dcfg)
    russell = un.russell_norm(level, x, a, cfg=dcfg)
    algebra = osp.generated_algebra(space)
    concrete = un.concrete_unitised_norm(space, level, x, a, algebra)
    trace = [{"epsilon": e, "member": ok, "distance": dv}
             for (e, ok, dv) in membership.checks]
    quantities = [
        Quantity(name="werner_membership", text="positive" if membership.positive else "not-positive",
                 method={"grid": trace, "scalar_min_eig": membership.scalar_min_eig},
                 flags=membership.flags),
        Quantity(name="unitised_norm", value=abstract,
                 method={"kind": "order-unit bisection on werner membership"}),
        Quantity(name="russell_norm", value=russell,
                 method={"kind": "hat-gauge doubling at level 2n"}),
        Quantity(name="concrete_unitised_norm", value=concrete,
                 method={"unit_is_ambient_identity": algebra.unit_is_identity}),
        Quantity(name="abstract_minus_concrete", value=abstract - concrete),
        Quantity(name="werner_minus_russell", value=abstract - russell),
    ]
    return Report(created_at=_now(), command="unitise", space_name=space.name,
                  config=req.config, quantities=quantities, exit_code=0)


def handle_corpus(req: CorpusRequest) -> Report:
    cfg = req.config.to_check_config()
    rows = corpus_mod.run_corpus(req.filter, cfg, max_workers=worker_count())
    payload = [CorpusRowPayload(case=r.case, quantity=r.quantity, expected=r.expected,
                                computed=r.computed, delta=r.delta, passed=r.passed)
               for r in rows]
    code = 0 if all(r.passed for r in rows) else 1
    return Report(created_at=_now(), command="corpus", config=req.config,
                  corpus_rows=payload, exit_code=code)


app = FastAPI(title="ossa", version=__version__,
              description="Numeric verdicts for selfadjoint operator spaces")


@app.get("/healthz")
def healthz() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/schema/report")
def report_schema() -> dict:
    return Report.model_json_schema()


@app.post("/check", response_model=Report)
def check_endpoint(req: CheckRequest) -> Report:
    return handle_check(req)


@app.post("/dist", response_model=Report)
def dist_endpoint(req: DistRequest) -> Report:
    return handle_dist(req)


@app.post("/unitise", response_model=Report)
def unitise_endpoint(req: UnitiseRequest) -> Report:
    return handle_unitise(req)


@app.post("/corpus", response_model=Report)
def corpus_endpoint(req: CorpusRequest) -> Report:
    return handle_corpus(req)
