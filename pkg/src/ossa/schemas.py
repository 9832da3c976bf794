"""Pydantic request/response models: the space-file format and the report.

Complex entries are always [re, im] pairs, never strings, so serialized
reports are bit-exact and diff-friendly.  The same models back the HTTP
service, the CLI, and the on-disk space files.
"""
from __future__ import annotations

from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import __version__
from . import opspace as osp
from . import unitisation as un
from . import verdicts as vd

Matrix = list[list[tuple[float, float]]]


def matrix_to_wire(m: np.ndarray) -> Matrix:
    m = np.asarray(m, dtype=np.complex128)
    return [[(float(z.real), float(z.imag)) for z in row] for row in m]


def matrix_from_wire(m: Matrix) -> np.ndarray:
    rows = [[complex(re, im) for re, im in row] for row in m]
    return np.array(rows, dtype=np.complex128)


class SpaceFile(BaseModel):
    """On-disk / on-wire definition of a selfadjoint operator space."""

    model_config = ConfigDict(extra="forbid")

    name: str
    ambient_dim: int = Field(ge=1)
    basis: list[Matrix] = Field(min_length=1)
    cone_generators: list[Matrix] | None = None
    metadata: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _square(self) -> "SpaceFile":
        d = self.ambient_dim
        for i, m in enumerate(self.basis):
            if len(m) != d or any(len(row) != d for row in m):
                raise ValueError(f"basis[{i}] is not {d}x{d}")
        for i, m in enumerate(self.cone_generators or []):
            if len(m) != d or any(len(row) != d for row in m):
                raise ValueError(f"cone_generators[{i}] is not {d}x{d}")
        return self

    def to_space(self) -> osp.OperatorSpace:
        gens = None
        if self.cone_generators is not None:
            gens = [matrix_from_wire(g) for g in self.cone_generators]
        return osp.build_space(self.ambient_dim,
                               [matrix_from_wire(b) for b in self.basis],
                               name=self.name, cone_generators=gens)

    @classmethod
    def from_space(cls, space: osp.OperatorSpace) -> "SpaceFile":
        return cls(
            name=space.name,
            ambient_dim=space.dim,
            basis=[matrix_to_wire(b) for b in space.spanning],
            cone_generators=([matrix_to_wire(g) for g in space.cone_generators]
                             if space.cone_generators else None),
        )


class ConfigEcho(BaseModel):
    """Runtime configuration, echoed verbatim into every report."""

    model_config = ConfigDict(extra="forbid")

    max_level: int = Field(default=3, ge=1)
    samples: int = Field(default=200, ge=1)
    seed: int = 42
    tol_dist: float = 1e-4
    tol_gap: float = 5e-4
    tol_unit_gap: float = 1e-3
    kappa_tol: float = 1e-3
    n_cone: int = 64
    epsilon_grid: list[float] = Field(default_factory=un.epsilon_grid)

    def to_check_config(self) -> vd.CheckConfig:
        return vd.CheckConfig(
            max_level=self.max_level, samples=self.samples, seed=self.seed,
            tol_dist=self.tol_dist, tol_gap=self.tol_gap,
            tol_unit_gap=self.tol_unit_gap, kappa_tol=self.kappa_tol,
            n_cone=self.n_cone,
        )


class VerdictPayload(BaseModel):
    question: str
    status: str
    theorem: str | None = None
    gap: float | None = None
    values: dict[str, float] = Field(default_factory=dict)
    witness: Matrix | None = None
    witness_coords: list[float] | None = None
    witness_scalar: Matrix | None = None
    levels_checked: list[int] = Field(default_factory=list)
    samples: int = 0
    seed: int = 0
    method: list[str] = Field(default_factory=list)
    flags: list[str] = Field(default_factory=list)


def verdict_payload(v: vd.Verdict, space: osp.OperatorSpace | None = None) -> VerdictPayload:
    witness = None
    coords = None
    if v.witness is not None:
        witness = matrix_to_wire(v.witness)
        if space is not None:
            n = v.witness.shape[0] // space.dim
            try:
                level = osp.amplify(space, n)
                coords = [float(c) for c in osp.sa_coords(level.sa_basis, v.witness)]
            except (osp.NotInSpan, ValueError):
                coords = None
    clean_values = {k: float(x) for k, x in v.values.items() if np.isfinite(x)}
    return VerdictPayload(
        question=v.question, status=v.status, theorem=v.theorem,
        gap=None if v.gap is None or not np.isfinite(v.gap) else float(v.gap),
        values=clean_values, witness=witness, witness_coords=coords,
        witness_scalar=(matrix_to_wire(v.witness_scalar)
                        if v.witness_scalar is not None else None),
        levels_checked=v.levels_checked, samples=v.samples, seed=v.seed,
        method=v.method, flags=v.flags,
    )


class Quantity(BaseModel):
    """A numeric result with the provenance of how it was computed."""

    name: str
    value: float | None = None
    text: str | None = None
    method: dict[str, Any] = Field(default_factory=dict)
    flags: list[str] = Field(default_factory=list)


class CorpusRowPayload(BaseModel):
    case: str
    quantity: str
    expected: str
    computed: str
    delta: float | None = None
    passed: bool


class Report(BaseModel):
    tool: Literal["ossa"] = "ossa"
    version: str = __version__
    created_at: str | None = None
    command: str
    space_name: str | None = None
    config: ConfigEcho
    verdicts: list[VerdictPayload] = Field(default_factory=list)
    quantities: list[Quantity] = Field(default_factory=list)
    corpus_rows: list[CorpusRowPayload] = Field(default_factory=list)
    flags: list[str] = Field(default_factory=list)
    exit_code: int = 0


class CheckRequest(BaseModel):
    space: SpaceFile
    questions: list[str] = Field(default_factory=lambda: ["all"])
    kappa: float | None = None
    config: ConfigEcho = Field(default_factory=ConfigEcho)

    @field_validator("questions")
    @classmethod
    def _known(cls, qs: list[str]) -> list[str]:
        allowed = {"all", "embedding", "apg", "separating", "kappa"}
        bad = [q for q in qs if q not in allowed]
        if bad:
            raise ValueError(f"unknown questions {bad}; allowed: {sorted(allowed)}")
        return qs

    @model_validator(mode="after")
    def _kappa_needs_value(self) -> "CheckRequest":
        if ("kappa" in self.questions) and self.kappa is None:
            raise ValueError("question 'kappa' needs the kappa field")
        return self


class DistRequest(BaseModel):
    space: SpaceFile
    coords: list[float] = Field(min_length=1)
    level: int = Field(default=1, ge=1)
    config: ConfigEcho = Field(default_factory=ConfigEcho)


class UnitiseRequest(BaseModel):
    space: SpaceFile
    coords: list[float] = Field(min_length=1)
    scalar_part: Matrix
    level: int = Field(default=1, ge=1)
    config: ConfigEcho = Field(default_factory=ConfigEcho)


class CorpusRequest(BaseModel):
    filter: str | None = None
    config: ConfigEcho = Field(default_factory=ConfigEcho)
