"""Concrete selfadjoint operator spaces E inside M_d(C) and their matrix levels.

A space is stored through an orthonormal (real trace pairing) basis of its
selfadjoint part; all cone geometry downstream happens in that real
coordinate system.  Matrix levels M_n(E) are realized inside M_{nd} with the
level factor first in every Kronecker product.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matkernel as mk

#: membership residual tolerance (relative to max(1, ||M||_F))
TAU_MEM = 1e-9
#: basis-drop tolerance in Gram-Schmidt / rank decisions
TAU_RANK = 1e-9


class NotSelfadjointSpan(ValueError):
    """The complex span of the given matrices is not closed under adjoints."""


class DimensionMismatch(ValueError):
    pass


class NotInSpan(ValueError):
    """Element fails the least-squares membership test against the basis."""


class DegenerateSpace(ValueError):
    pass


def _gram_schmidt_complex(mats: list[np.ndarray], tol: float = TAU_RANK) -> np.ndarray:
    """Orthonormalize matrices over C under the trace pairing Tr(A*B)."""
    basis: list[np.ndarray] = []
    for m in mats:
        v = m.astype(np.complex128, copy=True)
        scale = max(mk.frobenius(v), 1.0)
        for b in basis:
            v = v - np.sum(np.conj(b) * v) * b
        nrm = mk.frobenius(v)
        if nrm > tol * scale:
            basis.append(v / nrm)
    if not basis:
        return np.zeros((0, mats[0].shape[0], mats[0].shape[0]), dtype=np.complex128)
    return np.stack(basis)


def _gram_schmidt_hermitian(mats: list[np.ndarray], tol: float = TAU_RANK) -> np.ndarray:
    """Orthonormalize Hermitian matrices over R under Re Tr(A*B).

    Vectors with post-projection norm <= tol (relative to their original
    norm, floored at tol absolutely) are dropped.
    """
    basis: list[np.ndarray] = []
    for m in mats:
        v = mk.hermitian_part(m)
        scale = max(mk.frobenius(v), 1.0)
        for b in basis:
            v = v - mk.re_inner(b, v) * b
        nrm = mk.frobenius(v)
        if nrm > tol * scale:
            basis.append(v / nrm)
    if not basis:
        return np.zeros((0, mats[0].shape[0], mats[0].shape[0]), dtype=np.complex128)
    return np.stack(basis)


@dataclass(frozen=True)
class OperatorSpace:
    """A selfadjoint subspace E = span{B_1, ..., B_k} of M_d(C).

    ``sa_basis`` is an orthonormal real basis of E_sa; since E is closed
    under adjoints, E = E_sa + i E_sa and the complex dimension of E equals
    ``sa_dim``.
    """

    name: str
    dim: int
    spanning: tuple[np.ndarray, ...]
    sa_basis: np.ndarray  # (sa_dim, d, d)
    cone_generators: tuple[np.ndarray, ...] = field(default=())

    @property
    def sa_dim(self) -> int:
        return self.sa_basis.shape[0]

    @property
    def complex_dim(self) -> int:
        return self.sa_dim


@dataclass(frozen=True)
class Level:
    """The matrix level M_n(E), realized inside M_{n*d}(C)."""

    base: OperatorSpace
    n: int
    sa_basis: np.ndarray  # (n^2 * sa_dim, n*d, n*d)

    @property
    def dim(self) -> int:
        return self.n * self.base.dim

    @property
    def sa_dim(self) -> int:
        return self.sa_basis.shape[0]


@dataclass(frozen=True)
class SpaceClass:
    """Structural fast-path tag; tags are exclusive in priority order
    csubalgebra > unital_system > singly_generated_sa > generic."""

    tag: str
    evidence: object = None


def build_space(
    d: int,
    spanning,
    name: str = "space",
    cone_generators=None,
) -> OperatorSpace:
    """Validate a spanning set and derive the orthonormal sa basis.

    Raises :class:`DimensionMismatch` for wrongly sized matrices and
    :class:`NotSelfadjointSpan` when some adjoint B* leaves the complex span.
    """
    mats = [mk.as_square(b) for b in spanning]
    if not mats:
        raise DegenerateSpace("empty spanning set")
    for b in mats:
        if b.shape != (d, d):
            raise DimensionMismatch(f"spanning matrix of shape {b.shape}, ambient is {d}x{d}")
    cbasis = _gram_schmidt_complex(mats)
    if cbasis.shape[0] == 0:
        raise DegenerateSpace("spanning set spans only the zero space")
    # selfadjoint-closure of the *complex* span: each adjoint must be reachable
    for b in mats:
        adj = mk.adjoint(b)
        resid = adj - np.einsum("k,kij->ij", np.einsum("kij,ij->k", np.conj(cbasis), adj), cbasis)
        if mk.frobenius(resid) > TAU_MEM * max(1.0, mk.frobenius(adj)):
            raise NotSelfadjointSpan(
                f"{name}: adjoint of a spanning matrix is outside the complex span"
            )
    herm_parts: list[np.ndarray] = []
    for b in mats:
        herm_parts.append(mk.hermitian_part(b))
        herm_parts.append(mk.antihermitian_part(b))
    sa_basis = _gram_schmidt_hermitian(herm_parts)
    space = OperatorSpace(name, d, tuple(mats), sa_basis)
    gens: list[np.ndarray] = []
    if cone_generators is not None:
        for g in cone_generators:
            g = mk.require_hermitian(g)
            if g.shape != (d, d):
                raise DimensionMismatch("cone generator has wrong ambient dimension")
            sa_coords(space.sa_basis, g)
            if mk.min_eig(g) < -1e-8 * max(1.0, mk.op_norm_hermitian(g)):
                raise ValueError(f"{name}: declared cone generator is not PSD")
            gens.append(g)
    return OperatorSpace(name, d, tuple(mats), sa_basis, tuple(gens))


def sa_coords(sa_basis: np.ndarray, m: np.ndarray, tol: float = TAU_MEM) -> np.ndarray:
    """Real coordinates of a Hermitian M against an orthonormal sa basis.

    Raises :class:`NotInSpan` when the residual exceeds
    ``tol * max(1, ||M||_F)``.
    """
    h = mk.hermitian_part(m)
    coords = np.real(np.einsum("kij,...ij->...k", np.conj(sa_basis), h))
    recon = np.einsum("...k,kij->...ij", coords, sa_basis)
    resid = mk.frobenius(h - recon)
    bound = tol * np.maximum(1.0, mk.frobenius(h))
    if np.any(resid > bound):
        raise NotInSpan(f"membership residual {np.max(resid):.3e} exceeds tolerance")
    return coords


def complex_coords(sa_basis: np.ndarray, m: np.ndarray, tol: float = TAU_MEM) -> np.ndarray:
    """Complex coordinates of a general M in E = E_sa + i E_sa."""
    h = mk.hermitian_part(m)
    a = mk.antihermitian_part(m)
    return sa_coords(sa_basis, h, tol) + 1j * sa_coords(sa_basis, a, tol)


def in_span(sa_basis: np.ndarray, m: np.ndarray, tol: float = TAU_MEM) -> bool:
    try:
        complex_coords(sa_basis, m, tol)
    except NotInSpan:
        return False
    return True


def from_sa_coords(sa_basis: np.ndarray, coords) -> np.ndarray:
    coords = np.asarray(coords)
    return np.einsum("...k,kij->...ij", coords, sa_basis)


def _hermitian_unit_basis(n: int) -> np.ndarray:
    """Orthonormal Hermitian basis of M_n(C)_sa (n^2 matrices)."""
    out = []
    for j in range(n):
        e = np.zeros((n, n), dtype=np.complex128)
        e[j, j] = 1.0
        out.append(e)
    r = 1.0 / np.sqrt(2.0)
    for j in range(n):
        for k in range(j + 1, n):
            e = np.zeros((n, n), dtype=np.complex128)
            e[j, k] = r
            e[k, j] = r
            out.append(e)
            e = np.zeros((n, n), dtype=np.complex128)
            e[j, k] = 1j * r
            e[k, j] = -1j * r
            out.append(e)
    return np.stack(out)


def amplify(space: OperatorSpace, n: int) -> Level:
    """The level M_n(E); ``amplify(space, 1)`` reproduces the base basis."""
    if n < 1:
        raise ValueError("level must be >= 1")
    if n == 1:
        return Level(space, 1, space.sa_basis)
    scalar = _hermitian_unit_basis(n)
    # kron of orthonormal families is orthonormal for the trace pairing
    basis = np.einsum("sab,kij->skaibj", scalar, space.sa_basis)
    k = scalar.shape[0] * space.sa_dim
    nd = n * space.dim
    return Level(space, n, basis.reshape(k, nd, nd))


def level_element(level: Level, coeff: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Realize coeff (x) x, coeff in M_n scalar factor, x ambient."""
    return mk.kron(coeff, x)


def classify(space: OperatorSpace, tol: float = TAU_MEM) -> SpaceClass:
    """Fast-path classification used by the embedding dispatch."""
    basis = space.sa_basis
    product_closed = True
    for a in basis:
        for b in basis:
            if not in_span(basis, a @ b, tol):
                product_closed = False
                break
        if not product_closed:
            break
    if product_closed:
        return SpaceClass("csubalgebra")
    ident = mk.eye(space.dim)
    if in_span(basis, ident, tol):
        return SpaceClass("unital_system", evidence=sa_coords(basis, ident))
    if space.sa_dim == 1:
        return SpaceClass("singly_generated_sa", evidence=basis[0])
    return SpaceClass("generic")


@dataclass(frozen=True)
class GeneratedAlgebra:
    """C*(E) inside M_d, its unit (support projection) and unit flags."""

    space: OperatorSpace
    unit: np.ndarray
    contains_identity: bool
    unit_is_identity: bool


def generated_algebra(space: OperatorSpace, tol: float = TAU_MEM) -> GeneratedAlgebra:
    """Smallest product-closed selfadjoint subspace containing E.

    Iterates span U pairwise-products to a fixed point; the dimension grows
    strictly each round so at most d^2 rounds occur.
    """
    d = space.dim
    basis = space.sa_basis
    for _ in range(d * d + 1):
        prods = []
        for a in basis:
            for b in basis:
                p = a @ b
                prods.append(mk.hermitian_part(p))
                prods.append(mk.antihermitian_part(p))
        new_basis = _gram_schmidt_hermitian(list(basis) + prods)
        if new_basis.shape[0] == basis.shape[0]:
            basis = new_basis
            break
        basis = new_basis
    alg = OperatorSpace(f"C*({space.name})", d, tuple(basis), basis)
    # unit = support projection of a strictly positive element of the algebra
    s = np.einsum("kij,kmj->im", basis, np.conj(basis))  # sum_k B_k B_k*
    s = mk.hermitian_part(s)
    w, v = np.linalg.eigh(s)
    keep = w > TAU_RANK * max(w[-1], TAU_RANK)
    unit = mk.hermitian_part((v[:, keep]) @ np.conj(v[:, keep]).T)
    ident = mk.eye(d)
    return GeneratedAlgebra(
        space=alg,
        unit=unit,
        contains_identity=in_span(basis, ident, tol),
        unit_is_identity=bool(mk.frobenius(unit - ident) <= 1e-8 * d),
    )


def element_from_spanning_coords(level: Level, coords) -> np.ndarray:
    """Realize an element from real coefficients against the file basis.

    The coordinate order is: for each standard Hermitian unit S_m of M_n
    (diagonal units first, then re/im pairs per off-diagonal position) and
    each spanning matrix B_i, the element gains coords[m*k + i] * S_m (x) B_i.
    At level 1 this is plainly sum(coords[i] * B_i).  The result must be
    Hermitian and is membership-checked.
    """
    base = level.base
    k = len(base.spanning)
    coords = np.asarray(coords, dtype=np.float64)
    expected = level.n * level.n * k
    if coords.shape != (expected,):
        raise DimensionMismatch(
            f"level {level.n} over {k} spanning matrices needs {expected} coordinates,"
            f" got {coords.shape[0]}")
    units = _hermitian_unit_basis(level.n)
    spanning = np.stack(base.spanning)
    element = np.einsum("c,cij->ij",
                        coords.astype(np.complex128),
                        np.einsum("mab,kij->mkaibj", units, spanning).reshape(
                            expected, level.dim, level.dim))
    element = mk.require_hermitian(element, 1e-8)
    sa_coords(level.sa_basis, element)
    return element


def sample_sa_unit(level: Level, seed: int, count: int) -> np.ndarray:
    """Deterministic stream of op-norm-one Hermitian elements of M_n(E)_sa.

    Standard Gaussian coordinates against the level's sa basis, normalized in
    operator norm.  Raises :class:`DegenerateSpace` when sa_dim == 0.
    """
    k = level.sa_dim
    if k == 0:
        raise DegenerateSpace("cannot sample from a zero-dimensional space")
    rng = np.random.default_rng(seed)
    out = np.empty((count, level.dim, level.dim), dtype=np.complex128)
    i = 0
    while i < count:
        coords = rng.standard_normal(k)
        m = from_sa_coords(level.sa_basis, coords)
        nrm = mk.op_norm_hermitian(m)
        if nrm < 1e-14:
            continue
        out[i] = m / nrm
        i += 1
    return out
