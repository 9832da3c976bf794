import math

import numpy as np
import pytest

from ossa import functionals as fns
from ossa import matkernel as mk
from ossa import opspace as osp

A = np.array([[1.0, 1.0], [1.0, 1.0]], dtype=complex)
B = np.diag([0.0, 1.0]).astype(complex)
E11 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
E12 = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
E21 = E12.conj().T
E22 = np.diag([0.0, 1.0]).astype(complex)


def nonemb():
    return osp.build_space(2, [A, B], "nonemb", cone_generators=[A, B])


def nonemb_phi(space=None):
    space = space or nonemb()
    rho = (1.0 / math.sqrt(2.0)) * np.array([[1.0, -1.0], [-1.0, 1.0]], dtype=complex)
    return fns.Functional(osp.amplify(space, 1), rho)


def nopos2():
    return osp.build_space(2, [E11, E12, E21], "nopos2", cone_generators=[E11])


def nopos2_phi(space=None):
    space = space or nopos2()
    return fns.Functional(osp.amplify(space, 1), -(E12 + E21))


def intro(r):
    return osp.build_space(2, [np.diag([1.0, -r]).astype(complex)], f"Er-{r}")


def test_evaluate_examples():
    phi = nonemb_phi()
    # phi(alpha A + beta B) = beta / sqrt(2)
    assert fns.evaluate(phi, A) == pytest.approx(0.0, abs=1e-12)
    assert fns.evaluate(phi, B) == pytest.approx(1.0 / math.sqrt(2.0))
    assert fns.evaluate(phi, 2.0 * A + 3.0 * B) == pytest.approx(3.0 / math.sqrt(2.0))
    zero = fns.Functional(phi.level, np.zeros((2, 2), dtype=complex))
    assert fns.evaluate(zero, A) == 0.0
    er = intro(0.5)
    f = fns.Functional(osp.amplify(er, 1), E22)
    assert fns.evaluate(f, np.diag([1.0, -0.5]).astype(complex)) == pytest.approx(-0.5)
    with pytest.raises(osp.NotInSpan):
        fns.evaluate(phi, E12 + E21)


def test_restricted_norm_nonemb():
    assert fns.restricted_norm(nonemb_phi()) == pytest.approx(1.0, abs=1e-6)


def test_restricted_norm_oracle_grid():
    # independent oracle: along the annihilator [[-2t, t], [t, 0]] the trace
    # norm squared is f(t) = 2 - 4 sqrt(2) t + 8 t^2, minimized at t = sqrt2/4
    phi = nonemb_phi()
    ts = np.linspace(0.0, 1.0, 2001)
    vals = np.sqrt(2.0 - 4.0 * math.sqrt(2.0) * ts + 8.0 * ts ** 2)
    t_star = ts[np.argmin(vals)]
    assert t_star == pytest.approx(math.sqrt(2.0) / 4.0, abs=1e-3)
    assert float(np.min(vals)) == pytest.approx(1.0, abs=1e-6)
    for t in (0.0, float(t_star), 0.7):
        a = np.array([[-2.0 * t, t], [t, 0.0]], dtype=complex)
        assert mk.trace_norm(phi.rho + a) == pytest.approx(
            math.sqrt(2.0 - 4.0 * math.sqrt(2.0) * t + 8.0 * t ** 2), abs=1e-12)


def test_restricted_norm_orthogonal_and_scaling():
    lev = osp.amplify(nonemb(), 1)
    ann = np.array([[-2.0, 1.0], [1.0, 0.0]], dtype=complex)
    assert fns.restricted_norm(fns.Functional(lev, ann)) == pytest.approx(0.0, abs=1e-9)
    phi = nonemb_phi()
    assert fns.restricted_norm(fns.Functional(lev, 2.5 * phi.rho)) == pytest.approx(2.5, abs=1e-5)


def test_restricted_norm_bounds_evaluation():
    lev = osp.amplify(nonemb(), 1)
    rng = np.random.default_rng(31)
    for _ in range(5):
        rho = mk.hermitian_part(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
        f = fns.Functional(lev, rho)
        nrm = fns.restricted_norm(f)
        for x in osp.sample_sa_unit(lev, 5, 6):
            assert abs(fns.evaluate(f, x)) <= nrm + 1e-6


def test_restricted_norm_bisect_route_agrees():
    # the bisect route is tangency-limited to ~sqrt(delta); coarse agreement
    phi = nonemb_phi()
    assert fns.restricted_norm_bisect(phi, tol=1e-3) == pytest.approx(1.0, abs=5e-3)


def test_validate_positive_examples():
    chk = fns.validate_positive(nonemb_phi())
    assert chk.kind == "exact" and chk.min_value >= -1e-10
    chk2 = fns.validate_positive(nopos2_phi())
    assert chk2.kind == "exact"
    # trivial cone: vacuous validation for any Hermitian rho
    er = intro(0.5)
    f = fns.Functional(osp.amplify(er, 1), np.diag([3.0, -7.0]).astype(complex))
    assert fns.validate_positive(f).kind in ("exact", "sampled")
    # genuinely non-positive functional fails on a sampled cone point
    bad = fns.Functional(osp.amplify(nonemb(), 1), -np.eye(2, dtype=complex))
    assert fns.validate_positive(bad, generators=None, n_points=32).kind == "fail" or \
        fns.validate_positive(bad).kind == "fail"


def test_min_norm_positive_extension_nonemb():
    ext = fns.min_norm_positive_extension(nonemb_phi())
    assert ext.status == "feasible"
    assert ext.trace == pytest.approx(math.sqrt(2.0), abs=1e-3)
    target = (1.0 / math.sqrt(2.0)) * np.array([[1.0, -1.0], [-1.0, 1.0]])
    assert np.max(np.abs(ext.sigma - target)) <= 1e-3
    # the extension reproduces the functional on the span
    lev = osp.amplify(nonemb(), 1)
    phi = nonemb_phi()
    for m in (A, B, A - B):
        assert np.real(np.trace(ext.sigma @ m)) == pytest.approx(
            fns.evaluate(phi, m), abs=1e-3)
    # an extension can never have smaller norm than the restriction
    assert ext.trace >= fns.restricted_norm(phi) - 1e-3


def test_min_norm_positive_extension_infeasible_with_certificate():
    ext = fns.min_norm_positive_extension(nopos2_phi())
    assert ext.status == "infeasible"
    assert ext.certificate is not None
    assert "sigma[0,0]=0" in ext.certificate
    assert "certified-infeasibility" in ext.flags


def test_min_norm_positive_extension_intro_oracle():
    # oracle: sigma = diag(s, t) >= 0 with s - r t = -1 minimizes s + t at
    # s = 0, t = 1/r
    for r in (0.5, 1.0):
        er = intro(r)
        x = np.diag([1.0, -r]).astype(complex)
        f = fns.Functional(osp.amplify(er, 1), -x / (1.0 + r * r))
        assert fns.evaluate(f, x) == pytest.approx(-1.0, abs=1e-12)
        ext = fns.min_norm_positive_extension(f)
        assert ext.status == "feasible"
        assert ext.trace == pytest.approx(1.0 / r, abs=1e-3)


def test_state_restriction_extends_with_trace_at_most_one():
    rng = np.random.default_rng(33)
    g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    state = g @ g.conj().T
    state = state / np.trace(state)
    space = nonemb()
    lev = osp.amplify(space, 1)
    # restrict the state to the span: the representative is the state itself
    f = fns.Functional(lev, mk.hermitian_part(state))
    ext = fns.min_norm_positive_extension(f)
    assert ext.status == "feasible"
    assert ext.trace <= 1.0 + 1e-6


def test_separating_examples():
    res = fns.separating_check(nopos2(), 3)
    assert not res.separating
    assert np.allclose(res.witness, E22, atol=1e-6)
    assert res.consistent

    m2 = osp.build_space(2, [E11, E12, E21, E22])
    res2 = fns.separating_check(m2, 3)
    assert res2.separating and res2.consistent

    res3 = fns.separating_check(nonemb(), 3)
    assert res3.separating and res3.consistent


def test_check_apg_examples():
    assert fns.check_apg(nonemb(), 3).apg
    r = fns.check_apg(intro(0.5), 3)
    assert not r.apg
    gen = np.diag([1.0, -0.5]).astype(complex)
    direction = r.deficient / mk.frobenius(r.deficient)
    assert abs(abs(mk.re_inner(direction, gen / mk.frobenius(gen))) - 1.0) < 1e-9
    r2 = fns.check_apg(nopos2(), 3)
    assert not r2.apg
    assert r2.per_level[0][1] == 1  # cone rank 1 < 3
    for res in (fns.check_apg(nonemb(), 3), r, r2):
        assert res.consistent


def test_min_decomposition_examples():
    space = nonemb()
    lev = osp.amplify(space, 1)
    dec = fns.min_decomposition_maxnorm(lev, A - B, tol=1e-3)
    assert dec.value == pytest.approx(2.0, abs=1e-3)
    # any cone element decomposes as itself minus zero
    dec2 = fns.min_decomposition_maxnorm(lev, A, tol=1e-3)
    assert dec2.value == pytest.approx(float(mk.op_norm(A)), abs=1e-3)
    m2 = osp.build_space(2, [E11, E12, E21, E22])
    dec3 = fns.min_decomposition_maxnorm(osp.amplify(m2, 1),
                                         np.diag([1.0, -1.0]).astype(complex), tol=1e-3)
    assert dec3.value == pytest.approx(1.0, abs=1e-3)
    dec4 = fns.min_decomposition_maxnorm(osp.amplify(intro(0.5), 1),
                                         np.diag([1.0, -0.5]).astype(complex))
    assert not dec4.feasible


def test_decomposition_witness_is_valid():
    lev = osp.amplify(nonemb(), 1)
    dec = fns.min_decomposition_maxnorm(lev, A - B, tol=1e-3)
    assert mk.min_eig(dec.p) >= -1e-6
    assert mk.min_eig(dec.q) >= -1e-6
    assert mk.frobenius((dec.p - dec.q) - (A - B)) <= 1e-5
    assert mk.op_norm_hermitian(dec.p) <= dec.value + 1e-5
    assert mk.op_norm_hermitian(dec.q) <= dec.value + 1e-5


def test_arveson_level_one_is_identity():
    space = nonemb()
    lev = osp.amplify(space, 1)
    phi = nonemb_phi(space)
    cp = fns.arveson_to_cp(phi)
    assert cp.k == 1
    for m, basis_el in enumerate(space.sa_basis):
        assert cp.images[m][0, 0] == pytest.approx(fns.evaluate(phi, basis_el))
    # the rebuilt representative is the in-span Riesz rep: same functional
    back = fns.arveson_to_functional(cp)
    for basis_el in space.sa_basis:
        assert fns.evaluate(back, basis_el) == pytest.approx(
            fns.evaluate(phi, basis_el), abs=1e-12)


def test_arveson_round_trip_level_two():
    er = intro(0.5)
    lev2 = osp.amplify(er, 2)
    rng = np.random.default_rng(34)
    rho = mk.hermitian_part(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
    s = fns.Functional(lev2, rho)
    cp = fns.arveson_to_cp(s)
    back = fns.arveson_to_functional(cp)
    # the round trip reproduces the functional on every span element
    for basis_el in lev2.sa_basis:
        assert fns.evaluate(back, basis_el) == pytest.approx(
            fns.evaluate(s, basis_el), abs=1e-10)
    cp2 = fns.arveson_to_cp(back)
    assert np.allclose(cp.images, cp2.images, atol=1e-12)


def test_arveson_norm_bounds_on_singly_generated():
    # ||s_phi|| <= n ||phi||_cb and ||phi_s||_cb <= n^3 ||s|| on instances
    # where the cb-norm is exact (singly generated domain)
    er = intro(0.5)
    rng = np.random.default_rng(35)
    x = er.sa_basis[0]
    for n in (1, 2):
        lev = osp.amplify(er, n)
        rho = mk.hermitian_part(rng.standard_normal((2 * n, 2 * n))
                                + 1j * rng.standard_normal((2 * n, 2 * n)))
        s = fns.Functional(lev, rho)
        cp = fns.arveson_to_cp(s)
        cb = fns.cb_norm_singly_generated(x, cp.apply(x))
        s_norm = fns.restricted_norm(s)
        assert cb <= n ** 3 * s_norm + 1e-6
        back = fns.arveson_to_functional(cp)
        assert fns.restricted_norm(back) <= n * cb + 1e-6


def test_cb_norm_estimate_is_lower_bound_consistent():
    er = intro(0.5)
    lev = osp.amplify(er, 2)
    rng = np.random.default_rng(36)
    rho = mk.hermitian_part(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
    cp = fns.arveson_to_cp(fns.Functional(lev, rho))
    exact = fns.cb_norm_singly_generated(er.sa_basis[0], cp.apply(er.sa_basis[0]))
    assert fns.cb_norm_estimate(cp, max_level=2, samples=10) <= exact + 1e-9


def test_qsposcon_instance():
    # when the sup over the cone's unit ball attains the restricted norm, a
    # norm-preserving positive extension exists (here: a state on M_2)
    m2 = osp.build_space(2, [E11, E12, E21, E22], cone_generators=None)
    lev = osp.amplify(m2, 1)
    rho = np.diag([0.5, 0.5]).astype(complex)
    f = fns.Functional(lev, rho)
    nrm = fns.restricted_norm(f)
    sup = float(np.real(np.trace(rho @ np.eye(2))))  # attained at x = I
    assert sup == pytest.approx(nrm, abs=1e-6)
    ext = fns.min_norm_positive_extension(f)
    assert ext.status == "feasible"
    assert ext.trace <= nrm + 1e-3


def test_cp_extend_examples():
    x = np.diag([1.0, -1.0]).astype(complex)
    ext = fns.cp_extend_singly_generated(x, -x)
    assert np.allclose(ext.Y, np.eye(2))
    assert np.allclose(ext.Q_M, np.diag([0.0, 1.0]))
    assert np.allclose(ext.Q_m, np.diag([1.0, 0.0]))
    assert ext.cb_norm == pytest.approx(1.0)

    x2 = np.diag([1.0, -0.5]).astype(complex)
    ext2 = fns.cp_extend_singly_generated(x2, -x2)
    assert np.allclose(ext2.Y, np.diag([2.0, 0.5]))
    assert ext2.cb_norm == pytest.approx(2.0)  # = ||x|| / min part norm

    ext3 = fns.cp_extend_singly_generated(x, x)
    assert np.allclose(ext3.Q_M, np.diag([1.0, 0.0]))
    assert np.allclose(ext3.Q_m, np.diag([0.0, 1.0]))
    assert ext3.cb_norm == pytest.approx(1.0)

    with pytest.raises(fns.SpectrumOneSided):
        fns.cp_extend_singly_generated(np.diag([1.0, 2.0]).astype(complex), x)


def test_cp_extend_random_properties():
    rng = np.random.default_rng(37)
    for _ in range(25):
        d = int(rng.integers(2, 6))
        x = mk.hermitian_part(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
        lo, hi = mk.spectral_bounds(x)
        if lo >= -1e-6 or hi <= 1e-6:
            continue
        k = int(rng.integers(1, 4))
        t = mk.hermitian_part(rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k)))
        ext = fns.cp_extend_singly_generated(x, t)
        assert mk.min_eig(ext.Q_m) >= -1e-9
        assert mk.min_eig(ext.Q_M) >= -1e-9
        assert mk.frobenius(ext.m * ext.Q_m + ext.M * ext.Q_M - t) <= 1e-9
        assert mk.frobenius(ext.Q_m + ext.Q_M - ext.Y) <= 1e-9
        assert ext.cb_norm <= mk.op_norm(t) / min(ext.M, abs(ext.m)) + 1e-9


def test_apg_consistent_across_levels_on_corpus():
    for space in (nonemb(), intro(0.5), nopos2()):
        assert fns.check_apg(space, max_level=3).consistent
