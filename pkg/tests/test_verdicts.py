import math

import numpy as np
import pytest

from ossa import corpus
from ossa import matkernel as mk
from ossa import opspace as osp
from ossa import verdicts as vd

CFG_FAST = vd.CheckConfig(max_level=2, samples=60)


def test_embedding_intro_family():
    for r, expect_pass in ((0.25, False), (0.5, False), (0.75, False), (1.0, True)):
        v = vd.check_embedding(corpus.intro_space(r), CFG_FAST)
        assert v.passed == expect_pass
        if not expect_pass:
            assert v.status == vd.FAIL
            assert v.gap == pytest.approx(1.0 - r, abs=5e-4)
            assert np.allclose(np.abs(v.witness), np.diag([1.0, r]), atol=1e-9)
        else:
            assert v.theorem == "balanced-generator"


def test_embedding_one_sided_generator():
    space = osp.build_space(2, [np.diag([1.0, 0.5]).astype(complex)])
    v = vd.check_embedding(space, CFG_FAST)
    assert v.status == vd.PASS_CERTIFIED
    assert v.theorem == "one-sided-generator"


def test_embedding_certified_classes():
    v = vd.check_embedding(corpus.m2_space(), CFG_FAST)
    assert v.status == vd.PASS_CERTIFIED and v.theorem == "subalgebra-inclusion"
    sys3 = osp.build_space(3, [np.eye(3, dtype=complex),
                               np.diag([1.0, 2.0, 3.0]).astype(complex)])
    v2 = vd.check_embedding(sys3, CFG_FAST)
    assert v2.status == vd.PASS_CERTIFIED and v2.theorem == "unital-system"


def test_embedding_nonemb_fails_by_search():
    v = vd.check_embedding(corpus.nonemb_space(), CFG_FAST)
    assert v.status == vd.FAIL
    assert v.gap is not None and v.gap > 5e-4
    assert v.witness is not None


def test_embedding_nopositive_ext2_fails():
    v = vd.check_embedding(corpus.nopositive_ext2_space(), CFG_FAST)
    assert v.status == vd.FAIL


def test_kappa_examples():
    # unit-sphere samples: the (A-B)/||A-B|| direction alone already needs
    # max norm 2/golden > 1, so kappa = 1 must fail with a sphere witness
    v = vd.check_kappa(corpus.nonemb_space(), 1.0, CFG_FAST)
    assert v.status == vd.FAIL
    assert v.values["worst_value"] > 1.0 + 1e-3
    assert v.witness is not None
    assert abs(mk.op_norm_hermitian(v.witness) - 1.0) <= 1e-9
    coords = osp.sa_coords(osp.amplify(corpus.nonemb_space(), 1).sa_basis, v.witness)
    assert coords.shape == (2,)

    v2 = vd.check_kappa(corpus.m2_space(), 1.0, CFG_FAST)
    assert v2.status == vd.PASS_NO_GAP

    v3 = vd.check_kappa(corpus.intro_space(0.5), 4.0, CFG_FAST)
    assert v3.status == vd.FAIL
    assert math.isinf(v3.values["worst_value"])


def test_kappa_monotone():
    space = corpus.nonemb_space()
    cfg = vd.CheckConfig(max_level=1, samples=40)
    v1 = vd.check_kappa(space, 4.0, cfg)
    assert v1.status == vd.PASS_NO_GAP
    assert v1.values["worst_value"] <= 4.0 + 1e-3
    v2 = vd.check_kappa(space, 5.0, cfg)
    assert v2.status == vd.PASS_NO_GAP


def test_separating_and_apg_wrappers():
    sep = vd.check_separating(corpus.nopositive_ext2_space(), CFG_FAST)
    assert sep.status == vd.FAIL
    assert np.allclose(sep.witness, np.diag([0.0, 1.0]), atol=1e-6)
    assert vd.check_separating(corpus.m2_space(), CFG_FAST).passed
    assert vd.check_apg(corpus.nonemb_space(), CFG_FAST).passed
    apg = vd.check_apg(corpus.intro_space(0.5), CFG_FAST)
    assert apg.status == vd.FAIL and apg.witness is not None


def test_audit_chain():
    space = corpus.nonemb_space()
    apg = vd.check_apg(space, CFG_FAST)
    emb = vd.check_embedding(space, CFG_FAST)
    sep = vd.check_separating(space, CFG_FAST)
    assert vd.audit_separating_chain(apg, emb, sep) == []
    # a fabricated inconsistency trips the audit
    bad_sep = vd.Verdict("separating", vd.FAIL)
    good = vd.Verdict("approx_positive_generation", vd.PASS_NO_GAP)
    good_emb = vd.Verdict("embedding", vd.PASS_CERTIFIED)
    assert vd.audit_separating_chain(good, good_emb, bad_sep) == ["inconsistent-theorems"]


def test_cross_route_agreement_on_corpus():
    # gauge route and unitisation route give the same embedding verdict
    from ossa import gauges, unitisation as un

    for space, expect_fail in ((corpus.nonemb_space(), True),
                               (corpus.nopositive_ext2_space(), True),
                               (corpus.m2_space(), False),
                               (corpus.intro_space(0.5), True),
                               (corpus.intro_space(1.0), False),
                               (corpus.truncated_diag_space(True), False),
                               (corpus.truncated_diag_space(False), True)):
        lev = osp.amplify(space, 1)
        g = gauges.gauge_gap_search(lev, samples=40, seed=42)
        u = un.unitisation_gap_search(space, lev, samples=40, seed=42)
        gauge_fail = g.certified and g.max_gap > 5e-4
        unit_fail = u.certified and u.max_gap > 1e-3
        assert gauge_fail == expect_fail, space.name
        assert unit_fail == expect_fail, space.name


def test_kappa_one_fail_carries_one_directional_flag():
    v = vd.check_kappa(corpus.nonemb_space(), 1.0, CFG_FAST)
    assert v.status == vd.FAIL
    assert "no-embedding-inference" in v.flags


def test_corpus_runs_clean_fast_config():
    rows = corpus.run_corpus("intro", CFG_FAST)
    assert rows and all(r.passed for r in rows)
    rows = corpus.run_corpus("m2-full", CFG_FAST)
    assert rows and all(r.passed for r in rows)


def test_corpus_parallel_matches_serial():
    serial = corpus.run_corpus("intro", CFG_FAST)
    parallel = corpus.run_corpus("intro", CFG_FAST, max_workers=4)
    assert [(r.case, r.quantity, r.computed) for r in serial] == \
        [(r.case, r.quantity, r.computed) for r in parallel]
