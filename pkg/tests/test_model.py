import numpy as np
import pytest

import ssmkit as sk
from ssmkit.model import AdjacencyRow, NonlinearUnsupportedError, UpdateBinding
from ssmkit.params import ParamSet


def noise_model(var=1.0):
    ps = ParamSet.simple(["epsilon var"], "1/2 log", [var])
    upd = UpdateBinding("H", lambda v: v, np.array([True]))
    return sk.StateSpaceModel(
        H=sk.DynamicMatrix([[var]], mmask=[[True]]),
        Z=np.zeros((1, 0)), T=np.zeros((0, 0)), R=np.zeros((0, 0)),
        Q=np.zeros((0, 0)), c=np.zeros((0, 1)), a1=np.zeros((0, 1)),
        P1=np.zeros((0, 0)), params=ps, updates=[upd],
        components=[sk.Component("noise", 0, 0, {})],
    )


def llm_like(hvar=1.0, qvar=1.0, diffuse=True):
    psH = ParamSet.simple(["epsilon var"], "1/2 log", [hvar])
    psQ = ParamSet.simple(["zeta var"], "1/2 log", [qvar])
    ps, masks = ParamSet.concat([psH, psQ])
    upds = [
        UpdateBinding("H", lambda v: v, masks[0]),
        UpdateBinding("Q", lambda v: v, masks[1]),
    ]
    P1 = [[np.inf]] if diffuse else [[1.0]]
    return sk.StateSpaceModel(
        H=sk.DynamicMatrix([[hvar]], mmask=[[True]]),
        Z=[[1.0]], T=[[1.0]], R=[[1.0]],
        Q=sk.DynamicMatrix([[qvar]], mmask=[[True]]),
        c=None, a1=None, P1=P1, params=ps, updates=upds,
        components=[sk.Component("noise", 0, 0, {}), sk.Component("level", 0, 1, {})],
    )


class TestAdjacency:
    def test_parse_any_order(self):
        assert AdjacencyRow.parse("QdH").flags == AdjacencyRow.parse("HQd").flags

    def test_greedy_longest(self):
        row = AdjacencyRow.parse("HngQngP1a1cd")
        assert row.flags == frozenset({"Hng", "Qng", "P1", "a1", "cd"})

    def test_order_is_canonical(self):
        assert AdjacencyRow.parse("QdHT").ordered() == ("H", "T", "Qd")

    def test_nonlinear_rejected(self):
        with pytest.raises(NonlinearUnsupportedError):
            AdjacencyRow.parse("ZnlT")

    def test_garbage_rejected(self):
        with pytest.raises(ValueError):
            AdjacencyRow.parse("Hx")


class TestApplyUpdates:
    def test_variance_convention(self):
        # psi = 0 under the half-log transform puts the variance at 1
        mdl = noise_model(5.0).with_psi([0.0])
        assert mdl.H.mat.mat[0, 0] == pytest.approx(1.0)

    def test_two_functions_stack_in_order(self):
        ps = ParamSet.simple(["t1", "t2"], "identity", [0.0, 0.0])
        upds = [
            UpdateBinding("T", lambda v: v, np.array([True, False])),
            UpdateBinding("T", lambda v: v, np.array([False, True])),
        ]
        mdl = sk.StateSpaceModel(
            H=[[1.0]], Z=[[1.0, 0.0]],
            T=sk.DynamicMatrix(np.zeros((2, 2)), mmask=[[True, False], [True, False]]),
            R=np.eye(2), Q=np.eye(2), c=None, a1=None, P1=np.eye(2),
            params=ps, updates=upds,
        )
        out = mdl.with_psi([3.0, 4.0])
        # column-major cells (0,0) then (1,0), filled in function order
        assert out.T.mat[0, 0] == 3.0
        assert out.T.mat[1, 0] == 4.0

    def test_no_params_identity(self):
        mdl = sk.StateSpaceModel(H=[[1.0]], Z=[[1.0]], T=[[1.0]], R=[[1.0]], Q=[[1.0]])
        out = mdl.with_psi([])
        assert out.H.mat.mat[0, 0] == 1.0

    def test_roundtrip_bit_exact(self):
        mdl = llm_like(2.0, 0.5)
        mdl = mdl.with_psi(mdl.psi)
        again = mdl.with_psi(mdl.psi)
        assert np.array_equal(again.H.mat.mat, mdl.H.mat.mat)
        assert np.array_equal(again.Q.mat.mat, mdl.Q.mat.mat)

    def test_length_mismatch_is_structural_error(self):
        ps = ParamSet.simple(["a"], "identity", [0.0])
        upd = UpdateBinding("H", lambda v: np.array([1.0, 2.0]), np.array([True]))
        mdl = sk.StateSpaceModel(
            H=sk.DynamicMatrix([[1.0]], mmask=[[True]]), Z=[[1.0]], T=[[1.0]],
            R=[[1.0]], Q=[[1.0]], params=ps, updates=[upd],
        )
        with pytest.raises(ValueError, match="variable cells"):
            mdl.with_psi([0.0])

    def test_nonfinite_output_names_function(self):
        ps = ParamSet.simple(["a"], "identity", [0.0])
        upd = UpdateBinding("H", lambda v: np.array([np.nan]), np.array([True]))
        mdl = sk.StateSpaceModel(
            H=sk.DynamicMatrix([[1.0]], mmask=[[True]]), Z=[[1.0]], T=[[1.0]],
            R=[[1.0]], Q=[[1.0]], params=ps, updates=[upd],
        )
        with pytest.raises(FloatingPointError, match="function 0"):
            mdl.with_psi([0.0])


class TestCombine:
    def test_noise_plus_structure(self):
        combined = sk.combine_additive([noise_model(2.0), llm_like()])
        # H from the first model only
        assert combined.H.mat.mat[0, 0] == 2.0
        assert combined.m == 1 and combined.r == 1
        assert combined.w == 3

    def test_two_llms_block_structure(self):
        c = sk.combine_additive([llm_like(diffuse=False), llm_like(diffuse=False)])
        assert c.m == 2 and c.r == 2
        assert np.array_equal(c.T.mat, np.eye(2))
        assert np.array_equal(c.Q.mat.mat, np.eye(2))
        assert c.Z.mat.shape == (1, 2)

    def test_p_mismatch(self):
        two = sk.StateSpaceModel(H=np.eye(2), Z=np.ones((2, 1)), T=[[1.0]],
                                 R=[[1.0]], Q=[[1.0]])
        with pytest.raises(ValueError, match="dimension mismatch"):
            sk.combine_additive([llm_like(), two])

    def test_later_H_discarded_with_warning(self, caplog):
        import logging

        with caplog.at_level(logging.WARNING, logger="ssmkit.model"):
            c = sk.combine_additive([llm_like(3.0), llm_like(4.0)])
        assert c.H.mat.mat[0, 0] == 3.0
        assert any("discarded" in r.message for r in caplog.records)

    def test_update_reindexing(self):
        c = sk.combine_additive([noise_model(2.0), llm_like(1.0, 0.5)])
        # move the second model's Q variance: psi order is (eps1, eps2, zeta)
        out = c.with_params([2.0, 1.0, 9.0])
        assert out.Q.mat.mat[0, 0] == pytest.approx(9.0)
        assert out.H.mat.mat[0, 0] == pytest.approx(2.0)

    def test_associativity_of_matrices(self):
        a, b, cc = llm_like(1.0, 1.0), llm_like(2.0, 0.5), llm_like(0.3, 0.7)
        left = sk.combine_additive([sk.combine_additive([a, b]), cc])
        right = sk.combine_additive([a, sk.combine_additive([b, cc])])
        for name in ("Z", "T", "R", "P1", "c", "a1"):
            assert getattr(left, name).equals(getattr(right, name))
        assert left.Q.mat.equals(right.Q.mat)
        assert left.H.mat.equals(right.H.mat)

    def test_component_spans(self):
        c = sk.combine_additive([llm_like(diffuse=False), llm_like(diffuse=False)])
        widths = [cpt.width for cpt in c.components]
        assert widths == [0, 1, 0, 1]
        assert c.components[3].start == 1


class TestValidate:
    def test_wellformed_empty(self):
        assert sk.validate(llm_like()) == []

    def test_z_width_mismatch(self):
        mdl = sk.StateSpaceModel(H=[[1.0]], Z=[[1.0, 0.0]], T=[[1.0]], R=[[1.0]],
                                 Q=[[1.0]])
        diags = sk.validate(mdl)
        assert len(diags) == 1 and "Z is" in diags[0]

    def test_offdiagonal_inf(self):
        P1 = np.array([[np.inf, np.inf], [np.inf, np.inf]])
        mdl = sk.StateSpaceModel(H=[[1.0]], Z=[[1.0, 0.0]], T=np.eye(2),
                                 R=np.eye(2), Q=np.eye(2), P1=P1)
        assert any("off-diagonal" in d for d in sk.validate(mdl))
