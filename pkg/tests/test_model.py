import numpy as np
import pytest
import scipy.linalg

from biyb.errors import AliasingError, InstabilityError, ParameterError, SingularOperatorError
from biyb.group import adjoint_matrix, random_special_unitary, unitarity_defect
from biyb.lattice import Jet, fd_weights
from biyb.model import (BiYBModel, FieldState, InitialData, ModelParams, Trajectory,
                        Worldsheet, state_from_bytes, state_from_json, state_to_bytes,
                        state_to_json)


def test_params_validation_and_helpers():
    p = ModelParams(0.3, -0.2)
    assert p.c == pytest.approx(1 + 0.09 - 0.04)
    assert p.swapped() == ModelParams(-0.2, 0.3)
    with pytest.raises(ParameterError):
        ModelParams(6.0, 0.0)
    with pytest.raises(ParameterError):
        ModelParams(np.nan, 0.0)


def test_worldsheet_validation():
    ws = Worldsheet(n_sigma=64)
    assert ws.dt == pytest.approx(0.5 * 2 * np.pi / 64)
    assert ws.sigma.shape == (64,)
    with pytest.raises(ParameterError):
        Worldsheet(n_sigma=100)
    with pytest.raises(ParameterError):
        Worldsheet(n_sigma=64, dt=1.0)


def test_currents_connection_roundtrip(model2, rng):
    g = random_special_unitary(2, rng, 7)
    ap, am = rng.normal(size=(2, 7, 3))
    jp, jm = model2.currents(g, ap, am)
    bp, bm = model2.connection(g, jp, jm)
    np.testing.assert_allclose(bp, ap, atol=1e-13)
    np.testing.assert_allclose(bm, am, atol=1e-13)


def test_pcm_currents_are_signed_connection(rng):
    m = BiYBModel.su(3)
    g = random_special_unitary(3, rng, 4)
    ap, am = rng.normal(size=(2, 4, 8))
    jp, jm = m.currents(g, ap, am)
    np.testing.assert_allclose(jp, -ap, atol=1e-14)
    np.testing.assert_allclose(jm, am, atol=1e-14)


def test_singular_operator_reports_site(model2):
    op = np.broadcast_to(np.eye(3), (4, 3, 3)).copy()
    op[2] = 0.0
    with pytest.raises(SingularOperatorError) as info:
        model2._solve(op, np.ones((4, 3)))
    assert info.value.site is not None


def _exact_jets(model, g_of, point, h=1e-2, order=8):
    """Currents at ``point`` and their derivatives from an analytic g(tau, sigma)
    by high-order differences of the exactly evaluated currents."""
    def currents(t, s):
        g, dgt, dgs = g_of(t, s)
        ap = model.maurer_cartan(g, 0.5 * (dgt + dgs))
        am = model.maurer_cartan(g, 0.5 * (dgt - dgs))
        return g, *model.currents(g, ap, am)

    w = fd_weights(order)
    m = len(w) // 2
    t0, s0 = point
    g, jp, jm = currents(t0, s0)
    along_t = [currents(t0 + (k - m) * h, s0) for k in range(len(w))]
    along_s = [currents(t0, s0 + (k - m) * h) for k in range(len(w))]
    d = {}
    for idx in (1, 2):
        d[idx] = (sum(wk * c[idx] for wk, c in zip(w, along_t)) / h,
                  sum(wk * c[idx] for wk, c in zip(w, along_s)) / h)
    return g, Jet(jp, *d[1]), Jet(jm, *d[2])


def _analytic_field(basis, rng):
    c = rng.normal(size=(4, basis.dim))

    def g_of(t, s):
        x = c[0] * np.sin(t + 0.3) + c[1] * np.cos(2 * s) + c[2] * t * s + 0.5 * c[3]
        xt = c[0] * np.cos(t + 0.3) + c[2] * s
        xs = -2 * c[1] * np.sin(2 * s) + c[2] * t
        X = basis.to_matrix(x)
        g, dgt = scipy.linalg.expm_frechet(X, basis.to_matrix(xt))
        _, dgs = scipy.linalg.expm_frechet(X, basis.to_matrix(xs))
        return g, dgt, dgs
    return g_of


@pytest.mark.parametrize("n,alpha,beta", [(2, 0.3, 0.5), (3, 0.4, 0.4), (2, -0.7, 0.2)])
def test_offshell_bianchi_is_deformed_field_equation(n, alpha, beta, rng):
    # for currents built from any g the Bianchi combination equals
    # (alpha R_g + beta R) applied to the field-equation combination
    m = BiYBModel.su(n, alpha, beta)
    g, jp, jm = _exact_jets(m, _analytic_field(m.basis, rng), (0.4, 0.7))
    fe = m.eom_residual(jp, jm)
    bi = m.bianchi_residual(jp, jm)
    assert np.max(np.abs(fe)) > 1e-2  # genuinely off-shell
    op = alpha * m.R_g(g) + beta * m.R
    np.testing.assert_allclose(bi, op @ fe, atol=1e-9)


def test_v_residual_combinations(model2, rng):
    jp = Jet(*rng.normal(size=(3, 5, 3)))
    jm = Jet(*rng.normal(size=(3, 5, 3)))
    vp, vm = model2.v_residuals(jp, jm)
    np.testing.assert_allclose(vp + vm, model2.eom_residual(jp, jm), atol=1e-14)
    np.testing.assert_allclose(vp - vm, model2.bianchi_residual(jp, jm), atol=1e-14)


def test_vacuum_is_static(model2):
    ws = Worldsheet(n_sigma=16)
    g = np.broadcast_to(random_special_unitary(2, np.random.default_rng(1)), (16, 2, 2)).copy()
    state = FieldState(0.0, g, np.zeros((16, 3)), np.zeros((16, 3)))
    traj = model2.evolve(state, ws, 0.5)
    np.testing.assert_allclose(traj.g, np.broadcast_to(g, traj.g.shape), atol=1e-15)
    assert np.max(np.abs(traj.J_plus)) == 0.0


@pytest.mark.parametrize("alpha,beta", [(0.3, 0.2), (0.0, 0.0), (0.5, 0.5)])
def test_abelian_torus_solution(alpha, beta):
    # g = exp(tau a + sigma b) with a, b in the Cartan algebra solves every model
    m = BiYBModel.su(3, alpha, beta)
    ws = Worldsheet(n_sigma=16)
    a = np.zeros(8)
    b = np.zeros(8)
    a[:2] = [0.4, -0.3]
    # periodicity: diag entries of sigma b are 2 pi times integers times i
    b_mat = 1j * np.diag([1.0, 2.0, -3.0])
    b[:2] = m.basis.coefficients(b_mat)[:2].real
    np.testing.assert_allclose(m.basis.to_matrix(b), b_mat, atol=1e-14)

    def g_at(tau):
        return np.array([scipy.linalg.expm(m.basis.to_matrix(tau * a + s * b))
                         for s in ws.sigma])

    ap, am = 0.5 * (a + b), 0.5 * (a - b)
    g0 = g_at(0.0)
    jp, jm = m.currents(g0, np.broadcast_to(ap, (16, 8)), np.broadcast_to(am, (16, 8)))
    traj = m.evolve(FieldState(0.0, g0, jp, jm), ws, 1.0)
    np.testing.assert_allclose(traj.g[-1], g_at(traj.taus[-1]), atol=1e-8)
    np.testing.assert_allclose(traj.J_plus[-1], jp, atol=1e-13)


def test_initial_state_constraint_and_aliasing(model2):
    ws = Worldsheet(n_sigma=128)
    s = model2.initial_state(ws, InitialData(modes=3, amplitude=0.5, seed=3))
    assert np.max(np.abs(model2.constraint_residual(s, ws))) < 1e-12
    assert unitarity_defect(s.g) < 1e-13
    with pytest.raises(AliasingError):
        model2.initial_state(ws, InitialData(modes=33))


def test_evolution_converges_at_fourth_order(model2):
    errs = []
    for n in (32, 64):
        ws = Worldsheet(n_sigma=n)
        traj = model2.evolve(model2.initial_state(ws, InitialData(amplitude=0.5)), ws, 0.5)
        jp, jm = traj.current_jets()
        errs.append(np.max(np.abs(model2.eom_residual(jp, jm))))
        assert unitarity_defect(traj.g) < 1e-9
    assert np.log2(errs[0] / errs[1]) > 3.0


def test_instability_detected(model2):
    ws = Worldsheet(n_sigma=16)
    s = model2.initial_state(ws)
    bad = FieldState(0.0, s.g, s.J_plus * np.nan, s.J_minus)
    with pytest.raises(InstabilityError):
        model2.step(bad, ws)


def test_invert_solution_is_an_involution(model2):
    ws = Worldsheet(n_sigma=16)
    s = model2.initial_state(ws, InitialData(amplitude=0.4))
    h, other = model2.invert_solution(s)
    assert other.params == ModelParams(0.2, 0.3)
    back, again = other.invert_solution(h)
    assert again.params == model2.params
    np.testing.assert_allclose(back.g, s.g, atol=1e-13)
    np.testing.assert_allclose(back.J_plus, s.J_plus, atol=1e-12)
    np.testing.assert_allclose(back.J_minus, s.J_minus, atol=1e-12)


def test_action_density_duality(rng):
    g = random_special_unitary(3, rng, 30)
    m = BiYBModel.su(3, 0.3, 0.7)
    ap, am = rng.normal(size=(2, 30, 8))
    ad = adjoint_matrix(m.basis, g)
    h_ap = -np.einsum("...ij,...j->...i", ad, ap)
    h_am = -np.einsum("...ij,...j->...i", ad, am)
    dual = m.with_params(m.params.swapped())
    np.testing.assert_allclose(m.action_density(g, ap, am),
                               dual.action_density(np.linalg.inv(g), h_ap, h_am), atol=1e-12)


def test_pcm_action_density_is_trace_form(rng):
    m = BiYBModel.su(2)
    g = random_special_unitary(2, rng, 3)
    ap, am = rng.normal(size=(2, 3, 3))
    np.testing.assert_allclose(m.action_density(g, ap, am), -np.sum(ap * am, -1), atol=1e-14)


def test_snapshot_roundtrips(model2):
    ws = Worldsheet(n_sigma=16)
    s = model2.initial_state(ws)
    for dump, load in ((state_to_json, state_from_json), (state_to_bytes, state_from_bytes)):
        s2, ws2, p2 = load(dump(s, ws, model2.params))
        np.testing.assert_array_equal(s2.g, s.g)
        np.testing.assert_array_equal(s2.J_plus, s.J_plus)
        np.testing.assert_array_equal(s2.J_minus, s.J_minus)
        assert ws2.n_sigma == 16 and ws2.dt == ws.dt
        assert p2 == model2.params


def test_snapshot_rejects_foreign_data(model2):
    with pytest.raises(ValueError):
        state_from_bytes(b"NOPE" + bytes(8))
    with pytest.raises(ValueError):
        state_from_json('{"schema": "other", "version": 1}')


def test_trajectory_helpers(model2):
    ws = Worldsheet(n_sigma=16)
    traj = model2.evolve(model2.initial_state(ws), ws, 1.0)
    assert len(traj) == traj.g.shape[0]
    assert traj.dt == pytest.approx(ws.dt)
    rebuilt = Trajectory.from_states([traj.state(k) for k in range(len(traj))], ws)
    np.testing.assert_array_equal(rebuilt.J_minus, traj.J_minus)
    jp, _ = traj.current_jets()
    assert jp.value.shape == (len(traj) - 4, 16, 3)
