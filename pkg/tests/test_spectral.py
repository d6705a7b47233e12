import csv
import json
from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg

from biyb.errors import ParameterError, TransportError
from biyb.group import an_defect, iwasawa, random_special_unitary, unitarity_defect
from biyb.lattice import central_difference
from biyb.lax import bi_yb_lax, zm_lax
from biyb.model import BiYBModel, FieldState, InitialData, ModelParams, Worldsheet
from biyb.spectral import (SolutionLattice, cascade_report, conserved_trace_drift,
                           iwasawa_tangent, monodromy, monodromy_matrices, output_residuals,
                           param_map, pcm_to_yb, transport_extended, verify_pcm_to_yb,
                           verify_yb_to_biyb, write_trace_csv, yb_to_biyb)


@pytest.fixture(scope="module")
def pcm_lattice():
    pcm = BiYBModel.su(2)
    ws = Worldsheet(n_sigma=32)
    traj = pcm.evolve(pcm.initial_state(ws, InitialData(amplitude=0.5)), ws, 1.0)
    return pcm, SolutionLattice.from_trajectory(pcm, traj)


def _exact_param_map(eps, eta):
    eps, eta = Fraction(eps), Fraction(eta)
    den = 1 - eps * eps * eta * eta
    return eta * (1 + eps * eps) / den, eps * (1 + eta * eta) / den


@pytest.mark.parametrize("eps,eta", [(0.3, 0.2), (0.25, -0.5), (1.5, 0.125)])
def test_param_map_against_rational_arithmetic(eps, eta):
    alpha, beta, _ = param_map(eps, eta)
    a_ref, b_ref = _exact_param_map(eps, eta)
    assert alpha == pytest.approx(float(a_ref), rel=1e-15)
    assert beta == pytest.approx(float(b_ref), rel=1e-15)


def test_param_map_spot_values():
    assert param_map(0.0, 0.37, 0.2 + 0.1j) == (0.37, 0.0, 0.2 + 0.1j)
    a, b, _ = param_map(0.41, 0.0)
    assert (a, b) == (0.0, 0.41)
    a, b, _ = param_map(0.5, 0.5)
    assert abs(a - 2 / 3) <= 1e-15 and abs(b - 2 / 3) <= 1e-15
    _, _, z = param_map(0.3, 0.2, -0.2j)
    assert z == pytest.approx((-0.2j + 0.3j) / (1 + 0.3 * 0.2))


def test_param_map_rejects_bad_domain():
    with pytest.raises(ParameterError):
        param_map(2.0, 0.5)
    with pytest.raises(ParameterError):
        param_map(0.5, 0.3, 2j)


def test_transport_of_zero_connection_is_identity(su2):
    z = np.zeros((6, 8, 3), dtype=complex)
    ext = transport_extended(su2, z, z, 0.1, 0.1)
    np.testing.assert_array_equal(ext.l, np.broadcast_to(np.eye(2), (6, 8, 2, 2)))


def test_transport_abelian_closed_form(su3):
    # L_tau = d_tau phi c and L_sigma = d_sigma phi c with c in the Cartan algebra:
    # l = exp(-(phi - phi(0, 0)) c)
    c = np.zeros(8, dtype=complex)
    c[:2] = [0.6 + 0.2j, -0.4]
    T, N = 81, 257
    tau = np.linspace(0, 1, T)[:, None]
    sig = np.linspace(0, 2 * np.pi, N)[None, :]
    phi = np.sin(sig) * np.cos(tau) + 0.3 * tau
    phi_t = -np.sin(sig) * np.sin(tau) + 0.3
    phi_s = np.cos(sig) * np.cos(tau)
    lp = 0.5 * (phi_t + phi_s)[..., None] * c
    lm = 0.5 * (phi_t - phi_s)[..., None] * c
    ext = transport_extended(su3, lp, lm, tau[1, 0], sig[0, 1])
    cm = su3.to_matrix(c)
    exact = np.array([[scipy.linalg.expm(-(p - phi[0, 0]) * cm) for p in row] for row in phi])
    assert np.max(np.abs(ext.l - exact)) < 1e-8


def test_transport_paths_agree_on_flat_connection(pcm_lattice):
    pcm, lat = pcm_lattice
    lp, lm = zm_lax(lat.a_plus, lat.a_minus, 0.3j)
    a = transport_extended(pcm.basis, lp, lm, lat.dtau, lat.dsigma)
    b = transport_extended(pcm.basis, lp, lm, lat.dtau, lat.dsigma, path="tau-first")
    assert np.max(np.abs(a.l - b.l)) < 1e-3
    with pytest.raises(ValueError):
        transport_extended(pcm.basis, lp, lm, lat.dtau, lat.dsigma, path="diagonal")


def test_transport_rejects_traceful_connection(su2):
    lp = np.zeros((5, 5, 3), dtype=complex)
    bad = np.broadcast_to(np.eye(2), (5, 5, 2, 2))

    class Fake:
        def to_matrix(self, c):
            return 5.0 * bad
    with pytest.raises(TransportError):
        transport_extended(Fake(), lp, lp, 0.1, 0.1)


def test_zeta_zero_reproduces_solution(pcm_lattice):
    pcm, lat = pcm_lattice
    lp, lm = zm_lax(lat.a_plus, lat.a_minus, 0.0)
    ext = transport_extended(pcm.basis, lp, lm, lat.dtau, lat.dsigma)
    expected = np.linalg.inv(lat.g[0, 0]) @ lat.g
    assert np.max(np.abs(ext.l - expected)) < 1e-3


def test_iwasawa_tangent_on_analytic_curve(su3, rng):
    # l(s) = exp(s Z) solves l^-1 dl/ds = Z, i.e. L = -Z
    z = 0.4 * (rng.normal(size=8) + 1j * rng.normal(size=8))
    s = np.linspace(0, 1, 41)
    h = s[1] - s[0]
    l = np.array([scipy.linalg.expm(t * su3.to_matrix(z)) for t in s])
    b, u = iwasawa(l)
    L = -np.broadcast_to(z, (41, 8))
    xi, omega, defect = iwasawa_tangent(su3, b, u, L)
    assert defect < 1e-13
    db = central_difference(b, h, order=8)
    du = central_difference(u, h, order=8)
    xi_fd = su3.coefficients(np.linalg.solve(b[4:-4], db))
    omega_fd = su3.coefficients(du @ np.conj(np.swapaxes(u[4:-4], 1, 2)))
    np.testing.assert_allclose(xi[4:-4], xi_fd, atol=1e-8)
    np.testing.assert_allclose(omega[4:-4], omega_fd.real, atol=1e-8)


def test_pcm_to_yb_stage(pcm_lattice):
    pcm, lat = pcm_lattice
    res = pcm_to_yb(pcm, lat, 0.3)
    assert res.output.params == ModelParams(0.3, 0.0)
    assert an_defect(res.b) < 1e-12
    assert unitarity_defect(res.output.g) < 1e-12
    checks = verify_pcm_to_yb(pcm, res)
    assert checks["dd_vs_projection"] < 1e-12
    assert checks["por"] < 5e-3
    assert checks["lie_an_membership"] < 1e-12
    inp = output_residuals(pcm, SolutionLattice(lat.taus, lat.sigmas, lat.g, lat.a_plus,
                                                lat.a_minus, lat.params))
    out = output_residuals(pcm, res.output)
    assert max(out) <= 5 * max(inp)


def test_pcm_to_yb_zero_epsilon_is_identity_up_to_constant(pcm_lattice):
    pcm, lat = pcm_lattice
    res = pcm_to_yb(pcm, lat, 0.0)
    expected = np.linalg.inv(lat.g[0, 0]) @ lat.g
    assert np.max(np.abs(res.output.g - expected)) < 1e-3
    np.testing.assert_allclose(res.b, np.broadcast_to(np.eye(2), res.b.shape), atol=1e-3)
    assert verify_pcm_to_yb(pcm, res)["dd_vs_projection"] is None


def test_pcm_to_yb_rejects_deformed_input(pcm_lattice):
    pcm, lat = pcm_lattice
    bad = SolutionLattice(lat.taus, lat.sigmas, lat.g, lat.a_plus, lat.a_minus,
                          ModelParams(0.1, 0.0))
    with pytest.raises(ParameterError):
        pcm_to_yb(pcm, bad, 0.3)


def test_yb_to_biyb_stage(pcm_lattice):
    pcm, lat = pcm_lattice
    stage1 = pcm_to_yb(pcm, lat, 0.3)
    source = stage1.output.inverted(pcm.basis)
    assert source.params == ModelParams(0.0, 0.3)
    res = yb_to_biyb(pcm, source, 0.3, 0.2)
    alpha, beta, _ = param_map(0.3, 0.2)
    assert res.output.params == ModelParams(alpha, beta)
    checks = verify_yb_to_biyb(pcm, res)
    assert checks["ddd_vs_projection"] < 1e-12
    assert checks["final"] < 5e-3
    with pytest.raises(ParameterError):
        yb_to_biyb(pcm, stage1.output, 0.3, 0.2)


def test_yb_to_biyb_zero_eta_returns_input(pcm_lattice):
    pcm, lat = pcm_lattice
    source = pcm_to_yb(pcm, lat, 0.3).output.inverted(pcm.basis)
    res = yb_to_biyb(pcm, source, 0.3, 0.0)
    expected = np.linalg.inv(source.g[0, 0]) @ source.g
    assert np.max(np.abs(res.output.g - expected)) < 1e-3


def test_d_form_cascade_is_not_a_solution(pcm_lattice):
    pcm, lat = pcm_lattice
    stage1 = pcm_to_yb(pcm, lat, 0.3)
    res = yb_to_biyb(pcm, stage1.output, 0.3, 0.3, lax_form="D")
    checks = verify_yb_to_biyb(pcm, res)
    assert checks["ddd_vs_projection"] > 1e-2
    assert checks["final"] > 1e-2
    with pytest.raises(ValueError):
        yb_to_biyb(pcm, stage1.output, 0.3, 0.3, lax_form="X")


def test_lattice_inversion_is_an_involution(pcm_lattice):
    pcm, lat = pcm_lattice
    twice = lat.inverted(pcm.basis).inverted(pcm.basis)
    np.testing.assert_allclose(twice.g, lat.g, atol=1e-13)
    np.testing.assert_allclose(twice.a_plus, lat.a_plus, atol=1e-12)
    assert twice.params == lat.params


def test_monodromy_of_vacuum_is_identity(model2):
    ws = Worldsheet(n_sigma=16)
    state = FieldState(0.0, np.broadcast_to(np.eye(2), (16, 2, 2)), np.zeros((16, 3)),
                       np.zeros((16, 3)))
    np.testing.assert_allclose(monodromy(model2, state, ws, 0.5j), np.eye(2), atol=1e-15)


def test_monodromy_abelian_closed_form(model2):
    # Cartan-valued currents commute, so M = exp(-integral of L_sigma)
    N, L = 32, 2 * np.pi
    s = L * np.arange(N) / N
    jp = np.zeros((N, 3))
    jm = np.zeros((N, 3))
    jp[:, 0] = 0.5 + 0.3 * np.cos(s) + 0.2 * np.sin(3 * s)
    jm[:, 0] = -0.2 + 0.4 * np.sin(2 * s)
    zeta = 0.3 + 0.5j
    lax = bi_yb_lax(model2, jp, jm, zeta)
    integral = np.mean(lax.L_plus - lax.L_minus, axis=0) * L
    expected = scipy.linalg.expm(-model2.basis.to_matrix(integral))
    coarse = monodromy_matrices(model2, jp, jm, L, [zeta], substeps=2)[0]
    fine = monodromy_matrices(model2, jp, jm, L, [zeta], substeps=16)[0]
    np.testing.assert_allclose(fine, expected, atol=1e-11)
    # fourth-order subinterval transport: 8x finer steps, ~4096x smaller error
    assert np.max(np.abs(coarse - expected)) / np.max(np.abs(fine - expected)) > 1000


def test_monodromy_trace_independent_of_base_point(model2):
    ws = Worldsheet(n_sigma=64)
    s = model2.initial_state(ws, InitialData(amplitude=0.6))
    shifted = FieldState(0.0, s.g, np.roll(s.J_plus, 17, axis=0), np.roll(s.J_minus, 17, axis=0))
    for z in (0.5j, 2.0 - 0.4j):
        a = np.trace(monodromy(model2, s, ws, z))
        b = np.trace(monodromy(model2, shifted, ws, z))
        assert abs(a - b) < 1e-10


def test_trace_drift_static_and_perturbed(model2, tmp_path):
    ws = Worldsheet(n_sigma=64)
    traj = model2.evolve(model2.initial_state(ws, InitialData(amplitude=1.0)), ws, 0.5)
    zetas = [0.5j, 2.0 + 0.1j]
    good = conserved_trace_drift(model2, traj, zetas)
    bad = conserved_trace_drift(model2, traj, zetas, imag_shift=3.0)
    assert good["traces"].shape == (len(traj), 2)
    assert np.all(good["drift"] < 1e-4)
    assert np.all(bad["drift"] > 1e-3)
    write_trace_csv(tmp_path / "t.csv", good)
    with open(tmp_path / "t.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["tau", "re_zeta", "im_zeta", "re_trace", "im_trace"]
    assert len(rows) == 1 + 2 * len(traj)

    vac = FieldState(0.0, np.broadcast_to(random_special_unitary(2, np.random.default_rng(0)),
                                          (64, 2, 2)).copy(), np.zeros((64, 3)), np.zeros((64, 3)))
    static = model2.evolve(vac, ws, 0.3)
    assert np.all(conserved_trace_drift(model2, static, zetas)["drift"] == 0)


def test_cascade_report_layout():
    doc = json.loads(cascade_report(0.3, 0.2, {"n_sigma": 32},
                                    {"por": 1e-5, "final": 2e-5, "ddd_vs_inversion": 1e-15},
                                    {"input": 1e-4, "output": 2e-4}, config_hash="abc"))
    assert doc["identity_residuals"] == {"por": 1e-5, "final": 2e-5, "ddd_vs_inversion": 1e-15}
    assert doc["eom_residuals"] == {"input": 1e-4, "output": 2e-4}
    assert doc["alpha"] == pytest.approx(param_map(0.3, 0.2)[0])
    assert doc["config_hash"] == "abc" and doc["version"] == 1
