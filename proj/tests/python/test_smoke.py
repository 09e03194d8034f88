import math
import os
from pathlib import Path

import numpy as np
import pytest

import hybridsim as hs

SCENARIOS = Path(os.environ.get("HYBRIDSIM_SCENARIO_DIR", Path(__file__).resolve().parents[2] / "scenarios"))

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def test_grid_coordinates():
    g = hs.PhaseGrid.square(4.0, 16)
    assert g.n_x == 16 and g.n_p == 16
    assert g.x[0] == -4.0
    assert g.dx == pytest.approx(0.5)
    assert np.allclose(np.diff(g.p), 0.5)


def test_kick_generator_terms():
    a = np.diag([8.0, 16.0]).astype(complex)
    terms = hs.compile_terms(2, [(0, 1, a)])
    keyed = {(t["side"], t["dx"], t["dp"]): t for t in terms}
    assert len(terms) == 6
    assert keyed[("left", 0, 0)]["coeff"] == {(0, 1): -1j}
    assert keyed[("right", 0, 0)]["coeff"] == {(0, 1): 1j}
    assert keyed[("left", 1, 0)]["coeff"] == {(0, 0): -0.5}
    assert keyed[("right", 0, 1)]["coeff"] == {(0, 0): 0.5j}
    assert np.array_equal(keyed[("left", 0, 1)]["op"], a)
    assert "left" in hs.dump_terms(2, [(0, 1, a)])


def test_constant_hamiltonian_matches_exponential():
    g = hs.PhaseGrid.square(8.0, 32)
    rho_q = np.array([[1, 0], [0, 0]], dtype=complex)
    h = 0.7 * SX + 0.3 * SZ
    field = hs.product_state(rho_q, g)
    out, diag = hs.evolve(field, g, [(0, 0, h)], 1.0, 0.01)
    w = math.hypot(0.7, 0.3)
    u = math.cos(w) * np.eye(2) - 1j * math.sin(w) * h / w
    expected = u @ rho_q @ u.conj().T
    assert np.abs(hs.quantum_marginal(out, g) - expected).max() < 1e-8
    assert diag["drift_per_time"] < 1e-6
    assert diag["max_hermiticity_defect"] < 1e-12


def test_measurement_masses():
    g = hs.PhaseGrid(-16.0, 48.0, 128, -16.0, 16.0, 128)
    rho_q = np.diag([0.5, 0.3, 0.2]).astype(complex)
    report, field = hs.measure(rho_q, 8.0, g)
    masses = sorted((o["label"], o["path_mass"]) for o in report["outcomes"])
    assert [m for _, m in masses] == pytest.approx([0.5, 0.3, 0.2], abs=1e-9)
    assert field.shape == (128, 128, 3, 3)


def test_husimi_roundtrip_and_vacuum_values():
    g = hs.PhaseGrid.square(10.0, 64)
    rho = np.zeros((12, 12), dtype=complex)
    rho[0, 0] = 1.0
    q = hs.dequantize(rho, 12, g)
    xx, pp = np.meshgrid(g.x, g.p, indexing="ij")
    oracle = np.exp(-(xx**2 + pp**2) / 2) / (2 * math.pi)
    assert np.abs(q[:, :, 0, 0] - oracle).max() < 1e-12
    back, residual = hs.quantize(q, g, 12)
    assert np.abs(back - rho).max() < 1e-6
    assert residual < 1e-10


def test_errors_map_to_python_exceptions():
    g = hs.PhaseGrid.square(8.0, 16)
    with pytest.raises(hs.InvariantError):
        hs.product_state(np.array([[1, 1], [0, 0]], dtype=complex), g)
    assert issubclass(hs.ConfigError, hs.Error)
    with pytest.raises(hs.ConfigError):
        hs.validate_scenario(SCENARIOS / "quantum_qubit.yaml", ["grid=7"])


def test_shipped_scenario_runs():
    report, files = hs.run_scenario(SCENARIOS / "quantum_qubit.yaml", ["evolve.t_final=0.1"])
    assert set(files) == {"report.json", "marginal.csv"}
    assert report["conservation"]["drift_per_time"] < 1e-6
    checks = hs.validate_scenario(SCENARIOS / "measurement_qubit.yaml")
    assert checks["checks"]
