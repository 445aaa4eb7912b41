import numpy as np
import pytest

from pauli_shaping import noise, paulis, ptm
from pauli_shaping.errors import DimensionError, UnsupportedError, ValidationError


@pytest.mark.parametrize("eps", [0.0, 0.01, 0.1, 0.3, 0.49])
@pytest.mark.parametrize("theta", [0.2, 0.4, 1.0])
def test_lindblad_matches_closed_form(theta, eps):
    a = noise.lindblad_example_ptm(theta, eps)
    b = noise.lindblad_example_closed_form(theta, eps)
    assert np.abs(a.m - b.m).max() < 1e-9
    assert ptm.is_cptp(a).cptp


def test_lindblad_factorization():
    e = 0.07
    u = ptm.rzz_ptm(0.4).m
    n = noise.lindblad_example_noise(e).m
    g = noise.lindblad_example_closed_form(0.4, e).m
    assert np.allclose(u @ n, g) and np.allclose(n @ u, g)


def test_lindblad_eps_range():
    with pytest.raises(ValidationError):
        noise.LindbladExample(0.4, 0.5)


def test_over_rotation_and_pauli_noise():
    g = noise.build_gate_ptm(noise.OverRotation(0.4, 0.05))
    assert g.allclose(ptm.rzz_ptm(0.45), 1e-12)
    p = np.zeros(16)
    p[0], p[1] = 0.9, 0.1
    after = noise.build_gate_ptm(noise.PauliNoiseAfter(0.4, p)).m
    before = noise.build_gate_ptm(noise.PauliNoiseBefore(0.4, p)).m
    f = paulis.walsh_matrix(2) @ p
    assert np.allclose(after, np.diag(f) @ ptm.rzz_ptm(0.4).m)
    assert np.allclose(before, ptm.rzz_ptm(0.4).m @ np.diag(f))


@pytest.mark.parametrize("spec", [
    noise.OverRotation(0.4, 0.01),
    noise.LindbladExample(0.4, 0.05),
    noise.PauliNoiseAfter(0.3, np.r_[0.97, np.full(15, 0.002)]),
])
def test_spec_json_round_trip(spec):
    again = noise.noise_spec_from_json(noise.noise_spec_to_json(spec))
    assert noise.build_gate_ptm(again).allclose(noise.build_gate_ptm(spec), 0)


def test_unknown_kind():
    with pytest.raises(UnsupportedError):
        noise.noise_spec_from_json({"kind": "amplitude_damping", "theta": 0.1})


def test_readout_bias_product_form():
    spam = noise.SpamModel.from_flips([0.02, 0.05], [0.03, 0.01])
    m = noise.readout_bias(spam)
    # single-qubit bias is 1 - p01 - p10, and product for ZZ
    assert np.isclose(m[0b10], 1 - 0.05)
    assert np.isclose(m[0b01], 1 - 0.06)
    assert np.isclose(m[0b11], 0.95 * 0.94)
    assert noise.readout_bias_for(spam, "ZZ") == pytest.approx(0.95 * 0.94)
    assert noise.support_mask("XI") == 0b10


def test_spam_prepare_and_validation():
    spam = noise.SpamModel.symmetric(2, 0.0, 0.9)
    s = spam.prepare(ptm.pauli_eigenstate("ZZ"))
    assert s[0] == 1 and np.isclose(s[paulis.index_of("ZZ")], 0.9)
    with pytest.raises(ValidationError):
        noise.SpamModel(2, 1.2)
    with pytest.raises(DimensionError):
        noise.SpamModel(2, 1.0, np.eye(2))
