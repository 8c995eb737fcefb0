import json

import numpy as np
import pytest

import dissipacert as dc


def passive_scenario(T=30, seed=7):
    sc = dc.generate_scenario(2, 1, 1, T, seed=seed)
    assert sc["rank_ok"]
    return sc


def test_version_and_tolerances():
    assert dc.__version__
    tol = dc.Tolerances()
    assert tol.eps_psd > 0
    tol.eps_psd = -1.0
    with pytest.raises(dc.SpecError):
        tol.validate()


def test_symmetric_primitives():
    a = np.diag([2.0, -1.0, 0.0])
    assert dc.inertia(a) == (1, 1, 1)
    np.testing.assert_allclose(dc.eigenvalues(a), [-1.0, 0.0, 2.0])
    assert dc.is_psd(np.eye(2)) and not dc.is_pd(np.zeros((2, 2)))


def test_supply_rates():
    br = dc.SupplyRate.bounded_real(2.0, 1, 1)
    np.testing.assert_allclose(br.S, np.diag([4.0, -1.0]))
    assert br.evaluate(np.array([1.0]), np.array([1.0])) == pytest.approx(3.0)
    with pytest.raises(dc.AssumptionError):
        dc.SupplyRate(np.eye(2), 1, 1)


def test_noiseless_informativity_matches_hinf_norm():
    sc = passive_scenario()
    sys = sc["system"]
    gamma = dc.hinf_norm(sys)
    data = sc["data"]
    assert dc.rank_condition(data)
    assert dc.rank_report(data).rank == 3

    above = dc.informativity(data, dc.N0(), dc.SupplyRate.bounded_real(1.05 * gamma, 1, 1))
    assert above["status"] == "Informative"
    P = above["P"]
    assert np.all(np.linalg.eigvalsh(P) > 0)
    L = dc.dissipation_lmi_matrix(sys, dc.SupplyRate.bounded_real(1.05 * gamma, 1, 1), P)
    assert np.linalg.eigvalsh(L).min() > -1e-9

    below = dc.informativity(data, dc.N0(), dc.SupplyRate.bounded_real(0.95 * gamma, 1, 1))
    assert below["status"] == "NotInformative"


def test_identification_recovers_system():
    sc = passive_scenario()
    sys = sc["system"]
    ident = dc.identify(sc["data"])
    np.testing.assert_allclose(ident.stacked(), sys.stacked(), atol=1e-8)


def test_simulate_shapes():
    sys = dc.random_stable_sys(3, 2, 1, seed=1)
    U = np.ones((2, 5))
    data = dc.simulate(sys, U, np.zeros(3))
    assert (data.n, data.m, data.p, data.T) == (3, 2, 1, 5)
    assert data.X.shape == (3, 6)


def test_noise_conversion_round_trip():
    phi = dc.energy_bound(0.01 * np.eye(3), 20)
    n2 = dc.convert_noise(phi)
    back = dc.convert_noise(n2)
    np.testing.assert_allclose(back.Phi, phi.Phi, atol=1e-10)


def test_csv_round_trip():
    sc = passive_scenario(T=8)
    text = dc.format_data_csv(sc["data"])
    again = dc.parse_data_csv(text)
    np.testing.assert_array_equal(again.X, sc["data"].X)
    with pytest.raises(dc.ParseError):
        dc.parse_data_csv("not,a,record\n")


def test_check_and_verify_files(tmp_path):
    config = {"n": 2, "m": 1, "p": 1, "T": 40, "seed": 11,
              "noise": {"type": "energy", "bound": 1e-4},
              "supply": {"type": "bounded_real", "gamma_factor": 1.5}}
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(config))
    code, _ = dc.generate(str(cfg), str(tmp_path))
    assert code == 0
    files = [str(tmp_path / f) for f in ("data.csv", "supply.json", "noise.json")]
    cert = str(tmp_path / "certificate.json")
    code, msg = dc.check(*files, cert)
    assert code in (0, 1, 2), msg
    vcode, vmsg = dc.verify(cert, *files)
    if code == 0:
        assert vcode == 0, vmsg
    doc = json.loads((tmp_path / "certificate.json").read_text())
    assert doc["format"] == "dissipacert-certificate"
