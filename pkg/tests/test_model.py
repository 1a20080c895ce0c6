"""Parameters, manufactured cases, and their data terms.

Two oracle layers: a finite-difference audit validates every analytic
derivative, and a symbolic rederivation (sympy, built straight from the
stress definitions, sharing no code with the package) validates the
hand-assembled body forces, mass sources, and interface data of the smooth
case.  The piecewise-linear case is checked against its hand-computed
constants.
"""

import numpy as np
import pytest
import sympy as sp

from stokesbiot.model import (
    ConfigError,
    PhysicalParams,
    audit_case,
    builtin_case,
    load_parameter_file,
    write_parameter_file,
)


# -- parameters ------------------------------------------------------------


def test_default_params_valid():
    p = PhysicalParams()
    assert np.allclose(p.K, np.eye(2))
    assert np.allclose(p.Kinv, np.eye(2))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"mu": 0.0},
        {"mu_p": -1.0},
        {"lambda_p": -0.1},
        {"s0": -1e-3},
        {"alpha": 1.5},
        {"alpha": -0.2},
        {"alpha_bjs": -1.0},
        {"k11": -1.0},
        {"k11": 1.0, "k22": 1.0, "k12": 1.5},  # indefinite
    ],
)
def test_invalid_params_rejected(kwargs):
    with pytest.raises(ConfigError):
        PhysicalParams(**kwargs)


def test_kinv_is_inverse():
    p = PhysicalParams(k11=2.0, k12=0.3, k22=1.1)
    assert np.allclose(p.K @ p.Kinv, np.eye(2), atol=1e-14)


def test_bjs_coefficient():
    p = PhysicalParams(mu=2.0, alpha_bjs=0.5, k11=1.0, k12=0.2, k22=1.5)
    assert p.bjs_coefficient([1.0, 0.0]) == pytest.approx(2.0 * 0.5 / 1.0)
    assert p.bjs_coefficient([0.0, 1.0]) == pytest.approx(1.0 / np.sqrt(1.5))


# -- the piecewise-linear coupled case -------------------------------------


def test_poly_case_constants():
    case = builtin_case("poly")
    rng = np.random.default_rng(0)
    x, y = rng.random(50), rng.random(50)
    t = rng.random(50)
    assert np.allclose(case.f_f(x, y, t), [0.0, 0.8])
    assert np.allclose(case.q_f(x, y, t), 1.2)
    assert np.allclose(case.f_p(x, y, t), 0.0)
    assert np.allclose(case.q_p(x, y, t), 7.0 / 15.0)
    assert np.allclose(case.up(x, y, t), 0.0)


def test_poly_case_interface_residuals_vanish():
    case = builtin_case("poly")
    rng = np.random.default_rng(1)
    x = rng.random(40)
    y = np.full_like(x, case.y_interface)
    t = rng.random(40)
    assert np.allclose(case.g1(x, y, t), 0.0, atol=1e-14)
    assert np.allclose(case.g2(x, y, t), 0.0, atol=1e-14)
    assert np.allclose(case.g3(x, y, t), 0.0, atol=1e-14)
    assert np.allclose(case.g4(x, y, t), 0.0, atol=1e-14)
    assert np.allclose(case.lam(x, y, t), 0.6, atol=1e-14)


def test_poly_case_velocity_continuity_normal():
    # normal components of fluid velocity and skeleton velocity plus
    # filtration velocity match on the interface (zero g1)
    case = builtin_case("poly")
    x = np.linspace(0, 1, 7)
    y = np.full_like(x, 0.5)
    uf2 = case.uf.y.d(x, y, 0.3)
    deta2 = case.eta.y.d(x, y, 0.3, nt=1)
    assert np.allclose(uf2, deta2, atol=1e-14)


def test_darcy_law_holds_by_construction():
    case = builtin_case("mms")
    rng = np.random.default_rng(2)
    x, y, t = rng.random(20), rng.random(20), rng.random(20)
    h = 1e-6
    gpx = (case.pp.d(x + h, y, t) - case.pp.d(x - h, y, t)) / (2 * h)
    gpy = (case.pp.d(x, y + h, t) - case.pp.d(x, y - h, t)) / (2 * h)
    K, mu = case.params.K, case.params.mu
    want = -np.stack(
        [K[0, 0] * gpx + K[0, 1] * gpy, K[1, 0] * gpx + K[1, 1] * gpy], axis=-1
    ) / mu
    assert np.allclose(case.up(x, y, t), want, atol=1e-7)


# -- finite-difference audits ----------------------------------------------


@pytest.mark.parametrize("name", ["poly", "mms", "layer"])
def test_audit_passes(name):
    worst = audit_case(builtin_case(name))
    assert worst < 2e-5


# -- symbolic rederivation oracle ------------------------------------------


def test_mms_data_against_symbolic_rederivation():
    case = builtin_case("mms")
    x, y, t = sp.symbols("x y t")
    E = sp.exp(sp.Rational(7, 10) * t)
    pi = sp.pi
    uf = sp.Matrix(
        [E * sp.sin(pi * x) * sp.cos(pi * y), E * sp.cos(pi * x) * sp.sin(pi * y)]
    )
    pf = E * (sp.cos(pi * x) + sp.Rational(1, 2) * sp.sin(pi * y))
    pp = E * sp.cos(pi * x) * sp.cos(pi * y)
    eta = sp.Matrix(
        [
            sp.Rational(1, 4) * E * sp.sin(pi * x) * sp.sin(pi * y),
            sp.Rational(1, 4) * E * sp.cos(pi * x) * sp.cos(2 * pi * y),
        ]
    )
    K = sp.Matrix([[1, sp.Rational(1, 5)], [sp.Rational(1, 5), sp.Rational(3, 2)]])
    mu, lam_p, mu_p = 1, 1, 1
    alpha = sp.Rational(9, 10)
    s0 = sp.Rational(1, 2)
    abjs = 1

    def sym_grad(u):
        J = u.jacobian([x, y])
        return (J + J.T) / 2

    def tensor_div(M):
        return sp.Matrix(
            [
                sp.diff(M[0, 0], x) + sp.diff(M[0, 1], y),
                sp.diff(M[1, 0], x) + sp.diff(M[1, 1], y),
            ]
        )

    sig_f = -pf * sp.eye(2) + 2 * mu * sym_grad(uf)
    f_f = -tensor_div(sig_f)
    q_f = sp.diff(uf[0], x) + sp.diff(uf[1], y)
    div_eta = sp.diff(eta[0], x) + sp.diff(eta[1], y)
    sig_p = (
        lam_p * div_eta * sp.eye(2)
        + 2 * mu_p * sym_grad(eta)
        - alpha * pp * sp.eye(2)
    )
    f_p = -tensor_div(sig_p)
    up = -(K / mu) * sp.Matrix([sp.diff(pp, x), sp.diff(pp, y)])
    q_p = (
        s0 * sp.diff(pp, t)
        + alpha * sp.diff(div_eta, t)
        + sp.diff(up[0], x)
        + sp.diff(up[1], y)
    )
    nf = sp.Matrix([0, -1])
    npv = sp.Matrix([0, 1])
    tau = sp.Matrix([1, 0])
    tf = sig_f * nf
    tp = sig_p * npv
    lam_ex = -(tf.T * nf)[0]
    g1 = (uf.T * nf)[0] + ((sp.diff(eta, t) + up).T * npv)[0]
    g2 = pp + (tf.T * nf)[0]
    g3 = tf + tp
    kt = (tau.T * K * tau)[0]
    g4 = (tf.T * tau)[0] + mu * abjs / sp.sqrt(kt) * (
        (uf - sp.diff(eta, t)).T * tau
    )[0]

    pts = [(0.3, 0.7, 0.2), (0.62, 0.5, 0.9), (0.11, 0.5, 0.0), (0.85, 0.24, 1.3)]
    for xv, yv, tv in pts:
        s = {x: xv, y: yv, t: tv}
        num = lambda e: float(e.subs(s).evalf(30))
        assert case.f_f(xv, yv, tv) == pytest.approx(
            [num(f_f[0]), num(f_f[1])], rel=1e-11, abs=1e-12
        )
        assert case.q_f(xv, yv, tv) == pytest.approx(num(q_f), rel=1e-11)
        assert case.f_p(xv, yv, tv) == pytest.approx(
            [num(f_p[0]), num(f_p[1])], rel=1e-11, abs=1e-12
        )
        assert case.q_p(xv, yv, tv) == pytest.approx(num(q_p), rel=1e-11)
        assert case.up(xv, yv, tv) == pytest.approx(
            [num(up[0]), num(up[1])], rel=1e-11, abs=1e-12
        )
        assert case.lam(xv, yv, tv) == pytest.approx(num(lam_ex), rel=1e-11)
        assert case.g1(xv, yv, tv) == pytest.approx(num(g1), rel=1e-11, abs=1e-12)
        assert case.g2(xv, yv, tv) == pytest.approx(num(g2), rel=1e-11, abs=1e-12)
        assert case.g3(xv, yv, tv) == pytest.approx(
            [num(g3[0]), num(g3[1])], rel=1e-11, abs=1e-12
        )
        assert case.g4(xv, yv, tv) == pytest.approx(num(g4), rel=1e-11, abs=1e-12)


def test_unknown_case_rejected():
    with pytest.raises(ConfigError):
        builtin_case("nope")


# -- parameter files -------------------------------------------------------


def test_parameter_file_roundtrip(tmp_path):
    p = PhysicalParams(mu=0.01, k11=1e-6, k22=2e-6, lambda_p=1e5, mu_p=1e5, s0=1e-4)
    path = tmp_path / "params.txt"
    write_parameter_file(path, p, extras={"T": 0.5, "dt": 0.01, "case": "mms"})
    back, extras = load_parameter_file(path)
    assert back == p
    assert extras["T"] == 0.5
    assert extras["dt"] == 0.01
    assert extras["case"] == "mms"


def test_parameter_file_comments_and_spacing(tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("# header\nmu = 2.0  # viscosity\n\n  s0=0.1\nT=1.0\n")
    params, extras = load_parameter_file(path)
    assert params.mu == 2.0
    assert params.s0 == 0.1
    assert extras == {"T": 1.0}


@pytest.mark.parametrize(
    "text",
    [
        "mu\n",  # no equals
        "mu = abc\n",  # non-numeric material value
        "mu = 1\nmu = 2\n",  # duplicate
        "3bad = 1\n",  # bad key
        "mu = -1\n",  # invalid value
    ],
)
def test_parameter_file_errors(tmp_path, text):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_parameter_file(path)
