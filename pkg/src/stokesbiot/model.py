"""Physical parameters, manufactured solutions, and problem data.

Exact solutions are built from sums of separable terms c * T(t) * X(x) * Y(y)
whose 1D factors carry their own derivatives, so every quantity the solver or
the estimator needs (body forces, mass sources, interface mismatch data,
boundary traces, error references) is produced analytically with no symbolic
dependency.  The interface is the horizontal line y = y_interface with the
fluid above; the fluid-side unit normal there is (0, -1) and the tangent is
(1, 0).

Data conventions.  Writing sigma_f for the fluid Cauchy stress and sigma_p
for the total poroelastic stress, the interface data are the residuals of the
four coupling conditions evaluated on the exact fields:

    g1 = u_f . n_f + (d/dt eta + u_p) . n_p          (mass conservation)
    g2 = p_p + (sigma_f n_f) . n_f                   (normal stress balance)
    g3 = sigma_f n_f + sigma_p n_p                   (vector stress balance)
    g4 = (sigma_f n_f) . tau
         + mu alpha_bjs / sqrt(tau . K tau) * (u_f - d/dt eta) . tau

For exactly coupled fields all four vanish; manufactured fields generally
leave nonzero g's, which enter the discrete right-hand side and are
subtracted from the corresponding estimator residuals.  The multiplier
approximates lambda = -(sigma_f n_f) . n_f = p_p - g2.
"""

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "ConfigError",
    "PhysicalParams",
    "ScalarField",
    "VectorField2",
    "SepTerm",
    "ManufacturedCase",
    "SourceData",
    "builtin_case",
    "BUILTIN_CASES",
    "load_parameter_file",
    "write_parameter_file",
    "audit_case",
]


class ConfigError(Exception):
    """Invalid parameter file or parameter values."""


@dataclass(frozen=True)
class PhysicalParams:
    """Material constants for the coupled system.

    k11, k12, k22 are the entries of the symmetric permeability tensor;
    lambda_p and mu_p the drained Lame constants; alpha the Biot-Willis
    coefficient; s0 the storage coefficient; alpha_bjs the slip-rate
    coefficient of the interface friction term.
    """

    mu: float = 1.0
    k11: float = 1.0
    k12: float = 0.0
    k22: float = 1.0
    lambda_p: float = 1.0
    mu_p: float = 1.0
    alpha: float = 1.0
    s0: float = 1.0
    alpha_bjs: float = 1.0

    def __post_init__(self):
        if self.mu <= 0:
            raise ConfigError("mu must be positive")
        if self.mu_p <= 0:
            raise ConfigError("mu_p must be positive")
        if self.lambda_p < 0:
            raise ConfigError("lambda_p must be nonnegative")
        if self.s0 < 0:
            raise ConfigError("s0 must be nonnegative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if self.alpha_bjs < 0:
            raise ConfigError("alpha_bjs must be nonnegative")
        if self.k11 <= 0 or self.k11 * self.k22 - self.k12**2 <= 0:
            raise ConfigError("permeability tensor must be positive definite")

    @property
    def K(self):
        return np.array([[self.k11, self.k12], [self.k12, self.k22]])

    @property
    def Kinv(self):
        det = self.k11 * self.k22 - self.k12**2
        return np.array([[self.k22, -self.k12], [-self.k12, self.k11]]) / det

    def bjs_coefficient(self, tau):
        """mu alpha_bjs / sqrt(tau . K tau) for a unit tangent tau."""
        tau = np.asarray(tau, dtype=float)
        kt = float(tau @ self.K @ tau)
        return self.mu * self.alpha_bjs / math.sqrt(kt)


# -- 1D profiles -----------------------------------------------------------
# A profile is a callable prof(s, order) returning the order-th derivative.


def const_profile(c):
    def prof(s, order=0):
        s = np.asarray(s, dtype=float)
        return np.full(s.shape, c) if order == 0 else np.zeros(s.shape)

    return prof


def poly_profile(*coeffs):
    """Polynomial c0 + c1 s + c2 s^2 + ..."""
    base = np.polynomial.Polynomial(coeffs)
    cache = {0: base}

    def prof(s, order=0):
        if order not in cache:
            cache[order] = base.deriv(order)
        return cache[order](np.asarray(s, dtype=float))

    return prof


def sin_profile(omega, phase=0.0, amp=1.0):
    def prof(s, order=0):
        s = np.asarray(s, dtype=float)
        return amp * omega**order * np.sin(omega * s + phase + order * np.pi / 2)

    return prof


def cos_profile(omega, amp=1.0):
    return sin_profile(omega, phase=np.pi / 2, amp=amp)


def exp_profile(kappa):
    def prof(s, order=0):
        return kappa**order * np.exp(kappa * np.asarray(s, dtype=float))

    return prof


def gauss_profile(center, width):
    """exp(-((s - center)/width)^2); derivatives up to second order."""

    def prof(s, order=0):
        z = (np.asarray(s, dtype=float) - center) / width
        g = np.exp(-(z**2))
        if order == 0:
            return g
        if order == 1:
            return -2.0 * z / width * g
        if order == 2:
            return (4.0 * z**2 - 2.0) / width**2 * g
        raise NotImplementedError("gauss profile derivatives stop at order 2")

    return prof


ONE = const_profile(1.0)


@dataclass(frozen=True)
class SepTerm:
    """One separable term c * T(t) * X(x) * Y(y)."""

    c: float
    T: object = ONE
    X: object = ONE
    Y: object = ONE


class ScalarField:
    """Sum of separable terms with analytic mixed derivatives."""

    def __init__(self, *terms):
        self.terms = tuple(terms)

    def d(self, x, y, t, nx=0, ny=0, nt=0):
        x, y, t = np.broadcast_arrays(
            np.asarray(x, dtype=float),
            np.asarray(y, dtype=float),
            np.asarray(t, dtype=float),
        )
        out = np.zeros(x.shape)
        for trm in self.terms:
            out += trm.c * trm.T(t, nt) * trm.X(x, nx) * trm.Y(y, ny)
        return out

    def __add__(self, other):
        return ScalarField(*(self.terms + other.terms))


ZERO_FIELD = ScalarField()


class VectorField2:
    """Pair of scalar fields treated as a 2D vector field."""

    def __init__(self, fx, fy):
        self.x = fx
        self.y = fy

    def d(self, x, y, t, nx=0, ny=0, nt=0):
        return np.stack(
            [self.x.d(x, y, t, nx, ny, nt), self.y.d(x, y, t, nx, ny, nt)],
            axis=-1,
        )

    def div(self, x, y, t, nt=0):
        return self.x.d(x, y, t, 1, 0, nt) + self.y.d(x, y, t, 0, 1, nt)

    def grad(self, x, y, t):
        """Jacobian with grad[i, j] = d u_i / d x_j, shape (..., 2, 2)."""
        gxx = self.x.d(x, y, t, 1, 0)
        gxy = self.x.d(x, y, t, 0, 1)
        gyx = self.y.d(x, y, t, 1, 0)
        gyy = self.y.d(x, y, t, 0, 1)
        return np.stack(
            [
                np.stack([gxx, gxy], axis=-1),
                np.stack([gyx, gyy], axis=-1),
            ],
            axis=-2,
        )


# -- problem data bundle ---------------------------------------------------


@dataclass
class SourceData:
    """Everything the assembler consumes: body forces, mass sources,
    interface data, boundary traces, and initial values.

    All callables take broadcastable (x, y, t) arrays; the Neumann flux
    additionally receives the outward normal components (nx, ny).  Any entry
    may be None, meaning identically zero.
    """

    f_f: object = None
    q_f: object = None
    f_p: object = None
    q_p: object = None
    g1: object = None
    g2: object = None
    g3: object = None
    g4: object = None
    bc_velocity: object = None  # on the exterior fluid boundary
    bc_pressure: object = None  # on the porous Dirichlet part
    bc_flux: object = None  # on the porous Neumann part, (x, y, t, nx, ny)
    bc_displacement: object = None  # on the whole exterior porous boundary
    pp_initial: object = None
    eta_initial: object = None


class ManufacturedCase:
    """Exact fields plus the data that makes them solve the coupled system.

    The Darcy velocity is always the one induced by the pressure through
    u_p = -(K/mu) grad p_p; there is no independent data slot in the Darcy
    row, so manufactured fields must satisfy that law exactly.
    """

    def __init__(self, name, params, uf, pf, pp, eta, y_interface=0.5):
        self.name = name
        self.params = params
        self.uf = uf
        self.pf = pf
        self.pp = pp
        self.eta = eta
        self.y_interface = y_interface
        # fluid-above orientation: fixed interface frame
        self.n_f = np.array([0.0, -1.0])
        self.n_p = np.array([0.0, 1.0])
        self.tau = np.array([1.0, 0.0])

    # Darcy velocity and its divergence from the pressure
    def up(self, x, y, t, nt=0):
        K, mu = self.params.K, self.params.mu
        px = self.pp.d(x, y, t, 1, 0, nt)
        py = self.pp.d(x, y, t, 0, 1, nt)
        return np.stack(
            [
                -(K[0, 0] * px + K[0, 1] * py) / mu,
                -(K[1, 0] * px + K[1, 1] * py) / mu,
            ],
            axis=-1,
        )

    def div_up(self, x, y, t):
        K, mu = self.params.K, self.params.mu
        return -(
            K[0, 0] * self.pp.d(x, y, t, 2, 0)
            + 2.0 * K[0, 1] * self.pp.d(x, y, t, 1, 1)
            + K[1, 1] * self.pp.d(x, y, t, 0, 2)
        ) / mu

    def f_f(self, x, y, t):
        mu = self.params.mu
        gpx = self.pf.d(x, y, t, 1, 0)
        gpy = self.pf.d(x, y, t, 0, 1)
        u1, u2 = self.uf.x, self.uf.y
        lap1 = u1.d(x, y, t, 2, 0) + u1.d(x, y, t, 0, 2)
        lap2 = u2.d(x, y, t, 2, 0) + u2.d(x, y, t, 0, 2)
        gd1 = u1.d(x, y, t, 2, 0) + u2.d(x, y, t, 1, 1)
        gd2 = u1.d(x, y, t, 1, 1) + u2.d(x, y, t, 0, 2)
        return np.stack(
            [gpx - mu * (lap1 + gd1), gpy - mu * (lap2 + gd2)], axis=-1
        )

    def q_f(self, x, y, t):
        return self.uf.div(x, y, t)

    def f_p(self, x, y, t):
        p = self.params
        e1, e2 = self.eta.x, self.eta.y
        gd1 = e1.d(x, y, t, 2, 0) + e2.d(x, y, t, 1, 1)
        gd2 = e1.d(x, y, t, 1, 1) + e2.d(x, y, t, 0, 2)
        lap1 = e1.d(x, y, t, 2, 0) + e1.d(x, y, t, 0, 2)
        lap2 = e2.d(x, y, t, 2, 0) + e2.d(x, y, t, 0, 2)
        return np.stack(
            [
                p.alpha * self.pp.d(x, y, t, 1, 0)
                - (p.lambda_p + p.mu_p) * gd1
                - p.mu_p * lap1,
                p.alpha * self.pp.d(x, y, t, 0, 1)
                - (p.lambda_p + p.mu_p) * gd2
                - p.mu_p * lap2,
            ],
            axis=-1,
        )

    def q_p(self, x, y, t):
        p = self.params
        return (
            p.s0 * self.pp.d(x, y, t, nt=1)
            + p.alpha * self.eta.div(x, y, t, nt=1)
            + self.div_up(x, y, t)
        )

    # interface traction components in the fixed frame
    def sig_f_nf(self, x, y, t):
        mu = self.params.mu
        shear = mu * (self.uf.x.d(x, y, t, 0, 1) + self.uf.y.d(x, y, t, 1, 0))
        normal = self.pf.d(x, y, t) - 2.0 * mu * self.uf.y.d(x, y, t, 0, 1)
        return np.stack([-shear, normal], axis=-1)

    def sig_p_np(self, x, y, t):
        p = self.params
        shear = p.mu_p * (
            self.eta.x.d(x, y, t, 0, 1) + self.eta.y.d(x, y, t, 1, 0)
        )
        normal = (
            p.lambda_p * self.eta.div(x, y, t)
            + 2.0 * p.mu_p * self.eta.y.d(x, y, t, 0, 1)
            - p.alpha * self.pp.d(x, y, t)
        )
        return np.stack([shear, normal], axis=-1)

    def lam(self, x, y, t):
        """Exact multiplier -(sigma_f n_f) . n_f on the interface line."""
        return -self.sig_f_nf(x, y, t)[..., 1] * self.n_f[1]

    def g1(self, x, y, t):
        return (
            -self.uf.y.d(x, y, t)
            + self.eta.y.d(x, y, t, nt=1)
            + self.up(x, y, t)[..., 1]
        )

    def g2(self, x, y, t):
        return self.pp.d(x, y, t) - self.lam(x, y, t)

    def g3(self, x, y, t):
        return self.sig_f_nf(x, y, t) + self.sig_p_np(x, y, t)

    def g4(self, x, y, t):
        c = self.params.bjs_coefficient(self.tau)
        slip = self.uf.x.d(x, y, t) - self.eta.x.d(x, y, t, nt=1)
        return self.sig_f_nf(x, y, t)[..., 0] + c * slip

    def source_data(self):
        return SourceData(
            f_f=self.f_f,
            q_f=self.q_f,
            f_p=self.f_p,
            q_p=self.q_p,
            g1=self.g1,
            g2=self.g2,
            g3=self.g3,
            g4=self.g4,
            bc_velocity=lambda x, y, t: self.uf.d(x, y, t),
            bc_pressure=lambda x, y, t: self.pp.d(x, y, t),
            bc_displacement=lambda x, y, t: self.eta.d(x, y, t),
            bc_flux=lambda x, y, t, nx, ny: np.einsum(
                "...d,...d->...",
                self.up(x, y, t),
                np.stack(np.broadcast_arrays(nx, ny), axis=-1).astype(float),
            ),
            pp_initial=lambda x, y: self.pp.d(x, y, 0.0),
            eta_initial=lambda x, y: self.eta.d(x, y, 0.0),
        )


# -- builtin cases ---------------------------------------------------------


def _poly_case():
    """Piecewise-linear-in-space, linear-in-time fields that couple exactly.

    The interface residuals g1..g4 are identically zero, every source term
    is piecewise constant, and the fields lie in the discrete spaces, so the
    backward-Euler solution reproduces them to solver precision on any mesh
    resolving the interface.  Requires alpha = 1 for the stress balance to
    close.
    """
    params = PhysicalParams(
        mu=1.0,
        k11=1.0,
        k12=0.0,
        k22=1.0,
        lambda_p=1.0,
        mu_p=1.0,
        alpha=1.0,
        s0=0.3,
        alpha_bjs=0.5,
    )
    gamma = 0.5
    a11, a12, a21 = 0.7, 0.4, -0.4
    a22 = -params.lambda_p * a11 / (params.lambda_p + 2.0 * params.mu_p)
    d1, d2 = 0.1, -0.2
    b11, b12, b21, b22 = 0.7, 0.4, -0.4, 0.5
    e1 = 0.1
    e2 = d2 + gamma * (a22 - b22)

    ramp = poly_profile(1.0, 1.0)  # 1 + t
    lin = lambda c0, cs: poly_profile(c0, cs)

    eta = VectorField2(
        ScalarField(
            SepTerm(1.0, T=ramp, X=lin(d1, a11)),
            SepTerm(1.0, T=ramp, Y=lin(0.0, a12)),
        ),
        ScalarField(
            SepTerm(1.0, T=ramp, X=lin(d2, a21)),
            SepTerm(1.0, T=ramp, Y=lin(0.0, a22)),
        ),
    )
    pp = ScalarField(SepTerm(0.6))
    uf = VectorField2(
        ScalarField(SepTerm(1.0, X=lin(e1, b11)), SepTerm(1.0, Y=lin(0.0, b12))),
        ScalarField(SepTerm(1.0, X=lin(e2, b21)), SepTerm(1.0, Y=lin(0.0, b22))),
    )
    pf = ScalarField(SepTerm(1.2), SepTerm(0.8, Y=poly_profile(0.0, 1.0)))
    return ManufacturedCase("poly", params, uf, pf, pp, eta, y_interface=gamma)


def _mms_case():
    """Smooth trigonometric fields exercising every data slot."""
    params = PhysicalParams(
        mu=1.0,
        k11=1.0,
        k12=0.2,
        k22=1.5,
        lambda_p=1.0,
        mu_p=1.0,
        alpha=0.9,
        s0=0.5,
        alpha_bjs=1.0,
    )
    E = exp_profile(0.7)
    pi = np.pi
    uf = VectorField2(
        ScalarField(SepTerm(1.0, T=E, X=sin_profile(pi), Y=cos_profile(pi))),
        ScalarField(SepTerm(1.0, T=E, X=cos_profile(pi), Y=sin_profile(pi))),
    )
    pf = ScalarField(
        SepTerm(1.0, T=E, X=cos_profile(pi)),
        SepTerm(0.5, T=E, Y=sin_profile(pi)),
    )
    pp = ScalarField(SepTerm(1.0, T=E, X=cos_profile(pi), Y=cos_profile(pi)))
    eta = VectorField2(
        ScalarField(SepTerm(0.25, T=E, X=sin_profile(pi), Y=sin_profile(pi))),
        ScalarField(SepTerm(0.25, T=E, X=cos_profile(pi), Y=cos_profile(2 * pi))),
    )
    return ManufacturedCase("mms", params, uf, pf, pp, eta)


def _layer_case(eps=0.045):
    """Fields with a Gaussian internal layer hugging the interface.

    Gradients of size 1/eps concentrate in a band of width eps around the
    interface, so adaptive refinement should outperform uniform refinement
    by a wide dof margin at equal accuracy.
    """
    params = PhysicalParams(
        mu=1.0,
        k11=1.0,
        k12=0.0,
        k22=1.0,
        lambda_p=1.0,
        mu_p=1.0,
        alpha=0.9,
        s0=0.5,
        alpha_bjs=1.0,
    )
    E = exp_profile(0.5)
    pi = np.pi
    L = gauss_profile(0.5, eps)
    uf = VectorField2(
        ScalarField(SepTerm(0.4, T=E, X=sin_profile(pi), Y=L)),
        ScalarField(SepTerm(0.3, T=E, X=cos_profile(pi), Y=L)),
    )
    pf = ScalarField(
        SepTerm(1.0, T=E, X=cos_profile(pi)),
        SepTerm(0.2, T=E, Y=poly_profile(0.0, 1.0)),
    )
    pp = ScalarField(SepTerm(1.0, T=E, X=cos_profile(pi), Y=L))
    eta = VectorField2(
        ScalarField(SepTerm(0.2, T=E, X=sin_profile(pi), Y=sin_profile(pi))),
        ScalarField(SepTerm(0.2, T=E, X=cos_profile(pi), Y=cos_profile(pi))),
    )
    return ManufacturedCase("layer", params, uf, pf, pp, eta)


BUILTIN_CASES = {
    "poly": _poly_case,
    "mms": _mms_case,
    "layer": _layer_case,
}


def builtin_case(name):
    try:
        return BUILTIN_CASES[name]()
    except KeyError:
        raise ConfigError(
            f"unknown case {name!r}; choose from {sorted(BUILTIN_CASES)}"
        ) from None


# -- parameter files -------------------------------------------------------

PARAM_KEYS = (
    "mu",
    "k11",
    "k12",
    "k22",
    "lambda_p",
    "mu_p",
    "alpha",
    "s0",
    "alpha_bjs",
)
_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def load_parameter_file(path):
    """Parse a key=value parameter file.

    Material keys feed PhysicalParams; everything else (T, dt, case, ...)
    is returned verbatim in the extras dict, floats where they parse.
    """
    raw = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            if not _KEY_RE.match(key):
                raise ConfigError(f"{path}:{lineno}: bad key {key!r}")
            if key in raw:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            raw[key] = val

    kwargs = {}
    extras = {}
    for key, val in raw.items():
        if key in PARAM_KEYS:
            try:
                kwargs[key] = float(val)
            except ValueError:
                raise ConfigError(
                    f"{path}: value for {key!r} is not a number: {val!r}"
                ) from None
        else:
            try:
                extras[key] = float(val)
            except ValueError:
                extras[key] = val
    try:
        params = PhysicalParams(**kwargs)
    except ConfigError as err:
        raise ConfigError(f"{path}: {err}") from None
    return params, extras


def write_parameter_file(path, params, extras=None):
    with open(path, "w", encoding="utf-8") as fh:
        for key in PARAM_KEYS:
            fh.write(f"{key} = {getattr(params, key)!r}\n")
        for key, val in (extras or {}).items():
            fh.write(f"{key} = {val}\n")


# -- self-consistency audit ------------------------------------------------


def audit_case(case, n=60, seed=1234, rel=2e-5):
    """Check the analytic derivatives of a case against central differences.

    Catches profile-factory derivative bugs before they poison every data
    term downstream.  Returns the worst relative mismatch found.
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.05, 0.95, n)
    y = rng.uniform(0.05, 0.95, n)
    t = rng.uniform(0.0, 1.0, n)
    h = 1e-5
    worst = 0.0

    fields = {
        "uf_x": case.uf.x,
        "uf_y": case.uf.y,
        "pf": case.pf,
        "pp": case.pp,
        "eta_x": case.eta.x,
        "eta_y": case.eta.y,
    }
    stencils = {
        (1, 0, 0): lambda f: (f.d(x + h, y, t) - f.d(x - h, y, t)) / (2 * h),
        (0, 1, 0): lambda f: (f.d(x, y + h, t) - f.d(x, y - h, t)) / (2 * h),
        (0, 0, 1): lambda f: (f.d(x, y, t + h) - f.d(x, y, t - h)) / (2 * h),
        (2, 0, 0): lambda f: (
            f.d(x + h, y, t) - 2 * f.d(x, y, t) + f.d(x - h, y, t)
        )
        / h**2,
        (0, 2, 0): lambda f: (
            f.d(x, y + h, t) - 2 * f.d(x, y, t) + f.d(x, y - h, t)
        )
        / h**2,
        (1, 1, 0): lambda f: (
            f.d(x + h, y + h, t)
            - f.d(x + h, y - h, t)
            - f.d(x - h, y + h, t)
            + f.d(x - h, y - h, t)
        )
        / (4 * h**2),
        (1, 0, 1): lambda f: (
            f.d(x + h, y, t + h)
            - f.d(x + h, y, t - h)
            - f.d(x - h, y, t + h)
            + f.d(x - h, y, t - h)
        )
        / (4 * h**2),
        (0, 1, 1): lambda f: (
            f.d(x, y + h, t + h)
            - f.d(x, y + h, t - h)
            - f.d(x, y - h, t + h)
            + f.d(x, y - h, t - h)
        )
        / (4 * h**2),
    }
    scale = max(
        1.0,
        max(float(np.abs(f.d(x, y, t)).max() or 0.0) for f in fields.values()),
    )
    for fname, f in fields.items():
        for (nx, ny, nt), fd in stencils.items():
            got = f.d(x, y, t, nx, ny, nt)
            ref = fd(f)
            err = float(np.abs(got - ref).max())
            mag = max(scale, float(np.abs(ref).max()))
            worst = max(worst, err / mag)
            if err / mag > rel:
                raise AssertionError(
                    f"derivative mismatch in {fname} at order "
                    f"({nx},{ny},{nt}): {err / mag:.2e}"
                )
    return worst
