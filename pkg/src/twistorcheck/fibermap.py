"""Rotational fiber surfaces and equivariant maps to the unit sphere.

A profile rho(z) > 0 on (z-, z+) describes the surface of revolution
(rho cos(theta), rho sin(theta), z) in R^3 (third axis = rotation axis).
An equivariant map to the unit sphere has the form (theta, z) -> (theta,
phi(z)); it is holomorphic for the complex structures induced by the
embedding metrics exactly when, in the isothermal coordinate
l(z) = integral sqrt(rho'^2 + 1) / rho dz, it is a translation:
phi = tanh(l(z) + c).

Three solution branches are implemented side by side; the first-principles
conformality verifier (singular values of the differential in the embedding
metrics) adjudicates between them.  Closed forms derived from the flat
meridian normalization |rho'| instead of sqrt(rho'^2 + 1) agree with the
isothermal solution only asymptotically; the cylinder discriminates (the
closed form degenerates to a constant there) and the verifier reports it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from . import jets
from .errors import DomainError, InputError, NumericError

POLE_MARGIN = 1e-3  # exclusion margin in |phi| for fiber-map evaluations


class SurfaceProfile:
    """Positive profile z -> rho(z) with jets, on an open interval."""

    def __init__(self, rho: Callable, interval, name: str = "custom"):
        self.rho = rho
        self.z_minus, self.z_plus = float(interval[0]), float(interval[1])
        if not self.z_minus < self.z_plus:
            raise InputError("profile interval is empty")
        self.name = name

    def rho_jet(self, z, order: int):
        return self.rho(jets.seed_univariate(z, order))

    def rho_values(self, z):
        z = np.asarray(z, dtype=float)
        return np.asarray(self.rho_jet(z, 0).value)

    def rho_prime(self, z):
        z = np.asarray(z, dtype=float)
        j = self.rho_jet(z, 1)
        return np.asarray(j.deriv(0).value)

    def interior(self, z, margin=1e-9) -> bool:
        return self.z_minus + margin < z < self.z_plus - margin


def sphere_profile() -> SurfaceProfile:
    return SurfaceProfile(lambda zj: jets.sqrt(1.0 - zj * zj), (-1.0, 1.0), name="sphere")


def cylinder_profile(half_length: float = 2.0) -> SurfaceProfile:
    return SurfaceProfile(lambda zj: zj * 0.0 + 1.0, (-half_length, half_length), name="cylinder")


def cosh_profile() -> SurfaceProfile:
    def rho(zj):
        e = jets.exp(zj)
        return (e + 1.0 / e) * 0.5

    return SurfaceProfile(rho, (-1.0, 1.0), name="cosh")


def constant_profile(value: float, half_length: float = 1.0) -> SurfaceProfile:
    if value <= 0:
        raise InputError("constant profile must be positive")
    return SurfaceProfile(lambda zj: zj * 0.0 + value, (-half_length, half_length), name=f"constant_{value}")


PROFILES = {
    "sphere": sphere_profile,
    "cylinder": cylinder_profile,
    "cosh": cosh_profile,
}


def get_profile(name: str) -> SurfaceProfile:
    if name not in PROFILES:
        raise InputError(f"unknown profile '{name}' (have {sorted(PROFILES)})")
    return PROFILES[name]()


# ---------------------------------------------------------------------------
# Gauss map
# ---------------------------------------------------------------------------

def surface_point(profile: SurfaceProfile, z, theta):
    rho = profile.rho_values(z)
    return np.stack([rho * np.cos(theta), rho * np.sin(theta), np.asarray(z, float) + 0 * rho], axis=-1)


def surface_tangents(profile: SurfaceProfile, z, theta):
    """(d/dz, d/dtheta) of the embedding, as R^3 vectors."""
    rho = profile.rho_values(z)
    rs = profile.rho_prime(z)
    c, s = np.cos(theta), np.sin(theta)
    one = np.ones_like(rho)
    t_z = np.stack([rs * c, rs * s, one], axis=-1)
    t_th = np.stack([-rho * s, rho * c, 0 * one], axis=-1)
    return t_z, t_th


def gauss_map(profile: SurfaceProfile, z, theta):
    """Outward unit normal of the rotational surface at (z, theta)."""
    if np.ndim(z) == 0 and not profile.interior(z):
        raise DomainError(f"z={z} is on the boundary of the profile interval")
    t_z, t_th = surface_tangents(profile, z, theta)
    n = np.cross(t_th, t_z)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# equivariant maps
# ---------------------------------------------------------------------------

BRANCHES = ("flat_meridian_closed_form", "alternate_closed_form", "quadrature")


@dataclass
class EquivariantMap:
    """Fiber map (theta, z) -> (theta, phi(z)); equivariance is structural."""

    profile: SurfaceProfile
    phi: Callable  # univariate jet (or float array) -> jet
    c: float
    branch: str
    sign: int = +1
    domain: tuple = None
    degenerate: bool = False

    def phi_jet(self, z, order: int):
        return self.phi(jets.seed_univariate(z, order))

    def phi_values(self, z):
        return np.asarray(self.phi_jet(z, 0).value)

    def phi_prime(self, z):
        return np.asarray(self.phi_jet(z, 1).deriv(0).value)

    def perturbed(self, amount: float) -> "EquivariantMap":
        """phi -> phi + amount * (1 - phi^2): breaks conformality, keeps |phi|<1."""
        base = self.phi

        def phi(zj):
            p = base(zj)
            return p + amount * (1.0 - p * p)

        return EquivariantMap(self.profile, phi, self.c, self.branch + "+perturbed",
                              self.sign, self.domain, False)


def identity_sphere_map() -> EquivariantMap:
    """The identity S^2 -> S^2 (the plain twistor chart's fiber map)."""
    prof = sphere_profile()
    return EquivariantMap(prof, lambda zj: zj, 0.0, "identity", +1, (-1.0, 1.0))


def isothermal_coordinate(profile: SurfaceProfile, z, z0: float, tol: float = 1e-12):
    """l(z) = integral_{z0}^{z} sqrt(rho'^2+1)/rho dt by adaptive quadrature."""

    def integrand(t):
        j = profile.rho_jet(t, 1)
        rho = float(np.asarray(j.value).reshape(()))
        rp = float(np.asarray(j.deriv(0).value).reshape(()))
        return np.sqrt(rp * rp + 1.0) / rho

    flat = np.atleast_1d(np.asarray(z, dtype=float))
    res = np.empty(flat.shape)
    for i, zz in enumerate(flat):
        val, err = quad(integrand, z0, zz, epsabs=tol, epsrel=tol, limit=200)
        if not np.isfinite(val) or err > 1e-6:
            raise NumericError(f"quadrature for the isothermal coordinate failed at z={zz}")
        res[i] = val
    return res.reshape(np.shape(z)) if np.ndim(z) else float(res[0])


def _scan_domain(profile, valid, n=512):
    """Largest subinterval of the profile where ``valid(z)`` holds."""
    zs = np.linspace(profile.z_minus, profile.z_plus, n + 2)[1:-1]
    ok = np.array([bool(valid(z)) for z in zs])
    best, cur_start = None, None
    for i, flag in enumerate(np.append(ok, False)):
        if flag and cur_start is None:
            cur_start = i
        elif not flag and cur_start is not None:
            length = zs[i - 1] - zs[cur_start]
            cand = (zs[cur_start], zs[i - 1])
            if best is None or length > best[1] - best[0] or (
                length == best[1] - best[0] and cand[0] > best[0]
            ):
                best = cand
            cur_start = None
    return best


def solve_phi(profile: SurfaceProfile, c: float = 0.0, sign: int = +1,
              branch: str = "quadrature", z0: Optional[float] = None,
              quad_tol: float = 1e-12) -> EquivariantMap:
    """Solve for the equivariant fiber map phi on the given profile.

    branches:

    * ``flat_meridian_closed_form``      phi = sign * sqrt(1 - e^c rho^-2)
    * ``alternate_closed_form``  phi = sign * sqrt(1 - e^c rho^2)
    * ``quadrature``             phi = tanh(l(z) + c) with the isothermal l

    Only the quadrature branch is guaranteed conformal in the embedding
    metrics; run :func:`conformality_check` to adjudicate.
    """
    if branch not in BRANCHES:
        raise InputError(f"unknown branch '{branch}' (have {BRANCHES})")
    if sign not in (+1, -1):
        raise InputError("sign must be +1 or -1")
    ec = float(np.exp(c))

    if branch == "quadrature":
        if z0 is None:
            z0 = 0.5 * (profile.z_minus + profile.z_plus)

        def phi(zj):
            # build phi's Taylor series at the evaluation value, then compose
            # with the incoming jet (so perturbed/derived maps stay exact)
            if not isinstance(zj, jets.Jet):
                zj = jets.seed_univariate(zj, 1)
            order = zj.space.order
            hi = profile.rho(_reseed(zj, order + 1))
            rho_p = hi.deriv(0)
            rho = hi.truncate(order)
            integrand = jets.sqrt(rho_p * rho_p + 1.0) / rho
            l0 = isothermal_coordinate(profile, np.asarray(zj.value), z0, tol=quad_tol)
            ell = jets.antiderivative(integrand, l0)
            phi_series = jets.tanh(ell + c)
            return jets.compose_univariate(phi_series, zj)

        m = EquivariantMap(profile, phi, c, branch, sign, (profile.z_minus, profile.z_plus))
        _flag_degenerate(m)
        return m

    if branch == "flat_meridian_closed_form":
        radicand = lambda rho: 1.0 - ec / (rho * rho)
    else:
        radicand = lambda rho: 1.0 - ec * rho * rho

    # threshold large enough that a touching zero of the radicand splits the
    # domain (e.g. the sphere's alternate branch at c = 0 is odd across z = 0)
    dom = _scan_domain(profile, lambda z: radicand(profile.rho_values(z)) > 1e-4)
    if dom is None:
        raise DomainError(f"branch '{branch}' with c={c} has empty domain on profile '{profile.name}'")

    def phi(zj):
        return sign * jets.sqrt(radicand(profile.rho(zj)))

    m = EquivariantMap(profile, phi, c, branch, sign, dom)
    _flag_degenerate(m)
    return m


def _reseed(zj, order):
    return jets.seed_univariate(zj.value, order)


def _flag_degenerate(m: EquivariantMap, n: int = 64, tol: float = 1e-12):
    lo, hi = m.domain
    pad = 1e-3 * (hi - lo)
    zs = np.linspace(lo + pad, hi - pad, n)
    m.degenerate = bool(np.max(np.abs(m.phi_prime(zs))) < tol)


# ---------------------------------------------------------------------------
# conformality verifier (first principles, embedding metrics)
# ---------------------------------------------------------------------------

@dataclass
class ConformalityReport:
    max_anisotropy: float
    orientation: int  # sign of the Jacobian determinant (+1 preserving)
    samples_used: int
    samples_skipped: int
    degenerate: bool

    @property
    def conformal(self):
        return (not self.degenerate) and self.max_anisotropy < 1e-6 and self.orientation > 0


def conformality_check(profile: SurfaceProfile, emap: EquivariantMap,
                       sample_count: int = 100, margin: float = 1e-3) -> ConformalityReport:
    """Compare the two singular values of df in the embedding metrics.

    Meridian norms: sqrt(rho'^2 + 1) on the surface, 1/sqrt(1 - zeta^2) on
    the sphere; parallel norms rho and sqrt(1 - zeta^2).  A pole-proximate
    sample (|phi| within POLE_MARGIN of 1) is skipped and counted.
    """
    lo, hi = emap.domain
    pad = margin * (hi - lo)
    zs = np.linspace(lo + pad, hi - pad, sample_count)
    j = emap.phi_jet(zs, 1)
    phi = np.asarray(j.value)
    dphi = np.asarray(j.deriv(0).value)
    keep = np.abs(phi) < 1.0 - POLE_MARGIN
    skipped = int(np.sum(~keep))
    zs, phi, dphi = zs[keep], phi[keep], dphi[keep]
    if zs.size == 0:
        raise DomainError("all samples are pole-proximate; nothing to check")
    if np.max(np.abs(dphi)) < 1e-12:
        return ConformalityReport(np.nan, 0, int(zs.size), skipped, True)
    rho = profile.rho_values(zs)
    rp = profile.rho_prime(zs)
    sigma_parallel = np.sqrt(1.0 - phi * phi) / rho
    sigma_meridian = np.abs(dphi) / np.sqrt(1.0 - phi * phi) / np.sqrt(rp * rp + 1.0)
    aniso = np.abs(sigma_meridian / sigma_parallel - 1.0)
    if np.all(dphi > 0):
        orientation = +1
    elif np.all(dphi < 0):
        orientation = -1
    else:
        orientation = 0
    return ConformalityReport(float(np.max(aniso)), orientation, int(zs.size), skipped, False)


# ---------------------------------------------------------------------------
# completeness of the conformally rescaled fiber metric
# ---------------------------------------------------------------------------

@dataclass
class CompletenessVerdict:
    verdict: str  # complete | incomplete | inconclusive
    fitted_exponent: float
    method: str
    detail: dict = field(default_factory=dict)


def power_pole_h(p: float):
    """h_p(zeta) = -p log(1 - zeta^2); p >= 1 makes the fiber metric complete."""

    def h(z):
        return -p * jets.log(1.0 - z * z)

    return h


def completeness_classify(h_family: str = "power_pole", p: Optional[float] = None,
                          h_expr: Optional[Callable] = None,
                          quadrature_budget: int = 200) -> CompletenessVerdict:
    """Classify completeness of the fiber metric weighted by e^h.

    The criterion is divergence of integral e^{h(sin(lat))/2} d(lat) toward
    both poles.  The built-in ``power_pole`` family h_p = -p log(1-zeta^2)
    has integrand cos(lat)^{-p}: complete exactly when p >= 1.  General
    expressions are classified by fitting the power-law growth of the
    integrand toward each pole; a fitted exponent within 0.05 of the
    critical value 1 is reported inconclusive.
    """
    if h_family == "power_pole":
        if p is None:
            raise InputError("power_pole family needs the exponent p")
        verdict = "complete" if p >= 1.0 else "incomplete"
        return CompletenessVerdict(verdict, float(p), "closed_form",
                                   {"family": "power_pole", "p": float(p)})
    if h_family != "expression" or h_expr is None:
        raise InputError("h_family must be 'power_pole' or 'expression' (with h_expr)")

    def integrand(lat):
        zeta = np.sin(lat)
        val = h_expr(np.asarray(zeta))
        val = val.value if isinstance(val, jets.Jet) else val
        return np.exp(0.5 * np.asarray(val, dtype=float))

    exps = []
    details = {}
    for pole, direction in (("north", +1.0), ("south", -1.0)):
        # closest approach keeps 1 - sin^2(lat) well above float64 rounding
        eps = np.logspace(-2, -6, 13)
        lats = direction * (np.pi / 2 - eps)
        try:
            vals = integrand(lats)
        except Exception as exc:  # non-integrable interior singularities etc.
            raise InputError(f"weight expression not evaluable near the {pole} pole: {exc}")
        if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
            raise InputError("weight must be positive and finite on the open fiber")
        # integrand ~ C * eps^{-q}: q from the log-log slope
        q = -np.polyfit(np.log(eps), np.log(vals), 1)[0]
        exps.append(q)
        # diagnostic only; truncated away from the pole so quad stays tame
        lo, hi = (0.0, np.pi / 2 - 1e-3) if direction > 0 else (-np.pi / 2 + 1e-3, 0.0)
        with np.errstate(all="ignore"):
            part = quad(integrand, lo, hi, limit=quadrature_budget)[0]
        details[pole] = {"exponent": float(q), "partial_integral": float(part)}
    q_min = float(min(exps))
    if abs(q_min - 1.0) < 0.05:
        verdict = "inconclusive"
    elif q_min >= 1.0:
        verdict = "complete"
    else:
        verdict = "incomplete"
    return CompletenessVerdict(verdict, q_min, "exponent_fit", details)
