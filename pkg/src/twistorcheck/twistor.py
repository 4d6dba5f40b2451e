"""The 6-dimensional total space: tautological almost-complex structure,
horizontal lifts, Nijenhuis tensor (two routes), Hermitian 2-form family,
and the balancedness / wedge-cone verifications.

Chart coordinates are u = (x0..x3, v, w): x on the base, v the fiber height
coordinate (zeta on the plain twistor chart, z on a modified chart with a
rotational-surface fiber), w the fiber angle.  The fiber sits in the rank-3
bundle of self-dual 2-vectors, identified with R^3 through the orthonormal
frame (s1, s2, s3); the rotation axis is s1 and the surface point is

    p(v, w) = v s1 + rho(v) (cos w s2 + sin w s3).

Conventions fixed here and exercised by the tests:

* horizontal lift X^h = X^k (d_k - eps beta_k d_w); the sign eps is
  calibrated against numeric parallel transport (eps = +1 for the beta
  convention nabla s2 = beta s3 of the kahler module).
* the fiber R^3 carries the cyclic cross product s1 x s2 = s3; the Gauss
  map is the outward normal, and the vertical action of J is eps(p) x .
* J X^h = (K_{F(p)} X)^h with F(p) = phi(v) s1 + sqrt(1-phi^2)(cos w s2 +
  sin w s3) the equivariant fiber-map image (identity on plain charts).
* the fundamental 2-form convention is Omega(X, Y) = h(J X, Y), making
  Omega(X, JX) = |JX|^2 > 0 and the four-term Nijenhuis/D-Omega identity
  hold with the signs used in :func:`nijenhuis_domega`.
* orientation: base complex orientation times the outward fiber
  orientation (d_w, d_v); the coordinate frame (x, v, w) is negatively
  oriented, so the volume component on dx^0123 ^ dv ^ dw is -sqrt(det h).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import jets
from .errors import ConfigurationError, DomainError, InputError, NumericError, UsageError
from .fibermap import EquivariantMap, SurfaceProfile, identity_sphere_map, sphere_profile
from .geometry import (
    MetricField,
    TwoVector,
    check_spd,
    christoffel,
    christoffel_jets,
    curvature_data,
    curvature_endomorphism,
    curvature_two_vector_action,
    jet_matrix_inverse,
    rho_apply,
    sd_basis,
    values_of,
    _inner_kernel,
    _star_kernel,
)
from .kahler import adapted_frame, beta_form

TOTAL_DIM = 6
IDX_V, IDX_W = 4, 5


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------

class TwistorChart:
    """A 6-coordinate chart on the (modified) twistor space over a fixture.

    Plain twistor charts use the sphere profile with the identity fiber map;
    modified charts carry an arbitrary rotational profile and an equivariant
    fiber map phi.  ``eps`` is the calibrated sign of the connection
    correction in the vertical coframe {dv, dw + eps beta}.
    """

    def __init__(self, base: MetricField, profile: SurfaceProfile,
                 fmap: Optional[EquivariantMap] = None, jet_order: int = 3,
                 pole_margin: float = 1e-2, eps: Optional[int] = None):
        if jet_order not in (2, 3):
            raise ConfigurationError("twistor charts need jet_order 2 or 3")
        self.base = base
        self.profile = profile
        self.fmap = fmap if fmap is not None else identity_sphere_map()
        self.jet_order = jet_order
        self.pole_margin = pole_margin
        self._eps = eps

    @classmethod
    def twistor(cls, base: MetricField, **kw) -> "TwistorChart":
        return cls(base, sphere_profile(), None, **kw)

    @classmethod
    def modified(cls, base: MetricField, profile: SurfaceProfile,
                 fmap: EquivariantMap, **kw) -> "TwistorChart":
        return cls(base, profile, fmap, **kw)

    @property
    def is_plain_twistor(self) -> bool:
        return self.fmap.branch == "identity"

    @property
    def eps(self) -> int:
        if self._eps is None:
            self._eps = chart_calibration(self.base)[0]
        return self._eps

    def with_eps(self, eps: int) -> "TwistorChart":
        return TwistorChart(self.base, self.profile, self.fmap, self.jet_order,
                            self.pole_margin, eps)

    def fiber_interval(self):
        lo, hi = self.fmap.domain if self.fmap.domain else (self.profile.z_minus, self.profile.z_plus)
        lo = max(lo, self.profile.z_minus)
        hi = min(hi, self.profile.z_plus)
        pad = self.pole_margin * (hi - lo)
        return lo + pad, hi - pad

    def sample(self, n: int, rng) -> np.ndarray:
        """n admissible 6-points: base sample x fiber sample (pole-safe)."""
        if isinstance(rng, (int, np.integer)):
            rng = np.random.default_rng(rng)
        xs = self.base.chart.sample(n, rng)
        lo, hi = self.fiber_interval()
        out = np.empty((n, TOTAL_DIM))
        out[:, :4] = xs
        for i in range(n):
            for _ in range(1000):
                v = lo + (hi - lo) * rng.uniform()
                if abs(float(self.fmap.phi_values(v))) < 1.0 - 1e-3:
                    out[i, IDX_V] = v
                    break
            else:
                raise DomainError("could not sample a pole-safe fiber point")
            out[i, IDX_W] = 2.0 * np.pi * rng.uniform()
        return out


def chart_calibration(metric: MetricField):
    """Cached (eps, diagnostics) of :func:`calibrate_epsilon` per fixture."""
    cached = getattr(metric, "_twistor_calibration", None)
    if cached is None:
        cached = calibrate_epsilon(metric)
        metric._twistor_calibration = cached
    return cached


def calibrate_epsilon(metric: MetricField, seed: int = 2024, steps: int = 24,
                      t_max: float = 0.02):
    """Sign of the connection correction, from numeric parallel transport.

    Transports s2 along a short coordinate segment with an RK4 integrator
    and compares the induced rotation angle in the (s2, s3) plane with the
    integral of beta.  The sign is determined independently at the two
    strongest-connection probe points and must agree.  Returns
    (eps, diagnostics); when beta is negligible on the probe points any
    sign works and +1 is returned.
    """
    rng = np.random.default_rng(seed)
    probes = metric.chart.sample(4, rng)
    ranked = []
    for x in probes:
        fr = adapted_frame(metric, x, order=2)
        b = beta_form(metric, fr, x).values
        k = int(np.argmax(np.abs(b)))
        ranked.append((abs(b[k]), k, x))
    ranked.sort(key=lambda t: -t[0])
    if ranked[0][0] < 1e-10:
        return +1, {"beta_negligible": True, "mismatch_ratio": 0.0}
    results = [_transport_sign(metric, x, k, steps, t_max)
               for strength, k, x in ranked[:2] if strength > 1e-10]
    signs = {r[0] for r in results}
    if len(signs) != 1:
        raise NumericError("connection-sign calibration disagrees between probe points")
    return results[0]


def _transport_sign(metric: MetricField, x0, k, steps, t_max):
    # step toward the box interior
    box = metric.chart.box
    direction = 1.0 if x0[k] + t_max <= box[k, 1] else -1.0
    h = t_max / steps

    def gamma_action(x, S):
        G = christoffel(metric, x)
        return -direction * (np.einsum("im,mj->ij", G[:, k, :], S)
                             + np.einsum("jm,im->ij", G[:, k, :], S))

    fr0 = adapted_frame(metric, x0, order=1)
    basis0 = sd_basis(fr0.matrix, metric.values_at(x0))
    S = basis0[1].comps.copy()
    x = x0.copy()
    beta_int = 0.0
    for _ in range(steps):
        b_here = beta_form(metric, adapted_frame(metric, x, order=2), x).values[k]
        k1 = gamma_action(x, S)
        xm = x.copy(); xm[k] += direction * h / 2
        k2 = gamma_action(xm, S + h / 2 * k1)
        k3 = gamma_action(xm, S + h / 2 * k2)
        xe = x.copy(); xe[k] += direction * h
        k4 = gamma_action(xe, S + h * k3)
        S = S + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        b_next = beta_form(metric, adapted_frame(metric, xe, order=2), xe).values[k]
        beta_int += direction * h * 0.5 * (b_here + b_next)
        x = xe
    g1 = metric.values_at(x)
    fr1 = adapted_frame(metric, x, order=1)
    basis1 = sd_basis(fr1.matrix, g1)
    c2 = _inner_kernel(g1, S, basis1[1].comps)
    c3 = _inner_kernel(g1, S, basis1[2].comps)
    psi = float(np.arctan2(c3, c2))
    plus_resid = abs(psi + beta_int)   # eps = +1 predicts psi = -int beta
    minus_resid = abs(psi - beta_int)
    eps = +1 if plus_resid < minus_resid else -1
    return eps, {
        "beta_negligible": False,
        "psi": psi,
        "beta_integral": float(beta_int),
        "mismatch_ratio": float(max(plus_resid, minus_resid) / max(abs(beta_int), 1e-30)),
        "match_residual": float(min(plus_resid, minus_resid)),
    }


# ---------------------------------------------------------------------------
# per-point evaluation context
# ---------------------------------------------------------------------------

class ChartEval:
    """All jet fields of a chart at a batch of 6-points, at working order
    ``jet_order - 1`` (one order is consumed by the connection form)."""

    def __init__(self, chart: TwistorChart, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        self.chart = chart
        self.points = pts
        self.x4 = pts[:, :4]
        self.v = pts[:, IDX_V]
        self.w = pts[:, IDX_W]
        order = chart.jet_order
        self.W = order - 1
        self.space = jets.get_space(TOTAL_DIM, self.W)
        self.eps = chart.eps
        self._build_base(order)
        self._build_fiber()
        self._build_J_h()
        self._gamma_h = None
        self._omega_jets = None
        self._data4 = None

    # -- base fields ------------------------------------------------------
    def _build_base(self, order):
        chart = self.chart
        _, gj4 = chart.base.jets_at(self.x4, order)
        self.gvals = values_of(gj4)
        check_spd(self.gvals, self.x4)
        frame = adapted_frame(chart.base, self.x4, order=order)
        self.frame_vals = values_of(frame.jets_)
        beta = beta_form(chart.base, frame, self.x4, order=order)
        self.beta_vals = beta.values
        s1j, s2j, s3j = frame.sd_jets()
        self.svals = [values_of(s) for s in (s1j, s2j, s3j)]

        emb = lambda j: j.truncate(self.W).embed(self.space, (0, 1, 2, 3))
        self.g = np.empty((4, 4), dtype=object)
        for i in range(4):
            for j in range(4):
                self.g[i, j] = emb(gj4[i, j])
        self.S = []
        for sj in (s1j, s2j, s3j):
            out = np.empty((4, 4), dtype=object)
            for i in range(4):
                for j in range(4):
                    out[i, j] = emb(sj[i, j])
            self.S.append(out)
        self.beta = np.empty(4, dtype=object)
        for k in range(4):
            self.beta[k] = beta.jets_[k].embed(self.space, (0, 1, 2, 3))
        self.zero = self.g[0, 0] * 0.0
        self.one = self.zero + 1.0

    # -- fiber fields -------------------------------------------------------
    def _build_fiber(self):
        W = self.W
        chart = self.chart
        prof = chart.profile
        if np.any(self.v <= prof.z_minus) or np.any(self.v >= prof.z_plus):
            raise DomainError(
                f"fiber coordinate outside the open profile interval "
                f"({prof.z_minus}, {prof.z_plus})")
        vj_hi = jets.seed_univariate(self.v, W + 1)
        rho_hi = chart.profile.rho(vj_hi)
        phi_hi = chart.fmap.phi(vj_hi)
        emb_v = lambda j: j.embed(self.space, (IDX_V,))
        self.rho = emb_v(rho_hi.truncate(W))
        self.rho_p = emb_v(rho_hi.deriv(0))
        self.phi = emb_v(phi_hi.truncate(W))
        self.phi_p = emb_v(phi_hi.deriv(0))
        wj = jets.seed_univariate(self.w, W)
        self.cw = jets.cos(wj).embed(self.space, (IDX_W,))
        self.sw = jets.sin(wj).embed(self.space, (IDX_W,))
        vj = vj_hi.truncate(W).embed(self.space, (IDX_V,))
        self.vjet = vj
        phi_sq = self.phi * self.phi
        if np.any(phi_sq.value >= 1.0):
            raise DomainError("fiber-map image touches a pole at a sampled point")
        self.r_img = jets.sqrt(1.0 - phi_sq)

    # -- assembled structures ---------------------------------------------
    def _two_vector_field(self, a1, a2, a3):
        """a1 s1 + a2 s2 + a3 s3 as a 4x4 object matrix of jets."""
        out = np.empty((4, 4), dtype=object)
        for i in range(4):
            for j in range(4):
                out[i, j] = a1 * self.S[0][i, j] + a2 * self.S[1][i, j] + a3 * self.S[2][i, j]
        return out

    def _build_J_h(self):
        eps = self.eps
        cw, sw = self.cw, self.sw
        self.P_img = self._two_vector_field(self.phi, self.r_img * cw, self.r_img * sw)
        self.P_surf = self._two_vector_field(self.vjet, self.rho * cw, self.rho * sw)
        # K = -P g (as an endomorphism K^m_j)
        K = np.empty((4, 4), dtype=object)
        for m in range(4):
            for j in range(4):
                acc = None
                for i in range(4):
                    t = self.P_img[m, i] * self.g[i, j]
                    acc = t if acc is None else acc + t
                K[m, j] = -1.0 * acc
        self.K = K
        m_len = jets.sqrt(self.rho_p * self.rho_p + 1.0)  # meridian speed
        c_vw = -1.0 * m_len / self.rho   # J d_v = c_vw d_w
        c_wv = self.rho / m_len          # J d_w = c_wv d_v
        J = np.empty((TOTAL_DIM, TOTAL_DIM), dtype=object)
        for m in range(TOTAL_DIM):
            for a in range(TOTAL_DIM):
                J[m, a] = self.zero
        for k in range(4):
            for m in range(4):
                J[m, k] = K[m, k]
            J[IDX_V, k] = (eps * c_wv) * self.beta[k]
            acc = None
            for m in range(4):
                t = K[m, k] * self.beta[m]
                acc = t if acc is None else acc + t
            J[IDX_W, k] = (-eps) * acc
        J[IDX_W, IDX_V] = c_vw
        J[IDX_V, IDX_W] = c_wv
        self.J = J

        h = np.empty((TOTAL_DIM, TOTAL_DIM), dtype=object)
        rho_sq = self.rho * self.rho
        for i in range(4):
            for j in range(4):
                h[i, j] = self.g[i, j] + self.beta[i] * self.beta[j] * rho_sq
            h[i, IDX_V] = self.zero
            h[IDX_V, i] = self.zero
            h[i, IDX_W] = (eps * 1.0) * self.beta[i] * rho_sq
            h[IDX_W, i] = h[i, IDX_W]
        h[IDX_V, IDX_V] = m_len * m_len
        h[IDX_W, IDX_W] = rho_sq
        h[IDX_V, IDX_W] = self.zero
        h[IDX_W, IDX_V] = self.zero
        self.h = h

    # -- values and lazy derived fields ------------------------------------
    @property
    def J_values(self):
        return values_of(self.J)

    @property
    def h_values(self):
        return values_of(self.h)

    @property
    def gamma_h(self):
        """Christoffel values of h in chart coordinates, Gamma^m_{ab}."""
        if self._gamma_h is None:
            self._gamma_h = values_of(christoffel_jets(self.h))
        return self._gamma_h

    @property
    def omega_jets(self):
        """Fundamental form Omega_{ab} = h(J d_a, d_b) as jets."""
        if self._omega_jets is None:
            om = np.empty((TOTAL_DIM, TOTAL_DIM), dtype=object)
            for a in range(TOTAL_DIM):
                for b in range(TOTAL_DIM):
                    acc = None
                    for m in range(TOTAL_DIM):
                        t = self.J[m, a] * self.h[m, b]
                        acc = t if acc is None else acc + t
                    om[a, b] = acc
            self._omega_jets = om
        return self._omega_jets

    @property
    def data4(self):
        if self._data4 is None:
            self._data4 = curvature_data(self.chart.base, self.x4)
        return self._data4

    def horizontal_lift_values(self, X):
        X = np.asarray(X, dtype=float)
        out = np.zeros(self.beta_vals.shape[:-1] + (TOTAL_DIM,))
        out[..., :4] = X
        out[..., IDX_W] = -self.eps * np.einsum("...k,...k->...", self.beta_vals, X)
        return out

    def vertical_coframe_pairing(self, Wvec):
        """(dv(W), (dw + eps beta)(W)) for a 6-vector field value."""
        Wvec = np.asarray(Wvec)
        pv = Wvec[..., IDX_V]
        pw = Wvec[..., IDX_W] + self.eps * np.einsum("...k,...k->...", self.beta_vals, Wvec[..., :4])
        return pv, pw

    def fiber_tangents(self):
        """t_v, t_w, outward normal eps3 as (s1,s2,s3)-coordinate triples."""
        rho = self.rho.value
        rp = self.rho_p.value
        cw, sw = np.cos(self.w), np.sin(self.w)
        t_v = np.stack([np.ones_like(rho), rp * cw, rp * sw], axis=-1)
        t_w = np.stack([np.zeros_like(rho), -rho * sw, rho * cw], axis=-1)
        n = np.cross(t_w, t_v)
        eps3 = n / np.linalg.norm(n, axis=-1, keepdims=True)
        return t_v, t_w, eps3

    def triple_to_two_vector(self, a3):
        """(s1,s2,s3)-triple -> Lambda2 components, at values level."""
        a3 = np.asarray(a3)
        return (
            a3[..., 0:1, None] * self.svals[0]
            + a3[..., 1:2, None] * self.svals[1]
            + a3[..., 2:3, None] * self.svals[2]
        )

    def two_vector_to_triple(self, comps):
        return np.stack(
            [_inner_kernel(self.gvals, comps, s) for s in self.svals], axis=-1
        )


# ---------------------------------------------------------------------------
# public field operations
# ---------------------------------------------------------------------------

def K_operator(a: TwoVector, metric: MetricField, x) -> np.ndarray:
    """Almost-complex structure K_a with g(K_a X, Y) = 2 g(a, X ^ Y).

    ``a`` must be a unit self-dual 2-vector (checked to 1e-8).
    """
    g = metric.values_at(x)
    norm = _inner_kernel(g, a.comps, a.comps)
    if np.any(np.abs(norm - 1.0) > 1e-8):
        raise InputError(f"K operator needs a unit 2-vector, got |a|^2 = {norm}")
    star = _star_kernel(g, a.comps, metric.chart.orientation)
    if np.max(np.abs(star - a.comps)) > 1e-8 * max(1.0, float(np.max(np.abs(a.comps)))):
        raise InputError("K operator needs a self-dual 2-vector")
    return -np.einsum("...mi,...ij->...mj", a.comps, g)


def horizontal_lift(X, chart: TwistorChart, point) -> np.ndarray:
    """Lift of a base vector: kills dv and dw + eps beta, projects to X."""
    ctx = ChartEval(chart, point)
    out = ctx.horizontal_lift_values(np.asarray(X, dtype=float))
    return out[0] if np.ndim(point) == 1 else out


def J_field(chart: TwistorChart, point) -> np.ndarray:
    """The 6x6 matrix of J in chart coordinates at the given point(s)."""
    ctx = ChartEval(chart, point)
    Jv = ctx.J_values
    return Jv[0] if np.ndim(point) == 1 else Jv


def total_space_metric(chart: TwistorChart, point) -> np.ndarray:
    ctx = ChartEval(chart, point)
    hv = ctx.h_values
    return hv[0] if np.ndim(point) == 1 else hv


class TotalSpaceMetric:
    """h = pi^* g + g^v as an evaluable 6x6 field over a chart."""

    def __init__(self, chart: TwistorChart):
        self.chart = chart

    def values_at(self, point):
        return total_space_metric(self.chart, point)

    def jets_at(self, point):
        return ChartEval(self.chart, point).h


# ---------------------------------------------------------------------------
# Nijenhuis tensor, two routes
# ---------------------------------------------------------------------------

def _nijenhuis_values(ctx: ChartEval) -> np.ndarray:
    """N^m_{ab} on coordinate fields (batch leading)."""
    Jv = ctx.J_values
    dJ = np.empty(Jv.shape[:-2] + (TOTAL_DIM,) * 3)  # [..., k, m, a] = d_k J^m_a
    for k in range(TOTAL_DIM):
        for m in range(TOTAL_DIM):
            for a in range(TOTAL_DIM):
                dJ[..., k, m, a] = ctx.J[m, a].deriv(k).value
    t1 = np.einsum("...ka,...kmb->...mab", Jv, dJ)
    t2 = np.einsum("...kb,...kma->...mab", Jv, dJ)
    t3 = np.einsum("...mk,...bka->...mab", Jv, dJ)
    t4 = np.einsum("...mk,...akb->...mab", Jv, dJ)
    return t1 - t2 + t3 - t4


def nijenhuis_bracket(chart: TwistorChart, point) -> np.ndarray:
    """N(A,B) = [JA,JB] - J[JA,B] - J[A,JB] - [A,B] on coordinate fields."""
    if chart.jet_order < 2:
        raise UsageError("the Nijenhuis tensor needs jet_order >= 2")
    ctx = ChartEval(chart, point)
    N = _nijenhuis_values(ctx)
    return N[0] if np.ndim(point) == 1 else N


def nijenhuis_max(chart: TwistorChart, points) -> np.ndarray:
    """Per-point sup-norm of the Nijenhuis coordinate components."""
    N = _nijenhuis_values(ChartEval(chart, points))
    return np.max(np.abs(N), axis=(-3, -2, -1))


def _covariant_domega(ctx: ChartEval) -> np.ndarray:
    """(D_k Omega)_{ab} values from the Levi-Civita connection of h."""
    om = ctx.omega_jets
    omv = values_of(om)
    dom = np.empty(omv.shape[:-2] + (TOTAL_DIM,) * 3)
    for k in range(TOTAL_DIM):
        for a in range(TOTAL_DIM):
            for b in range(TOTAL_DIM):
                dom[..., k, a, b] = om[a, b].deriv(k).value
    gh = ctx.gamma_h
    return (
        dom
        - np.einsum("...mka,...mb->...kab", gh, omv)
        - np.einsum("...mkb,...am->...kab", gh, omv)
    )


def nijenhuis_domega(chart: TwistorChart, point, A, B, C) -> float:
    """h(N(A,B),C) through the four-term D-Omega formula (independent
    route: uses the Levi-Civita connection of h, not brackets)."""
    ctx = ChartEval(chart, point)
    covd = _covariant_domega(ctx)
    Jv = ctx.J_values
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    C = np.asarray(C, float)
    JA = np.einsum("...ma,...a->...m", Jv, A)
    JB = np.einsum("...ma,...a->...m", Jv, B)

    def term(X, Y, Z):
        return np.einsum("...kab,...k,...a,...b->...", covd, X, Y, Z)

    out = term(A, JB, C) - term(JB, A, C) - term(B, JA, C) + term(JA, B, C)
    return float(out[0]) if np.ndim(point) == 1 else out


def nijenhuis_route_agreement(chart: TwistorChart, points, n_triples: int = 20,
                              seed: int = 0) -> float:
    """max |bracket route - D-Omega route| over random vector triples."""
    ctx = ChartEval(chart, points)
    N = _nijenhuis_values(ctx)
    hv = ctx.h_values
    covd = _covariant_domega(ctx)
    Jv = ctx.J_values
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_triples):
        A, B, C = rng.normal(size=(3, TOTAL_DIM))
        r1 = np.einsum("...mab,a,b,...mc,c->...", N, A, B, hv, C)
        JA = np.einsum("...ma,a->...m", Jv, A)
        JB = np.einsum("...ma,a->...m", Jv, B)

        def term(X, Y, Z):
            return np.einsum("...kab,...k,...a,...b->...", covd, X, Y, Z)

        Ab = np.broadcast_to(A, JA.shape)
        Bb = np.broadcast_to(B, JB.shape)
        Cb = np.broadcast_to(C, JB.shape)
        r2 = term(Ab, JB, Cb) - term(JB, Ab, Cb) - term(Bb, JA, Cb) + term(JA, Bb, Cb)
        worst = max(worst, float(np.max(np.abs(r1 - r2))))
    return worst


# ---------------------------------------------------------------------------
# structure identities
# ---------------------------------------------------------------------------

@dataclass
class StructureResiduals:
    """Max residuals of the five structural identities (+ the horizontal
    D-Omega vanishing) over the sampled random vectors."""

    cross_k_pairing: float      # g(p x V, K_p X ^ Y) = g(V, X ^ Y)
    vertical_second_fund: float  # V(D_{X^h} Y^h) = 1/2 rho(X^Y) p
    mixed_connection: float     # D_V X^h = 1/2 (R(p x V) X)^h
    gauss_curvature_duality: float  # g(eps x rho(X^Y)p, U) = -g(Rhat(p x (eps x U)), X^Y)
    mixed_nijenhuis: float      # h(N(X^h,U),Z^h) = 2 g(J f_* U - f_* J U, X ^ Z)
    horizontal_domega: float    # (D_{X^h} Omega)(Y^h, Z^h) = 2 g(V f_*(X^h), Y^Z) = 0

    @property
    def max_residual(self):
        return max(self.cross_k_pairing, self.vertical_second_fund, self.mixed_connection,
                   self.gauss_curvature_duality, self.mixed_nijenhuis, self.horizontal_domega)


def verify_structure_identities(chart: TwistorChart, point, n_random: int = 6,
                                seed: int = 0) -> StructureResiduals:
    """Pointwise verification of the connection/curvature identities.

    Identities involving the second fundamental form of the fiber assume the
    round sphere fiber, so this requires a plain twistor chart; the mixed
    Nijenhuis identity itself is exposed separately for modified charts
    (:func:`mixed_nijenhuis_residual`).
    """
    if chart.profile.name != "sphere":
        raise UsageError("structure identities are verified on sphere-fiber charts")
    ctx = ChartEval(chart, point)
    rng = np.random.default_rng(seed)
    data = ctx.data4
    t_v, t_w, eps3 = ctx.fiber_tangents()
    p3 = np.stack([ctx.vjet.value, (ctx.rho * ctx.cw).value, (ctx.rho * ctx.sw).value], axis=-1)
    p2v = ctx.triple_to_two_vector(p3)
    Kp = -np.einsum("...mi,...ij->...mj", p2v, ctx.gvals)

    gamma_h = ctx.gamma_h
    Hj = np.empty((TOTAL_DIM, 4), dtype=object)  # H_j field components
    for j in range(4):
        for m in range(TOTAL_DIM):
            Hj[m, j] = ctx.zero
        Hj[j, j] = ctx.one
        Hj[IDX_W, j] = (-ctx.eps) * ctx.beta[j]
    Hv = values_of(Hj)
    dH = np.zeros(Hv.shape[:-2] + (TOTAL_DIM, TOTAL_DIM, 4))
    for a in range(TOTAL_DIM):
        for m in range(TOTAL_DIM):
            for j in range(4):
                dH[..., a, m, j] = Hj[m, j].deriv(a).value
    # covDH[..., a, m, j] = (D_a H_j)^m
    covDH = dH + np.einsum("...man,...nj->...amj", gamma_h, Hv)

    r1 = r2 = r3 = r4 = r5 = r6 = 0.0
    N = _nijenhuis_values(ctx)
    hv = ctx.h_values
    covd = _covariant_domega(ctx)

    for _ in range(n_random):
        X = rng.normal(size=4)
        Y = rng.normal(size=4)
        cV = rng.normal(size=2)
        V3 = cV[0] * t_v + cV[1] * t_w
        V2 = ctx.triple_to_two_vector(V3)
        XY = np.einsum("i,j->ij", X, Y) - np.einsum("j,i->ij", X, Y)

        # (1) g(p x V, K_p X ^ Y) = g(V, X ^ Y)   [and with X <-> K_p Y]
        pxV = ctx.triple_to_two_vector(np.cross(p3, V3))
        KX = np.einsum("...mj,j->...m", Kp, X)
        KY = np.einsum("...mj,j->...m", Kp, Y)
        KXwY = np.einsum("...i,j->...ij", KX, Y) - np.einsum("j,...i->...ji", Y, KX)
        XwKY = np.einsum("i,...j->...ij", X, KY) - np.einsum("...j,i->...ji", KY, X)
        lhs_a = _inner_kernel(ctx.gvals, pxV, KXwY)
        lhs_b = _inner_kernel(ctx.gvals, pxV, XwKY)
        rhs = _inner_kernel(ctx.gvals, V2, np.broadcast_to(XY, V2.shape))
        r1 = max(r1, float(np.max(np.abs(lhs_a - rhs))), float(np.max(np.abs(lhs_b - rhs))))

        # (2) vertical part of D_{X^h} Y^h equals -1/2 rho(X ^ Y) p.  With
        # R = [nabla,nabla] - nabla_[,] this sign makes the identity hold;
        # the opposite R convention flips it (see the conventions note).
        DXY = np.einsum("...amj,...a,j->...m",
                        covDH, np.einsum("...mj,j->...m", Hv, X), Y)
        pv, pw = ctx.vertical_coframe_pairing(DXY)
        vert3 = pv[..., None] * t_v + pw[..., None] * t_w
        vert2 = ctx.triple_to_two_vector(vert3)
        rho_p2 = rho_apply(data, ctx.x4, TwoVector(np.broadcast_to(XY, ctx.gvals.shape[:-2] + (4, 4))), TwoVector(p2v))
        resid = vert2 + 0.5 * rho_p2.comps
        r2 = max(r2, float(np.max(np.abs(_inner_kernel(ctx.gvals, resid, resid)))) ** 0.5)

        # (3) D_V X^h = 1/2 (R(p x V) X)^h with V a vertical coordinate field
        for vidx, t3c in ((IDX_V, t_v), (IDX_W, t_w)):
            DVX = np.einsum("...mj,j->...m", covDH[..., vidx, :, :], X)
            pxt = ctx.triple_to_two_vector(np.cross(p3, t3c))
            RX = np.einsum("...lk,k->...l", curvature_endomorphism(data, pxt), X)
            rhs6 = ctx.horizontal_lift_values(RX) * 0.5
            r3 = max(r3, float(np.max(np.abs(DVX - rhs6))))

        # (4) g(eps x rho(X^Y)p, U) = -g(Rhat(p x (eps x U)), X^Y)
        cU = rng.normal(size=2)
        U3 = cU[0] * t_v + cU[1] * t_w
        rho_p3 = ctx.two_vector_to_triple(rho_p2.comps)
        lhs4 = np.einsum("...i,...i->...", np.cross(eps3, rho_p3), U3)
        arg = ctx.triple_to_two_vector(np.cross(p3, np.cross(eps3, U3)))
        rhs4 = -_inner_kernel(ctx.gvals, curvature_two_vector_action(data, arg),
                              np.broadcast_to(XY, arg.shape))
        r4 = max(r4, float(np.max(np.abs(lhs4 - rhs4))))

        # (5) mixed Nijenhuis against the fiber-map holomorphicity defect
        Z = rng.normal(size=4)
        r5 = max(r5, mixed_nijenhuis_residual(chart, None, X, (cU[0], cU[1]), Z,
                                              _ctx=ctx, _N=N, _hv=hv))

        # (6) (D_{X^h} Omega)(Y^h, Z^h) = 2 g(V f_*(X^h), Y ^ Z); both sides 0
        Xh = ctx.horizontal_lift_values(X)
        Yh = ctx.horizontal_lift_values(Y)
        Zh = ctx.horizontal_lift_values(Z)
        lhs6 = np.einsum("...kab,...k,...a,...b->...", covd, Xh, Yh, Zh)
        r6 = max(r6, float(np.max(np.abs(lhs6))))

    return StructureResiduals(r1, r2, r3, r4, r5, r6)


def horizontal_nijenhuis_residual(chart: TwistorChart, point, n_random: int = 6,
                                  seed: int = 0) -> float:
    """Vertical component of N on horizontal lifts against its curvature form.

    Checks h(N(X^h, Y^h), U) = -[ g(p x U, Rhat(JX^JY - X^Y))
                                 + g(p x JU, Rhat(X^JY + JX^Y)) ]
    on sphere-fiber charts (J = K_{F(p)} on the base side).  The overall
    sign is tied to the package's curvature convention, like the vertical
    second-fundamental-form identity.
    """
    if chart.profile.name != "sphere":
        raise UsageError("the horizontal Nijenhuis identity is verified on sphere-fiber charts")
    ctx = ChartEval(chart, point)
    N = _nijenhuis_values(ctx)
    hv = ctx.h_values
    data = ctx.data4
    t_v, t_w, eps3 = ctx.fiber_tangents()
    p3 = np.stack([ctx.vjet.value, (ctx.rho * ctx.cw).value, (ctx.rho * ctx.sw).value], axis=-1)
    Kv = values_of(ctx.K)
    rng = np.random.default_rng(seed)

    def wedge(A, B):
        return np.einsum("...i,...j->...ij", A, B) - np.einsum("...j,...i->...ij", A, B)

    worst = 0.0
    for _ in range(n_random):
        X, Y = rng.normal(size=(2, 4))
        cU = rng.normal(size=2)
        U3 = cU[0] * t_v + cU[1] * t_w
        Xh = ctx.horizontal_lift_values(X)
        Yh = ctx.horizontal_lift_values(Y)
        Uvec = np.zeros(Xh.shape)
        Uvec[..., IDX_V] = cU[0]
        Uvec[..., IDX_W] = cU[1]
        lhs = np.einsum("...mab,...a,...b,...mc,...c->...", N, Xh, Yh, hv, Uvec)
        JX = np.einsum("...mj,j->...m", Kv, X)
        JY = np.einsum("...mj,j->...m", Kv, Y)
        XYb = np.broadcast_to(np.einsum("i,j->ij", X, Y) - np.einsum("j,i->ij", X, Y),
                              ctx.gvals.shape)
        arg1 = wedge(JX, JY) - XYb
        arg2 = wedge(np.broadcast_to(X, JX.shape), JY) + wedge(JX, np.broadcast_to(Y, JY.shape))
        pxU = ctx.triple_to_two_vector(np.cross(p3, U3))
        pxJU = ctx.triple_to_two_vector(np.cross(p3, np.cross(eps3, U3)))
        rhs = -(_inner_kernel(ctx.gvals, pxU, curvature_two_vector_action(data, arg1))
                + _inner_kernel(ctx.gvals, pxJU, curvature_two_vector_action(data, arg2)))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def mixed_nijenhuis_residual(chart: TwistorChart, point, X, U_fiber, Z,
                             _ctx=None, _N=None, _hv=None) -> float:
    """|h(N(X^h,U),Z^h) - 2 g(J f_* U - f_* J U, X ^ Z)| at the point(s).

    This is the identity itself (valid whether or not f is holomorphic);
    its right side vanishes exactly when the fiber map is holomorphic.
    """
    ctx = _ctx if _ctx is not None else ChartEval(chart, point)
    N = _N if _N is not None else _nijenhuis_values(ctx)
    hv = _hv if _hv is not None else ctx.h_values
    X = np.asarray(X, float)
    Z = np.asarray(Z, float)
    u4, u5 = U_fiber
    t_v, t_w, eps3 = ctx.fiber_tangents()

    Xh = ctx.horizontal_lift_values(X)
    Zh = ctx.horizontal_lift_values(Z)
    U = np.zeros(Xh.shape)
    U[..., IDX_V] = u4
    U[..., IDX_W] = u5
    lhs = np.einsum("...mab,...a,...b,...mc,...c->...", N, Xh, U, hv, Zh)

    phi = ctx.phi.value
    phi_p = ctx.phi_p.value
    rF = np.sqrt(1.0 - phi * phi)
    cw, sw = np.cos(ctx.w), np.sin(ctx.w)
    tS2_v = np.stack([np.ones_like(phi), -phi * cw / rF, -phi * sw / rF], axis=-1)
    tS2_w = np.stack([np.zeros_like(phi), -rF * sw, rF * cw], axis=-1)
    F3 = np.stack([phi, rF * cw, rF * sw], axis=-1)

    fstar_U = (phi_p * u4)[..., None] * tS2_v + u5 * tS2_w
    J_fstar_U = np.cross(F3, fstar_U)
    U3 = u4 * t_v + u5 * t_w
    JU3 = np.cross(eps3, U3)
    c_v = np.einsum("...i,...i->...", JU3, t_v) / np.einsum("...i,...i->...", t_v, t_v)
    c_w = np.einsum("...i,...i->...", JU3, t_w) / np.einsum("...i,...i->...", t_w, t_w)
    fstar_JU = (phi_p * c_v)[..., None] * tS2_v + c_w[..., None] * tS2_w

    diff2 = ctx.triple_to_two_vector(J_fstar_U - fstar_JU)
    XZ = np.einsum("i,j->ij", X, Z) - np.einsum("j,i->ij", X, Z)
    rhs = 2.0 * _inner_kernel(ctx.gvals, diff2, np.broadcast_to(XZ, diff2.shape))
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# differential forms on the chart
# ---------------------------------------------------------------------------

@dataclass
class FormValue:
    """Antisymmetric coordinate components of a k-form at chart point(s)."""

    degree: int
    comps: dict  # sorted index tuple -> coefficient (scalar or batch array)

    def max_abs(self) -> float:
        if not self.comps:
            return 0.0
        return float(max(np.max(np.abs(c)) for c in self.comps.values()))

    def coefficient(self, idx):
        key = tuple(sorted(idx))
        sign = _perm_sign(tuple(idx))
        return sign * self.comps.get(key, 0.0)

    def __call__(self, *vectors):
        """Evaluate on ``degree`` many 6-vectors (full antisymmetrization)."""
        if len(vectors) != self.degree:
            raise UsageError(f"form of degree {self.degree} takes {self.degree} vectors")
        vs = [np.asarray(v, float) for v in vectors]
        total = 0.0
        for perm in itertools.permutations(range(self.degree)):
            sign = _perm_sign(perm)
            for idx, c in self.comps.items():
                term = c
                for slot, i in enumerate(idx):
                    term = term * vs[perm[slot]][..., i]
                total = total + sign * term
        return total


class FormField:
    """A k-form field: a builder mapping a ChartEval to jet components."""

    def __init__(self, degree: int, builder: Callable):
        self.degree = degree
        self.builder = builder

    def at(self, ctx: ChartEval) -> dict:
        return self.builder(ctx)


def _perm_sign(seq) -> int:
    sign = 1
    seq = list(seq)
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _merge_keys(a, b):
    if set(a) & set(b):
        return None, 0
    combined = a + b
    return tuple(sorted(combined)), _perm_sign(combined)


def wedge_dicts(c1: dict, c2: dict) -> dict:
    out = {}
    for ka, va in c1.items():
        for kb, vb in c2.items():
            key, sign = _merge_keys(ka, kb)
            if key is None:
                continue
            term = (sign * 1.0) * (va * vb)
            out[key] = out.get(key, 0.0) + term
    return {k: v for k, v in out.items()}


def d_dict(comps: dict, to_values: bool = True) -> dict:
    """Exterior derivative of jet-valued components."""
    out = {}
    for key, cj in comps.items():
        for k in range(TOTAL_DIM):
            if k in key:
                continue
            dkc = cj.deriv(k) if isinstance(cj, jets.Jet) else None
            if dkc is None:
                raise UsageError("exterior derivative needs jet-valued components")
            new, sign = _merge_keys((k,), key)
            val = dkc.value if to_values else dkc
            out[new] = out.get(new, 0.0) + sign * val
    return out


def exterior_derivative(form_field: FormField, chart: TwistorChart, point) -> FormValue:
    """d of a form field, evaluated at the point(s)."""
    if form_field.degree > 5:
        raise UsageError("cannot take d of a form of degree > 5")
    ctx = ChartEval(chart, point)
    comps = form_field.at(ctx)
    return FormValue(form_field.degree + 1, d_dict(comps))


# ---------------------------------------------------------------------------
# the Hermitian family Omega_h / Omega_{a,b}
# ---------------------------------------------------------------------------

def _tau_comps(ctx: ChartEval) -> dict:
    """Tautological 2-form tau(A,B) = 2 g(F(p), dpi A ^ dpi B) as jets."""
    gPg = np.empty((4, 4), dtype=object)
    for i in range(4):
        for j in range(4):
            acc = None
            for m in range(4):
                for n in range(4):
                    t = ctx.g[i, m] * ctx.P_img[m, n] * ctx.g[n, j]
                    acc = t if acc is None else acc + t
            gPg[i, j] = acc
    return {(i, j): gPg[i, j] for i in range(4) for j in range(i + 1, 4)}


def _fiber_area_comps(ctx: ChartEval, weight) -> dict:
    """weight * f^*((dw + eps beta) ^ dv) with the outward orientation."""
    wphi = weight * ctx.phi_p
    out = {(IDX_V, IDX_W): -1.0 * wphi}
    for k in range(4):
        out[(k, IDX_V)] = (ctx.eps * 1.0) * ctx.beta[k] * wphi
    return out


def omega_ab_field(h_func: Optional[Callable], a: float = 1.0, b: float = 1.0,
                   weight_mode: str = "fiber") -> FormField:
    """Omega = a tau + b e^{h} omega_FS as a 2-form field.

    ``h_func`` takes the fiber height jet (the sphere coordinate through the
    fiber map) and returns a jet; None means h = 0.  ``weight_mode``
    'x_dependent' replaces e^{h} by e^{x0} (negative control: the
    balancedness proof needs a rotation-invariant fiber weight).
    """
    if a <= 0 or b <= 0:
        raise InputError("cone parameters a, b must be positive")

    def build(ctx: ChartEval) -> dict:
        comps = {k: (a * 1.0) * v for k, v in _tau_comps(ctx).items()}
        if weight_mode == "fiber":
            hval = h_func(ctx.phi) if h_func is not None else None
            weight = jets.exp(hval) * b if hval is not None else ctx.one * b
        elif weight_mode == "x_dependent":
            xj = jets.Jet.variable(ctx.space, 0, ctx.points[:, 0])
            weight = jets.exp(xj) * b
        else:
            raise InputError(f"unknown weight_mode '{weight_mode}'")
        for k, v in _fiber_area_comps(ctx, weight).items():
            comps[k] = comps.get(k, ctx.zero) + v
        return comps

    return FormField(2, build)


def omega_h(chart: TwistorChart, h_func: Optional[Callable], a: float, b: float,
            point) -> FormValue:
    """Evaluate Omega_{a,b,h} at the point(s)."""
    ctx = ChartEval(chart, point)
    comps = omega_ab_field(h_func, a, b).at(ctx)
    return FormValue(2, {k: np.asarray(v.value) for k, v in comps.items()})


def hermitian_positivity(chart: TwistorChart, points, h_func=None, a=1.0, b=1.0,
                         n_vectors: int = 50, seed: int = 0) -> float:
    """min over random v != 0 of Omega(v, Jv); positive for a Hermitian form."""
    ctx = ChartEval(chart, points)
    comps = omega_ab_field(h_func, a, b).at(ctx)
    fv = FormValue(2, {k: np.asarray(v.value) for k, v in comps.items()})
    Jv = ctx.J_values
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(n_vectors):
        vec = rng.normal(size=TOTAL_DIM)
        vec /= np.linalg.norm(vec)
        jvec = np.einsum("...ma,a->...m", Jv, vec)
        vals = fv(np.broadcast_to(vec, jvec.shape), jvec)
        worst = min(worst, float(np.min(vals)))
    return worst


@dataclass
class BalancedReport:
    max_residual: float          # sup |d(Omega_h^2)| components
    proof_step_residual: float   # sup |d(e^h omega_FS) ^ tau| (diagnostic)
    points_tested: int
    h_label: str


def balanced_check(chart: TwistorChart, h_func: Optional[Callable],
                   sample_count: int = 30, seed: int = 0, a: float = 1.0,
                   b: float = 1.0, weight_mode: str = "fiber",
                   h_label: str = "h") -> BalancedReport:
    """Verify d(Omega_h^2) = 0 at sampled points (the balanced condition).

    Also reports the non-closedness of the weighted fiber form wedged with
    tau, the quantity whose cancellation structure carries the proof.
    """
    pts = chart.sample(sample_count, seed)
    ctx = ChartEval(chart, pts)
    comps = omega_ab_field(h_func, a, b, weight_mode).at(ctx)
    omega2 = wedge_dicts(comps, comps)
    d_omega2 = d_dict(omega2)
    max_resid = max(float(np.max(np.abs(v))) for v in d_omega2.values()) if d_omega2 else 0.0

    fo_comps = {k: v for k, v in comps.items() if IDX_V in k or IDX_W in k}
    d_fo = d_dict(fo_comps)  # 3-form values
    tau_vals = {k: np.asarray(v.value) for k, v in _tau_comps(ctx).items()}
    proof = wedge_dicts(d_fo, tau_vals)
    proof_resid = max(float(np.max(np.abs(v))) for v in proof.values()) if proof else 0.0
    return BalancedReport(max_resid, proof_resid, sample_count, h_label)


@dataclass
class ConeReport:
    c1: float
    c2: float
    c1_rel_variation: float
    c2_rel_variation: float
    points_tested: int


def cone_wedge_constants(chart: TwistorChart, a: float, b: float,
                         sample_count: int = 50, seed: int = 0) -> ConeReport:
    """c1 = (Omega^2 ^ omega_FS)/vol_h and c2 = (Omega^2 ^ tau)/vol_h.

    Both are constant over the chart; with the conventions here (omega^2 =
    2 vol_g on the base, unit-sphere fiber area) c1 = 2 a^2 and c2 = 4 a b.
    """
    if a <= 0 or b <= 0:
        raise InputError("cone parameters a, b must be positive")
    pts = chart.sample(sample_count, seed)
    ctx = ChartEval(chart, pts)
    comps = omega_ab_field(None, a, b).at(ctx)
    vals = {k: np.asarray(v.value) for k, v in comps.items()}
    omega2 = wedge_dicts(vals, vals)
    tau_vals = {k: np.asarray(v.value) for k, v in _tau_comps(ctx).items()}
    fs_vals = {k: np.asarray(v.value) for k, v in _fiber_area_comps(ctx, ctx.one).items()}
    top = tuple(range(TOTAL_DIM))
    hv = ctx.h_values
    vol = -np.sqrt(np.linalg.det(hv))  # see module docstring on orientation
    w1 = wedge_dicts(omega2, fs_vals).get(top, 0.0)
    w2 = wedge_dicts(omega2, tau_vals).get(top, 0.0)
    c1 = w1 / vol
    c2 = w2 / vol

    def relvar(c):
        c = np.atleast_1d(c)
        return float((np.max(c) - np.min(c)) / max(abs(np.mean(c)), 1e-300))

    return ConeReport(float(np.mean(c1)), float(np.mean(c2)),
                      relvar(c1), relvar(c2), sample_count)
