"""Kahler metrics from potentials, adapted frames, and the U(1) connection.

A potential Phi on a 2-complex-dimensional chart (z^1, z^2), with
z^k = x^{2k} + i x^{2k+1} (0-based reals), determines

* the Riemannian metric g from the complex Hessian d^2 Phi / dz dzbar,
* the constant complex structure I of the chart,
* the Kahler form omega(X, Y) = g(I X, Y).

The orthonormal frame construction keeps e2 = I e1 and e4 = I e3 exactly,
so s1 = e1^e2 + e3^e4 is the metric dual of omega and the self-dual frame
(s1, s2, s3) diagonalizes the U(1) holonomy: nabla s2 = beta s3,
nabla s3 = -beta s2 for a 1-form beta computed here from frame jets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets
from .errors import FrameError, GeometryError
from .geometry import (
    DIM,
    ChartDomain,
    MetricField,
    TwoVector,
    christoffel_jets,
    curvature_data,
    curvature_two_vector_action,
    sd_basis,
    values_of,
    _inner_kernel,
)

# constant complex structure of a potential chart: I d_{2a} = d_{2a+1}
I_MATRIX = np.zeros((DIM, DIM))
for _a in (0, 1):
    I_MATRIX[2 * _a + 1, 2 * _a] = 1.0
    I_MATRIX[2 * _a, 2 * _a + 1] = -1.0


class KahlerPotentialMetric(MetricField):
    """Metric derived from a Kahler potential, with I and omega attached."""

    def __init__(self, chart: ChartDomain, potential, name="potential", params=None):
        super().__init__(chart, None, name=name, params=params)
        self.potential = potential
        self.I = I_MATRIX

    def jets_at(self, x, order: int):
        x = np.asarray(x, dtype=float)
        xj = jets.seed_raw(x, order + 2)
        phi = self.potential(xj)
        # second partials of Phi as jets of the requested order
        d2 = np.empty((DIM, DIM), dtype=object)
        for a in range(DIM):
            da = phi.deriv(a)
            for b in range(a, DIM):
                d2[a, b] = da.deriv(b)
                d2[b, a] = d2[a, b]
        g = np.empty((DIM, DIM), dtype=object)
        for a in range(2):
            for b in range(2):
                xa, ya, xb, yb = 2 * a, 2 * a + 1, 2 * b, 2 * b + 1
                re = (d2[xa, xb] + d2[ya, yb]) * 0.25
                im = (d2[xa, yb] - d2[ya, xb]) * 0.25
                g[xa, xb] = re
                g[ya, yb] = re
                g[xa, yb] = im
                g[yb, xa] = im
                g[ya, xb] = -1.0 * im
                g[xb, ya] = -1.0 * im
        xj_out = jets.seed_raw(x, order)
        return xj_out, g

    def omega_values(self, x):
        g = self.values_at(x)
        return np.einsum("ki,...kj->...ij", self.I, g)


def metric_from_potential(potential, chart: ChartDomain, name="potential", params=None,
                          validate_points=None) -> KahlerPotentialMetric:
    """Build a potential metric; optionally validate SPD at given points."""
    m = KahlerPotentialMetric(chart, potential, name=name, params=params)
    if validate_points is not None:
        for x in np.atleast_2d(validate_points):
            g = m.values_at(x)
            ev = np.linalg.eigvalsh(g)
            if np.any(ev <= 0):
                raise GeometryError(f"potential Hessian is degenerate at x={x} (eigenvalues {ev})")
    return m


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------

def _u_of(xj):
    return xj[0] * xj[0] + xj[1] * xj[1] + xj[2] * xj[2] + xj[3] * xj[3]


def _flat(params):
    chart = ChartDomain([[-1, 1]] * 4)
    return metric_from_potential(_u_of, chart, name="flat")


def _fubini_study(params):
    chart = ChartDomain([[-0.7, 0.7]] * 4)
    return metric_from_potential(lambda xj: jets.log(1.0 + _u_of(xj)), chart, name="fubini_study")


def _eguchi_hanson(params):
    a = float(params.get("a", 1.0))
    a2, a4 = a * a, a**4

    def phi(xj):
        u = _u_of(xj)
        r = jets.sqrt(u * u + a4)
        return r - a2 * jets.log(a2 + r) + a2 * jets.log(u)

    chart = ChartDomain([[0.25, 1.05]] * 4, exclusion=lambda x: np.sum(x * x) < 0.1)
    return metric_from_potential(phi, chart, name="eguchi_hanson", params={"a": a})


def _burns(params):
    m = float(params.get("m", 1.0))
    if m <= 0:
        raise GeometryError("burns parameter m must be positive")

    def phi(xj):
        u = _u_of(xj)
        return u + m * jets.log(u)

    chart = ChartDomain([[0.25, 1.05]] * 4, exclusion=lambda x: np.sum(x * x) < 0.1)
    return metric_from_potential(phi, chart, name="burns", params={"m": m})


def _conformal_hermitian(params):
    """I-compatible but non-Kahler control metric e^{2 x0} * delta."""
    chart = ChartDomain([[-0.5, 0.5]] * 4)

    def fn(xj):
        c = jets.exp(2.0 * xj[0])
        zero = c * 0.0
        return [[c if i == j else zero for j in range(DIM)] for i in range(DIM)]

    m = MetricField(chart, fn, name="conformal_hermitian")
    m.I = I_MATRIX
    m.omega_values = lambda x: np.einsum("ki,...kj->...ij", I_MATRIX, m.values_at(x))
    return m


FIXTURES = {
    "flat": _flat,
    "fubini_study": _fubini_study,
    "eguchi_hanson": _eguchi_hanson,
    "burns": _burns,
    "conformal_hermitian": _conformal_hermitian,
}


def get_fixture(name: str, **params) -> MetricField:
    if name not in FIXTURES:
        raise GeometryError(f"unknown metric fixture '{name}' (have {sorted(FIXTURES)})")
    return FIXTURES[name](params)


# ---------------------------------------------------------------------------
# adapted frames
# ---------------------------------------------------------------------------

@dataclass
class AdaptedFrame:
    """Orthonormal frame with e2 = I e1, e4 = I e3, as jets and values.

    ``jets_`` is a (4, 4) object array: row a holds the components of e_a.
    """

    jets_: np.ndarray
    matrix: np.ndarray

    def sd_jets(self):
        """(s1, s2, s3) self-dual basis as (4,4) object arrays of jets."""
        e = self.jets_

        def wedge(a, b):
            out = np.empty((DIM, DIM), dtype=object)
            for i in range(DIM):
                for j in range(DIM):
                    out[i, j] = e[a, i] * e[b, j] - e[a, j] * e[b, i]
            return out

        def add(p, q):
            out = np.empty((DIM, DIM), dtype=object)
            for i in range(DIM):
                for j in range(DIM):
                    out[i, j] = p[i, j] + q[i, j]
            return out

        s1 = add(wedge(0, 1), wedge(2, 3))
        s2 = add(wedge(0, 2), wedge(3, 1))
        s3 = add(wedge(0, 3), wedge(1, 2))
        return s1, s2, s3


def _jet_dot(gjets, u, v):
    acc = None
    for i in range(DIM):
        for j in range(DIM):
            term = gjets[i, j] * u[i] * v[j]
            acc = term if acc is None else acc + term
    return acc


def adapted_frame(metric: MetricField, x, order: int = 2) -> AdaptedFrame:
    """Gram-Schmidt frame seeded on (d_1, I d_1, d_3, I d_3); smooth in x."""
    _, gjets = metric.jets_at(x, order)
    I = getattr(metric, "I", I_MATRIX)
    zero = gjets[0, 0] * 0.0

    def apply_I(u):
        return [sum((u[k] * I[i, k] for k in range(DIM) if I[i, k] != 0.0), zero) for i in range(DIM)]

    e1 = [zero + (1.0 if i == 0 else 0.0) for i in range(DIM)]
    n1 = jets.sqrt(_jet_dot(gjets, e1, e1))
    e1 = [c / n1 for c in e1]
    e2 = apply_I(e1)
    v = [zero + (1.0 if i == 2 else 0.0) for i in range(DIM)]
    for e in (e1, e2):
        c = _jet_dot(gjets, v, e)
        v = [vi - c * ei for vi, ei in zip(v, e)]
    nv_sq = _jet_dot(gjets, v, v)
    if np.any(nv_sq.value < 1e-20):
        raise FrameError(f"frame seed degenerate at x={x}")
    nv = jets.sqrt(nv_sq)
    e3 = [c / nv for c in v]
    e4 = apply_I(e3)
    fj = np.empty((DIM, DIM), dtype=object)
    for i, row in enumerate((e1, e2, e3, e4)):
        for j in range(DIM):
            fj[i, j] = row[j]
    return AdaptedFrame(fj, values_of(fj))


# ---------------------------------------------------------------------------
# the connection 1-form on Lambda2+
# ---------------------------------------------------------------------------

@dataclass
class ConnectionOneForm:
    """beta with nabla s2 = beta s3, nabla s3 = -beta s2; jets + values."""

    jets_: np.ndarray  # shape (4,) object array, component beta_k
    values: np.ndarray


def _two_vector_nabla(gamma, s, k):
    """(nabla_k s)^{ij} for a 2-vector jet field s (derivation action)."""
    order = s[0, 1].space.order - 1
    out = np.empty((DIM, DIM), dtype=object)
    for i in range(DIM):
        for j in range(DIM):
            acc = s[i, j].deriv(k)
            for m in range(DIM):
                acc = acc + gamma[i, k, m] * s[m, j].truncate(order) + gamma[j, k, m] * s[i, m].truncate(order)
            out[i, j] = acc
    return out


def _inner_jets(gjets, a, b):
    acc = None
    for i in range(DIM):
        for j in range(DIM):
            for k in range(DIM):
                for l in range(DIM):
                    t = a[i, j] * b[k, l] * gjets[i, k] * gjets[j, l]
                    acc = t if acc is None else acc + t
    return acc * 0.25


def beta_form(metric: MetricField, frame: AdaptedFrame, x, order: int = 2) -> ConnectionOneForm:
    """beta_k = < nabla_k s2, s3 > as jets of order ``order - 1``."""
    _, gjets = metric.jets_at(x, order)
    gamma = christoffel_jets(gjets)
    s1, s2, s3 = frame.sd_jets()
    lower = order - 1
    g_low = np.empty((DIM, DIM), dtype=object)
    s3_low = np.empty((DIM, DIM), dtype=object)
    for i in range(DIM):
        for j in range(DIM):
            g_low[i, j] = gjets[i, j].truncate(lower)
            s3_low[i, j] = s3[i, j].truncate(lower)
    comps = np.empty(DIM, dtype=object)
    for k in range(DIM):
        ns2 = _two_vector_nabla(gamma, s2, k)
        comps[k] = _inner_jets(g_low, ns2, s3_low)
    vals = np.stack([np.asarray(c.value, dtype=float) for c in comps], axis=-1)
    return ConnectionOneForm(comps, vals)


# ---------------------------------------------------------------------------
# Kahler certification helpers
# ---------------------------------------------------------------------------

def nabla_omega_residual(metric: MetricField, x) -> float:
    """sup |(nabla_k omega)_{ij}|: zero iff the structure is Kahler."""
    _, gjets = metric.jets_at(x, 1)
    I = getattr(metric, "I", I_MATRIX)
    gamma = values_of(christoffel_jets(gjets))
    omega = np.empty((DIM, DIM), dtype=object)
    for i in range(DIM):
        for j in range(DIM):
            acc = None
            for k in range(DIM):
                if I[k, i] != 0.0:
                    t = gjets[k, j] * I[k, i]
                    acc = t if acc is None else acc + t
            omega[i, j] = acc
    om = values_of(omega)
    dom = np.empty(om.shape[:-2] + (DIM, DIM, DIM))
    for k in range(DIM):
        for i in range(DIM):
            for j in range(DIM):
                dom[..., k, i, j] = omega[i, j].deriv(k).value
    nab = (
        dom
        - np.einsum("...mki,...mj->...kij", gamma, om)
        - np.einsum("...mkj,...im->...kij", gamma, om)
    )
    return float(np.max(np.abs(nab)))


def d_omega_residual(metric: MetricField, x) -> float:
    """sup |(d omega)_{kij}| over antisymmetrized index triples."""
    _, gjets = metric.jets_at(x, 1)
    I = getattr(metric, "I", I_MATRIX)
    omega = np.empty((DIM, DIM), dtype=object)
    for i in range(DIM):
        for j in range(DIM):
            acc = None
            for k in range(DIM):
                if I[k, i] != 0.0:
                    t = gjets[k, j] * I[k, i]
                    acc = t if acc is None else acc + t
            omega[i, j] = acc
    worst = 0.0
    for k in range(DIM):
        for i in range(DIM):
            for j in range(DIM):
                val = omega[i, j].deriv(k).value + omega[j, k].deriv(i).value + omega[k, i].deriv(j).value
                worst = max(worst, float(np.max(np.abs(val))))
    return worst


def curvature_s_residuals(metric: MetricField, x):
    """(|Rhat(s2)|, |Rhat(s3)|, <Rhat(s1), s1>) at x; Kahler kills the first two."""
    data = curvature_data(metric, x)
    frame = adapted_frame(metric, x, order=1)
    basis = sd_basis(frame.matrix, data.gvals)
    s1, s2, s3 = basis[0], basis[1], basis[2]
    out = []
    for s in (s2, s3):
        img = curvature_two_vector_action(data, s.comps)
        out.append(np.sqrt(np.abs(_inner_kernel(data.gvals, img, img))))
    r1 = curvature_two_vector_action(data, s1.comps)
    out.append(_inner_kernel(data.gvals, r1, s1.comps))
    return out[0], out[1], out[2]
