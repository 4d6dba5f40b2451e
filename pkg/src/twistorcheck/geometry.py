"""Riemannian geometry on 4-dimensional charts.

Evaluates metrics and their curvature through jet arithmetic: Christoffel
symbols, the full Riemann tensor, the half-determinant inner product on
2-vectors, the Hodge star, self-dual / anti-self-dual bases, and the
curvature operator in block form.

Conventions (fixed once, validated by the test suite):

* curvature sign: R(X,Y) = nabla_X nabla_Y - nabla_Y nabla_X - nabla_[X,Y];
  with this choice the reference Fubini-Study chart has Scal = +24.
* Rlow[i,j,k,l] = g(R(d_i, d_j) d_k, d_l).
* 2-vector inner product: g(X^Y, Z^W) = (1/2) det of the 2x2 Gram matrix;
  components store B^{ij} with b = (1/2) B^{ij} d_i ^ d_j (antisymmetric).
* the curvature operator carried by :class:`CurvatureOperator` is the block
  form W+- + (Scal/12) Id with off-diagonal traceless Ricci; as an
  endomorphism it equals -1/2 times the operator dual to the 2-form
  curvature under the Lambda2+ cross product (see :func:`rho_apply`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import jets
from .errors import ConfigurationError, FrameError, GeometryError, UsageError

DIM = 4

# permutation symbol on 4 indices, built once
_EPS4 = np.zeros((4, 4, 4, 4))
for _p in __import__("itertools").permutations(range(4)):
    _sign = 1.0
    _pl = list(_p)
    for _i in range(4):
        for _j in range(_i + 1, 4):
            if _pl[_i] > _pl[_j]:
                _sign = -_sign
    _EPS4[_p] = _sign


class ChartDomain:
    """A coordinate box with an optional excluded region.

    ``exclusion`` returns True on points that must be rejected (e.g. the
    puncture of a Burns chart).  Sampling shrinks the box by ``margin``
    (a fraction of each side) and rejects excluded points.
    """

    def __init__(self, box, exclusion: Optional[Callable] = None, margin: float = 1e-2,
                 orientation: float = +1.0):
        self.box = np.asarray(box, dtype=float)
        if self.box.shape != (DIM, 2) or np.any(self.box[:, 1] <= self.box[:, 0]):
            raise ConfigurationError("box must be 4 nonempty intervals")
        self.exclusion = exclusion
        self.margin = margin
        self.orientation = orientation

    def contains(self, x) -> bool:
        x = np.asarray(x)
        inside = np.all(x >= self.box[:, 0]) and np.all(x <= self.box[:, 1])
        if inside and self.exclusion is not None:
            return not bool(self.exclusion(x))
        return inside

    def sample(self, n: int, rng) -> np.ndarray:
        """Draw ``n`` admissible points; deterministic for a seeded rng."""
        if isinstance(rng, (int, np.integer)):
            rng = np.random.default_rng(rng)
        lo = self.box[:, 0] + self.margin * (self.box[:, 1] - self.box[:, 0])
        hi = self.box[:, 1] - self.margin * (self.box[:, 1] - self.box[:, 0])
        out = np.empty((n, DIM))
        for i in range(n):
            for _ in range(1000):
                x = lo + (hi - lo) * rng.uniform(size=DIM)
                if self.exclusion is None or not self.exclusion(x):
                    out[i] = x
                    break
            else:
                raise GeometryError("could not sample an admissible chart point")
        return out


class MetricField:
    """Smooth metric components over a chart, evaluable on jets.

    ``component_fn`` maps a tuple of 4 coordinate jets to a nested 4x4 list
    of jets g_{ij}.  Subclasses (potential-derived metrics) may override
    :meth:`jets_at` entirely.
    """

    def __init__(self, chart: ChartDomain, component_fn, name: str = "custom",
                 params: Optional[dict] = None):
        self.chart = chart
        self._fn = component_fn
        self.name = name
        self.params = dict(params or {})

    def jets_at(self, x, order: int):
        """(coordinate jets, 4x4 object array of g_{ij} jets) at ``x``."""
        xj = jets.seed_raw(np.asarray(x, dtype=float), order)
        raw = self._fn(xj)
        g = np.empty((DIM, DIM), dtype=object)
        for i in range(DIM):
            for j in range(DIM):
                g[i, j] = raw[i][j]
        return xj, g

    def values_at(self, x):
        _, g = self.jets_at(x, 0)
        return values_of(g)


def values_of(obj_arr: np.ndarray) -> np.ndarray:
    """Collect .value of an object array of jets, batch axes leading."""
    flat = [j.value for j in obj_arr.ravel()]
    stacked = np.stack([np.asarray(v, dtype=float) for v in flat], axis=-1)
    return stacked.reshape(stacked.shape[:-1] + obj_arr.shape)


def jet_matrix_inverse(m: np.ndarray) -> np.ndarray:
    """Invert a square object-matrix of jets by Gauss-Jordan (no pivoting).

    Valid for matrices whose leading principal minors stay nonsingular at
    the evaluation point (SPD metrics qualify).
    """
    n = m.shape[0]
    a = np.empty((n, 2 * n), dtype=object)
    one = m[0, 0] * 0 + 1.0
    for i in range(n):
        for j in range(n):
            a[i, j] = m[i, j]
            a[i, n + j] = one if i == j else one * 0.0
    for col in range(n):
        piv = 1.0 / a[col, col]
        for j in range(col, 2 * n):
            a[col, j] = a[col, j] * piv
        for row in range(n):
            if row == col:
                continue
            f = a[row, col]
            for j in range(col, 2 * n):
                a[row, j] = a[row, j] - f * a[col, j]
    return a[:, n:].copy()


def check_spd(gvals: np.ndarray, x=None, tol: float = 0.0):
    """Raise GeometryError (naming the point) unless g is SPD."""
    ev = np.linalg.eigvalsh(gvals)
    if np.any(ev <= tol):
        bad = np.argwhere(ev <= tol)
        where = "" if x is None else f" at x={np.asarray(x)[bad[0][0]] if np.asarray(x).ndim > 1 else x}"
        raise GeometryError(f"metric is not positive definite{where} (eigenvalues {ev[tuple(bad[0][:-1])]})")


# ---------------------------------------------------------------------------
# Christoffel symbols and curvature
# ---------------------------------------------------------------------------

def christoffel_jets(gjets: np.ndarray) -> np.ndarray:
    """Gamma^k_{ij} as jets one order below the metric jets.

    Works for any dimension (also used on the 6x6 total-space metric).
    """
    n = gjets.shape[0]
    order = gjets[0, 0].space.order
    if order < 1:
        raise ConfigurationError("christoffel needs metric jets of order >= 1")
    ginv = jet_matrix_inverse(gjets)
    dg = np.empty((n, n, n), dtype=object)  # dg[i][j][l] = d_i g_{jl}
    for i in range(n):
        for j in range(n):
            for l in range(n):
                dg[i, j, l] = gjets[j, l].deriv(i)
    ginv_low = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            ginv_low[i, j] = ginv[i, j].truncate(order - 1)
    gamma = np.empty((n, n, n), dtype=object)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                acc = None
                for l in range(n):
                    term = ginv_low[k, l] * (dg[i, j, l] + dg[j, i, l] - dg[l, i, j])
                    acc = term if acc is None else acc + term
                gamma[k, i, j] = acc * 0.5
    return gamma


def christoffel(metric: MetricField, x) -> np.ndarray:
    """Levi-Civita symbols Gamma^k_{ij} at x (batch axes leading)."""
    _, gjets = metric.jets_at(x, 1)
    gvals = values_of(gjets)
    check_spd(gvals, x)
    return values_of(christoffel_jets(gjets))


def riemann_scalar(metric: MetricField, x, order: int = 2):
    """Full curvature at x: (Rlow, Ric, Scal); needs order >= 2 jets."""
    if order < 2:
        raise ConfigurationError("curvature needs jets of order >= 2")
    _, gjets = metric.jets_at(x, order)
    gvals = values_of(gjets)
    check_spd(gvals, x)
    return _riemann_from_gjets(gjets, gvals)


def _riemann_from_gjets(gjets, gvals):
    gamma_jets = christoffel_jets(gjets)
    gamma = values_of(gamma_jets)
    dgamma = np.empty(gamma.shape[:-3] + (DIM,) * 4)  # [..., i, l, j, k] = d_i Gamma^l_{jk}
    for i in range(DIM):
        for l in range(DIM):
            for j in range(DIM):
                for k in range(DIM):
                    dgamma[..., i, l, j, k] = gamma_jets[l, j, k].deriv(i).value
    # R(d_i, d_j) d_k = Rup[..., l, k, i, j] d_l
    rup = (
        np.einsum("...iljk->...lkij", dgamma)
        - np.einsum("...jlik->...lkij", dgamma)
        + np.einsum("...lim,...mjk->...lkij", gamma, gamma)
        - np.einsum("...ljm,...mik->...lkij", gamma, gamma)
    )
    rlow = np.einsum("...lm,...mkij->...ijkl", gvals, rup)
    ric = np.einsum("...kjki->...ij", rup)
    ginv = np.linalg.inv(gvals)
    scal = np.einsum("...ij,...ij->...", ginv, ric)
    return rlow, ric, scal


@dataclass
class CurvatureData:
    """Evaluated curvature bundle reused across higher-level checks."""

    x: np.ndarray
    gvals: np.ndarray
    ginv: np.ndarray
    gjets: np.ndarray
    rlow: np.ndarray
    ric: np.ndarray
    scal: np.ndarray
    rup: np.ndarray = None


def curvature_data(metric: MetricField, x, order: int = 2) -> CurvatureData:
    _, gjets = metric.jets_at(x, order)
    gvals = values_of(gjets)
    check_spd(gvals, x)
    rlow, ric, scal = _riemann_from_gjets(gjets, gvals)
    ginv = np.linalg.inv(gvals)
    rup = np.einsum("...lm,...ijkm->...lkij", ginv, rlow)
    return CurvatureData(np.asarray(x, float), gvals, ginv, gjets, rlow, ric, scal, rup)


# ---------------------------------------------------------------------------
# 2-vectors
# ---------------------------------------------------------------------------

class TwoVector:
    """Element of Lambda^2 TM in coordinate components B^{ij} = -B^{ji}."""

    __slots__ = ("comps",)

    def __init__(self, comps):
        comps = np.asarray(comps, dtype=float)
        if comps.shape[-2:] != (DIM, DIM):
            raise UsageError("two-vector components must be 4x4")
        if np.max(np.abs(comps + np.swapaxes(comps, -1, -2))) > 1e-12 * max(1.0, np.max(np.abs(comps))):
            raise UsageError("two-vector components must be antisymmetric")
        self.comps = comps

    @staticmethod
    def wedge(X, Y) -> "TwoVector":
        X = np.asarray(X, float)
        Y = np.asarray(Y, float)
        return TwoVector(np.einsum("...i,...j->...ij", X, Y) - np.einsum("...j,...i->...ij", X, Y))

    def __add__(self, other):
        return TwoVector(self.comps + other.comps)

    def __sub__(self, other):
        return TwoVector(self.comps - other.comps)

    def __mul__(self, s):
        return TwoVector(self.comps * s)

    __rmul__ = __mul__

    def __neg__(self):
        return TwoVector(-self.comps)


def _inner_kernel(gvals, B1, B2):
    return 0.25 * np.einsum("...ij,...kl,...ik,...jl->...", B1, B2, gvals, gvals)


def two_vector_inner(metric: MetricField, x, b1: TwoVector, b2: TwoVector):
    """Half-determinant metric on 2-vectors, extended bilinearly."""
    g = metric.values_at(x)
    return _inner_kernel(g, b1.comps, b2.comps)


def _star_kernel(gvals, B, orientation=+1.0):
    low = np.einsum("...ik,...kl,...lj->...ij", gvals, B, gvals)
    det = np.linalg.det(gvals)
    return orientation * np.einsum("ijkl,...kl->...ij", _EPS4, low) / (2.0 * np.sqrt(det)[..., None, None])


def hodge_star_2(metric: MetricField, x, b: TwoVector, orientation: float | None = None):
    """Hodge star on 2-vectors; an involutive isometry in dimension 4."""
    g = metric.values_at(x)
    if orientation is None:
        orientation = metric.chart.orientation
    return TwoVector(_star_kernel(g, b.comps, orientation))


def sd_basis(frame, gvals=None):
    """Orthonormal basis (s1,s2,s3,t1,t2,t3) of Lambda2+ + Lambda2-.

    ``frame`` is an object with a ``matrix`` attribute (rows = frame vector
    components) or a plain (...,4,4) array.  When metric values are passed,
    orthonormality of the frame is validated to 1e-10.
    """
    E = frame.matrix if hasattr(frame, "matrix") else np.asarray(frame, float)
    if gvals is not None:
        gram = np.einsum("...ai,...ij,...bj->...ab", E, gvals, E)
        resid = np.max(np.abs(gram - np.eye(DIM)))
        if resid > 1e-10:
            raise FrameError(f"frame is not orthonormal (Gram residual {resid:.3e})")
    e = [E[..., a, :] for a in range(DIM)]
    w = TwoVector.wedge
    s1 = w(e[0], e[1]) + w(e[2], e[3])
    s2 = w(e[0], e[2]) + w(e[3], e[1])
    s3 = w(e[0], e[3]) + w(e[1], e[2])
    t1 = w(e[0], e[1]) - w(e[2], e[3])
    t2 = w(e[0], e[2]) - w(e[3], e[1])
    t3 = w(e[0], e[3]) - w(e[1], e[2])
    return s1, s2, s3, t1, t2, t3


# ---------------------------------------------------------------------------
# Curvature acting on 2-vectors
# ---------------------------------------------------------------------------

def curvature_two_vector_action(data: CurvatureData, v: np.ndarray) -> np.ndarray:
    """Endomorphism dual to the connection curvature on Lambda2 ("rho-dual").

    Defined by <Rhat(v), w> = (1/4) v^{ij} w^{kl} Rlow_{ijkl} in the
    half-determinant metric; satisfies the cross-product duality checked by
    :func:`rho_apply` tests.  Returns components of Rhat(v).
    """
    x_low = np.einsum("...ij,...ijkl->...kl", v, data.rlow)
    return np.einsum("...ka,...ab,...lb->...kl", data.ginv, x_low, data.ginv)


def curvature_endomorphism(data: CurvatureData, xi: np.ndarray) -> np.ndarray:
    """R(xi) in End(TM): bilinear extension of R(X,Y) over xi = X^Y."""
    return 0.5 * np.einsum("...ij,...lkij->...lk", xi, data.rup)


def rho_apply(metric_or_data, x, xi: TwoVector, v: TwoVector) -> TwoVector:
    """Derivation action rho(xi) v of the curvature on Lambda^2 TM.

    rho(X^Y)(Z^W) = R(X,Y)Z ^ W + Z ^ R(X,Y)W, extended bilinearly in xi.
    """
    data = metric_or_data if isinstance(metric_or_data, CurvatureData) else curvature_data(metric_or_data, x)
    A = curvature_endomorphism(data, xi.comps)
    B = v.comps
    out = np.einsum("...km,...ml->...kl", A, B) - np.einsum("...lm,...mk->...kl", A, B)
    return TwoVector(out)


@dataclass
class CurvatureOperator:
    """6x6 block matrix of the curvature operator on Lambda2+ + Lambda2-."""

    matrix: np.ndarray
    scal: np.ndarray

    @property
    def plus_block(self):
        return self.matrix[..., 0:3, 0:3]

    @property
    def minus_block(self):
        return self.matrix[..., 3:6, 3:6]

    @property
    def ric0(self):
        return self.matrix[..., 0:3, 3:6]

    @property
    def wplus(self):
        pb = self.plus_block
        tr = np.trace(pb, axis1=-2, axis2=-1)
        return pb - (tr[..., None, None] / 3.0) * np.eye(3)

    @property
    def wminus(self):
        mb = self.minus_block
        tr = np.trace(mb, axis1=-2, axis2=-1)
        return mb - (tr[..., None, None] / 3.0) * np.eye(3)

    @property
    def scal_over_12(self):
        return self.scal / 12.0


def curvature_operator(metric_or_data, x, basis) -> CurvatureOperator:
    """Matrix of the curvature operator in an (s1,s2,s3,t1,t2,t3) basis.

    Normalized so the diagonal blocks are W+- + (Scal/12) Id: this is -1/2
    times the rho-dual endomorphism of :func:`curvature_two_vector_action`.
    """
    data = metric_or_data if isinstance(metric_or_data, CurvatureData) else curvature_data(metric_or_data, x)
    comps = [b.comps for b in basis]
    n = len(comps)
    batch = data.scal.shape
    M = np.empty(batch + (n, n))
    for a in range(n):
        va = curvature_two_vector_action(data, comps[a])
        for b in range(n):
            M[..., a, b] = -0.5 * _inner_kernel(data.gvals, va, comps[b])
    return CurvatureOperator(M, data.scal)


def lambda_plus_cross(u3, v3):
    """Cross product on Lambda2+ in an orthonormal (s1,s2,s3) coordinate frame."""
    return np.cross(u3, v3)
