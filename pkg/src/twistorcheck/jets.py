"""Truncated multivariate Taylor ("jet") arithmetic.

Every curvature, connection and exterior-derivative computation in this
package differentiates smooth fields by evaluating them on jets instead of
using finite differences.  A jet stores the raw Taylor coefficients c_alpha
of an expansion f(x0 + t) = sum_alpha c_alpha t^alpha truncated at a fixed
total degree; partial derivatives are recovered exactly (for polynomial
inputs) as c_alpha * alpha!.

Conventions
-----------
* Coefficients are stored densely over all multi-indices of total degree
  <= order, in graded lexicographic order.
* ``extract`` multiplies the raw coefficient by the multi-index factorial,
  so it returns the partial derivative itself.
* Coefficient arrays may carry a trailing batch axis, so one ``Jet`` can
  represent the same field evaluated at many chart points at once.
* Dividing by a jet whose constant term vanishes is an error (no Laurent
  extension).
"""

from __future__ import annotations

import functools
import itertools
import math

import numpy as np

from .errors import ConfigurationError, UsageError

__all__ = [
    "Jet",
    "JetSpace",
    "get_space",
    "seed",
    "extract",
    "exp",
    "log",
    "sqrt",
    "sin",
    "cos",
    "atan",
    "tanh",
    "antiderivative",
]

# Orders 1..3 are the public contract; internal evaluations (e.g. deriving a
# metric from a Kahler potential) sit at caller order + 2.
MAX_ORDER = 6


@functools.lru_cache(maxsize=None)
def get_space(n_vars: int, order: int) -> "JetSpace":
    return JetSpace(n_vars, order)


class JetSpace:
    """Index bookkeeping for jets with ``n_vars`` variables at a fixed order.

    Holds the multi-index enumeration, the truncated-convolution table used
    for products, and per-variable differentiation maps.  Instances are
    cached; always obtain them through :func:`get_space`.
    """

    def __init__(self, n_vars: int, order: int):
        if n_vars < 1:
            raise ConfigurationError(f"n_vars must be >= 1, got {n_vars}")
        if not (0 <= order <= MAX_ORDER):
            raise ConfigurationError(f"jet order must be in 0..{MAX_ORDER}, got {order}")
        self.n_vars = n_vars
        self.order = order
        self.multi_indices = [
            alpha
            for deg in range(order + 1)
            for alpha in itertools.combinations_with_replacement(range(n_vars), deg)
            for alpha in [_tuple_to_alpha(alpha, n_vars)]
        ]
        self.index = {alpha: i for i, alpha in enumerate(self.multi_indices)}
        self.ncoef = len(self.multi_indices)
        self.degrees = np.array([sum(a) for a in self.multi_indices])
        self._factorials = np.array(
            [float(np.prod([math.factorial(k) for k in a])) for a in self.multi_indices]
        )
        self._build_mul_table()
        self._deriv_maps = [self._build_deriv_map(i) for i in range(n_vars)]

    def _build_mul_table(self):
        pairs_i, pairs_j, pairs_k = [], [], []
        for i, a in enumerate(self.multi_indices):
            da = sum(a)
            for j, b in enumerate(self.multi_indices):
                if da + sum(b) > self.order:
                    continue
                c = tuple(x + y for x, y in zip(a, b))
                pairs_i.append(i)
                pairs_j.append(j)
                pairs_k.append(self.index[c])
        k = np.array(pairs_k)
        perm = np.argsort(k, kind="stable")
        self._mul_i = np.array(pairs_i)[perm]
        self._mul_j = np.array(pairs_j)[perm]
        k_sorted = k[perm]
        # every target index occurs (alpha = alpha + 0), so reduceat covers all
        self._mul_starts = np.searchsorted(k_sorted, np.arange(self.ncoef))

    def _build_deriv_map(self, var):
        lower = get_space(self.n_vars, self.order - 1) if self.order > 0 else None
        if lower is None:
            return None
        src, fac = [], []
        for alpha in lower.multi_indices:
            shifted = list(alpha)
            shifted[var] += 1
            src.append(self.index[tuple(shifted)])
            fac.append(float(shifted[var]))
        return np.array(src), np.array(fac)

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        prod = a[self._mul_i] * b[self._mul_j]
        return np.add.reduceat(prod, self._mul_starts, axis=0)

    def zero_coeffs(self, batch_shape=()):
        return np.zeros((self.ncoef,) + batch_shape)

    def embed_map(self, src: "JetSpace", var_map: tuple) -> np.ndarray:
        """Indices in ``self`` for each multi-index of ``src`` placed at ``var_map``."""
        out = np.empty(src.ncoef, dtype=int)
        for i, alpha in enumerate(src.multi_indices):
            beta = [0] * self.n_vars
            for v, a in zip(var_map, alpha):
                beta[v] = a
            out[i] = self.index[tuple(beta)]
        return out


def _tuple_to_alpha(combo, n_vars):
    alpha = [0] * n_vars
    for v in combo:
        alpha[v] += 1
    return tuple(alpha)


class Jet:
    """A truncated Taylor expansion; supports ring arithmetic and composition.

    Pure value semantics: every operation returns a fresh ``Jet``.
    """

    __slots__ = ("space", "coeffs")
    __array_priority__ = 100  # beat ndarray in mixed binary ops

    def __init__(self, space: JetSpace, coeffs: np.ndarray):
        self.space = space
        self.coeffs = coeffs

    # -- constructors ----------------------------------------------------
    @staticmethod
    def constant(space: JetSpace, value, batch_shape=()):
        value = np.asarray(value, dtype=float)
        coeffs = space.zero_coeffs(batch_shape if value.shape == () else value.shape)
        coeffs[0] = value
        return Jet(space, coeffs)

    @staticmethod
    def variable(space: JetSpace, var: int, value):
        value = np.asarray(value, dtype=float)
        coeffs = space.zero_coeffs(value.shape)
        coeffs[0] = value
        if space.order >= 1:
            e = tuple(1 if i == var else 0 for i in range(space.n_vars))
            coeffs[space.index[e]] = 1.0
        return Jet(space, coeffs)

    # -- basic accessors -------------------------------------------------
    @property
    def value(self):
        return self.coeffs[0]

    @property
    def order(self):
        return self.space.order

    @property
    def n_vars(self):
        return self.space.n_vars

    def extract(self, multi_index):
        """Partial derivative d^{multi_index} f at the expansion point."""
        multi_index = tuple(int(k) for k in multi_index)
        if len(multi_index) != self.space.n_vars or any(k < 0 for k in multi_index):
            raise UsageError(f"bad multi-index {multi_index} for {self.space.n_vars} variables")
        if sum(multi_index) > self.space.order:
            raise UsageError(
                f"multi-index {multi_index} exceeds jet order {self.space.order}"
            )
        i = self.space.index[multi_index]
        return self.coeffs[i] * self.space._factorials[i]

    def deriv(self, var: int) -> "Jet":
        """Jet of the partial derivative along ``var`` (order drops by one)."""
        if self.space.order == 0:
            raise UsageError("cannot differentiate an order-0 jet")
        src, fac = self.space._deriv_maps[var]
        lower = get_space(self.space.n_vars, self.space.order - 1)
        coeffs = self.coeffs[src] * _col(fac, self.coeffs.ndim)
        return Jet(lower, coeffs)

    def truncate(self, order: int) -> "Jet":
        if order == self.space.order:
            return self
        if order > self.space.order:
            raise UsageError("cannot truncate to a higher order")
        target = get_space(self.space.n_vars, order)
        return Jet(target, self.coeffs[: target.ncoef].copy())

    def embed(self, space: JetSpace, var_map=None) -> "Jet":
        """Reinterpret in a larger space, placing variables at ``var_map``."""
        if var_map is None:
            var_map = tuple(range(self.space.n_vars))
        idx = space.embed_map(self.space, tuple(var_map))
        coeffs = space.zero_coeffs(self.coeffs.shape[1:])
        coeffs[idx] = self.coeffs
        return Jet(space, coeffs)

    # -- ring operations -------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.space is not self.space:
                raise UsageError("jets from different spaces cannot be combined")
            return other
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is not None:
            return Jet(self.space, self.coeffs + o.coeffs)
        coeffs = self.coeffs.copy()
        coeffs[0] = coeffs[0] + other
        return Jet(self.space, coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return Jet(self.space, -self.coeffs)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is not None:
            return Jet(self.space, self.space.multiply(self.coeffs, o.coeffs))
        return Jet(self.space, self.coeffs * np.asarray(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is not None:
            return self * o._reciprocal()
        return Jet(self.space, self.coeffs / np.asarray(other))

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def __pow__(self, k):
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise UsageError("jet powers must be nonnegative integers; use sqrt/exp/log")
        result = Jet.constant(self.space, 1.0, self.coeffs.shape[1:])
        base = self
        k = int(k)
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    def _reciprocal(self):
        u0 = self.coeffs[0]
        if np.any(np.abs(u0) < 1e-300):
            raise UsageError("division by a jet with zero constant term")
        vals = [1.0 / u0]
        for k in range(1, self.space.order + 1):
            vals.append(((-1.0) ** k) / u0 ** (k + 1))
        return _apply_series(self, _series_axis(vals))

    def __repr__(self):
        return f"Jet(n={self.space.n_vars}, order={self.space.order}, value={self.value})"


def _col(arr, ndim):
    """Reshape a 1-d factor so it broadcasts against (ncoef, *batch) coeffs."""
    return arr.reshape(arr.shape + (1,) * (ndim - 1))


def _series_axis(vals):
    return np.stack([np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in vals])[i]
                     for i in range(len(vals))], axis=0) if len(vals) > 1 else np.asarray(vals)


def _apply_series(u: Jet, series: np.ndarray) -> Jet:
    """Compose: F(u) given Taylor coefficients of F at u.value (axis 0)."""
    w = Jet(u.space, u.coeffs.copy())
    w.coeffs[0] = np.zeros_like(w.coeffs[0])
    order = u.space.order
    coeffs = u.space.zero_coeffs(u.coeffs.shape[1:])
    coeffs[0] = series[order]
    result = Jet(u.space, coeffs)
    for k in range(order - 1, -1, -1):
        result = result * w
        result.coeffs[0] = result.coeffs[0] + series[k]
    return result


# -- elementary functions ------------------------------------------------

def _dispatch(fn_jet, fn_plain):
    def wrapper(u):
        if isinstance(u, Jet):
            return fn_jet(u)
        return fn_plain(u)

    return wrapper


def _exp_jet(u):
    e = np.exp(u.value)
    series = _series_axis([e / math.factorial(k) for k in range(u.order + 1)])
    return _apply_series(u, series)


def _log_jet(u):
    u0 = u.value
    if np.any(u0 <= 0):
        raise UsageError("log of a jet with nonpositive constant term")
    vals = [np.log(u0)]
    for k in range(1, u.order + 1):
        vals.append(((-1.0) ** (k + 1)) / (k * u0**k))
    return _apply_series(u, _series_axis(vals))


def _sqrt_jet(u):
    u0 = u.value
    if np.any(u0 <= 0):
        raise UsageError("sqrt of a jet with nonpositive constant term")
    vals, binom = [np.sqrt(u0)], 1.0
    for k in range(1, u.order + 1):
        binom *= (0.5 - (k - 1)) / k
        vals.append(binom * u0 ** (0.5 - k))
    return _apply_series(u, _series_axis(vals))


def _sin_jet(u):
    u0 = u.value
    vals = [np.sin(u0 + k * np.pi / 2) / math.factorial(k) for k in range(u.order + 1)]
    return _apply_series(u, _series_axis(vals))


def _cos_jet(u):
    u0 = u.value
    vals = [np.cos(u0 + k * np.pi / 2) / math.factorial(k) for k in range(u.order + 1)]
    return _apply_series(u, _series_axis(vals))


def _atan_jet(u):
    a = np.asarray(u.value, dtype=complex)
    vals = [np.arctan(u.value)]
    for k in range(u.order):
        d_k = ((-1.0) ** k) * np.imag((a - 1j) ** -(k + 1))
        vals.append(d_k / (k + 1))
    return _apply_series(u, _series_axis(vals))


def _tanh_jet(u):
    c = [np.tanh(u.value)]
    for k in range(u.order):
        conv = sum(c[j] * c[k - j] for j in range(k + 1))
        c.append(((1.0 if k == 0 else 0.0) - conv) / (k + 1))
    return _apply_series(u, _series_axis(c))


exp = _dispatch(_exp_jet, np.exp)
log = _dispatch(_log_jet, np.log)
sqrt = _dispatch(_sqrt_jet, np.sqrt)
sin = _dispatch(_sin_jet, np.sin)
cos = _dispatch(_cos_jet, np.cos)
atan = _dispatch(_atan_jet, np.arctan)
tanh = _dispatch(_tanh_jet, np.tanh)


# -- seeding and extraction (module-level operations) ---------------------

def seed(point, order: int, n_vars: int | None = None):
    """Coordinate jets at ``point``: value + unit first-order coefficient.

    ``order`` must be 1, 2 or 3 (the orders any verification run needs).
    ``point`` may be a flat coordinate tuple or an array whose last axis is
    the coordinate axis (leading axes become the jet batch).
    """
    if order not in (1, 2, 3):
        raise ConfigurationError(f"jet order must be 1, 2 or 3, got {order}")
    return seed_raw(point, order, n_vars)


def seed_raw(point, order: int, n_vars: int | None = None):
    """Like :func:`seed` without the public order restriction (internal)."""
    pt = np.asarray(point, dtype=float)
    if not np.all(np.isfinite(pt)):
        raise ConfigurationError("seed point must be finite")
    if pt.ndim == 0:
        pt = pt.reshape(1)
    if n_vars is None:
        n_vars = pt.shape[-1]
    space = get_space(n_vars, order)
    if pt.ndim == 1:
        return tuple(Jet.variable(space, i, pt[i]) for i in range(pt.shape[-1]))
    return tuple(Jet.variable(space, i, pt[..., i]) for i in range(pt.shape[-1]))


def seed_univariate(values, order: int) -> Jet:
    """One univariate coordinate jet; ``values`` may be a batch array."""
    values = np.asarray(values, dtype=float)
    return Jet.variable(get_space(1, order), 0, values)


def extract(value: Jet, multi_index):
    """Partial derivative of a jet; see :meth:`Jet.extract`."""
    return value.extract(multi_index)


def compose_univariate(outer: Jet, inner: Jet) -> Jet:
    """outer(inner): outer is a univariate jet expanded at inner.value."""
    if outer.space.n_vars != 1:
        raise UsageError("compose_univariate needs a univariate outer jet")
    if outer.space.order < inner.space.order:
        raise UsageError("outer jet order too low for composition")
    series = outer.coeffs[: inner.space.order + 1]
    return _apply_series(inner, series)


def antiderivative(u: Jet, value0) -> Jet:
    """Univariate antiderivative with constant term ``value0`` (same order).

    The top Taylor coefficient of the result would need order+1 data and is
    dropped; callers must hold one spare order if they differentiate again.
    """
    if u.space.n_vars != 1:
        raise UsageError("antiderivative is defined for univariate jets only")
    coeffs = u.space.zero_coeffs(u.coeffs.shape[1:])
    coeffs[0] = np.asarray(value0, dtype=float)
    for k in range(u.space.order):
        coeffs[k + 1] = u.coeffs[k] / (k + 1)
    return Jet(u.space, coeffs)
