"""Special functions used by the scattering and packet machinery.

Spherical Bessel pairs (j_l, n_l), integer-order cylinder pairs
(J_m, Y_m), Legendre polynomials, and the argument of the complex
Gamma function.  Everything is real-argument only; all functions are
pure and accept numpy arrays for the argument.

Conventions
-----------
* j_l(x) -> sin(x - l*pi/2)/x          for x >> l
* n_l(x) -> -cos(x - l*pi/2)/x
* J_m(x) -> sqrt(2/(pi x)) * cos(x - m*pi/2 - pi/4)
* Y_m(x) -> sqrt(2/(pi x)) * sin(x - m*pi/2 - pi/4)
* gamma_arg(nu, g) = arg Gamma(nu + 1 + i*g), continuous in g.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np
from scipy.special import jv, jvp, yv, yvp

DEFAULT_LMAX = 256

# Start the downward (Miller) recurrence this many orders above the target;
# the super-exponential decay of j_l for l > x makes the seed error negligible.
MILLER_EXTRA = 40

_HUGE = sys.float_info.max


@dataclass(frozen=True)
class BesselPair:
    """A regular/irregular Bessel pair with derivatives at fixed order.

    ``regular``/``irregular`` are j_l/n_l in 3D mode or J_m/Y_m in 2D
    mode, with derivatives taken with respect to the argument.  When the
    irregular member overflowed at tiny argument its value saturates at
    +-DBL_MAX and ``irregular_overflow`` is set instead of raising.
    """

    order: int
    regular: np.ndarray | float
    d_regular: np.ndarray | float
    irregular: np.ndarray | float
    d_irregular: np.ndarray | float
    irregular_overflow: bool = False


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        from .errors import DomainError

        raise DomainError("Bessel argument must be > 0")
    return x


def _sph_upward(lmax: int, x: np.ndarray, f0: np.ndarray, f1: np.ndarray) -> np.ndarray:
    """Upward three-term recurrence f_{l+1} = (2l+1)/x f_l - f_{l-1}.

    Returns array of shape (lmax+1,) + x.shape.  Stable for the
    irregular solution at any order and for the regular one when l <= x.
    """
    out = np.empty((lmax + 1,) + x.shape, dtype=float)
    out[0] = f0
    if lmax >= 1:
        out[1] = f1
    with np.errstate(over="ignore", invalid="ignore"):
        for l in range(1, lmax):
            out[l + 1] = (2 * l + 1) / x * out[l] - out[l - 1]
    return out


def spherical_jn_all(lmax: int, x) -> np.ndarray:
    """Regular spherical Bessel j_l(x) for every l in [0, lmax].

    Uses upward recurrence where it is stable (l <= x) and the Miller
    downward recurrence seeded at lmax + MILLER_EXTRA, normalized
    against j_0 = sin(x)/x, elsewhere.  Shape (lmax+1,) + x.shape.
    """
    x = _check_x(np.atleast_1d(x))
    j0 = np.sin(x) / x
    if lmax == 0:
        return j0[None]
    j1 = np.sin(x) / x**2 - np.cos(x) / x

    up = _sph_upward(lmax, x, j0, j1)

    # Downward pass: f_{l-1} = (2l+1)/x f_l - f_{l+1}, with on-the-fly
    # rescaling so the unnormalized values never overflow.
    lstart = lmax + MILLER_EXTRA
    down = np.zeros((lmax + 1,) + x.shape, dtype=float)
    fp = np.zeros_like(x)          # f_{l+1}
    fc = np.full_like(x, 1e-300)   # f_l at l = lstart
    scale = np.ones_like(x)
    for l in range(lstart, 0, -1):
        fm = (2 * l + 1) / x * fc - fp
        fp, fc = fc, fm
        big = np.abs(fc) > 1e250
        if np.any(big):
            fc = np.where(big, fc * 1e-250, fc)
            fp = np.where(big, fp * 1e-250, fp)
            down[:, big] *= 1e-250
            scale = np.where(big, scale * 1e-250, scale)
        if l - 1 <= lmax:
            down[l - 1] = fc
    with np.errstate(invalid="ignore", divide="ignore"):
        down *= np.where(down[0] != 0.0, j0 / down[0], 0.0)

    # Per (l, x): upward is stable when l <= x.
    ls = np.arange(lmax + 1).reshape((-1,) + (1,) * x.ndim)
    return np.where(ls <= x, up, down)


def spherical_bessel(l: int, x, lmax: int = DEFAULT_LMAX) -> BesselPair:
    """Spherical Bessel pair (j_l, n_l) and derivatives at order l.

    Downward recurrence for j_l when l > x (upward is unstable there),
    upward for n_l always.  Raises DomainError for x <= 0 or l > lmax;
    n_l overflow at tiny x saturates and sets the pair's flag.
    """
    from .errors import DomainError

    if l < 0 or l > lmax:
        raise DomainError(f"order l={l} outside [0, {lmax}]")
    x = _check_x(x)
    scalar = x.ndim == 0
    xv = np.atleast_1d(x)

    js = spherical_jn_all(max(l, 1) + 1, xv)
    n0 = -np.cos(xv) / xv
    n1 = -np.cos(xv) / xv**2 - np.sin(xv) / xv
    ns = _sph_upward(max(l, 1) + 1, xv, n0, n1)

    if l == 0:
        j, dj = js[0], -js[1]
        n, dn = ns[0], -ns[1]
    else:
        j = js[l]
        dj = js[l - 1] - (l + 1) / xv * j
        n = ns[l]
        dn = ns[l - 1] - (l + 1) / xv * n

    overflow = not np.all(np.isfinite(n)) or not np.all(np.isfinite(dn))
    if overflow:
        n = np.nan_to_num(n, nan=-_HUGE, posinf=_HUGE, neginf=-_HUGE)
        dn = np.nan_to_num(dn, nan=_HUGE, posinf=_HUGE, neginf=-_HUGE)

    if scalar:
        j, dj, n, dn = float(j[0]), float(dj[0]), float(n[0]), float(dn[0])
    return BesselPair(l, j, dj, n, dn, irregular_overflow=overflow)


def cylinder_bessel(m: int, x, lmax: int = DEFAULT_LMAX) -> BesselPair:
    """Integer-order cylinder Bessel pair (J_m, Y_m) and derivatives.

    Thin wrapper over scipy.special; same error contract as
    :func:`spherical_bessel`.
    """
    from .errors import DomainError

    if m < 0 or m > lmax:
        raise DomainError(f"order m={m} outside [0, {lmax}]")
    x = _check_x(x)

    J = jv(m, x)
    dJ = jvp(m, x)
    Y = yv(m, x)
    dY = yvp(m, x)
    overflow = not (np.all(np.isfinite(Y)) and np.all(np.isfinite(dY)))
    if overflow:
        Y = np.nan_to_num(Y, nan=-_HUGE, posinf=_HUGE, neginf=-_HUGE)
        dY = np.nan_to_num(dY, nan=_HUGE, posinf=_HUGE, neginf=-_HUGE)
    if np.ndim(x) == 0:
        J, dJ, Y, dY = float(J), float(dJ), float(Y), float(dY)
    return BesselPair(m, J, dJ, Y, dY, irregular_overflow=overflow)


def legendre_all(lmax: int, u) -> np.ndarray:
    """P_l(u) for every l in [0, lmax] by the three-term recurrence."""
    from .errors import DomainError

    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > 1.0 + 1e-15):
        raise DomainError("Legendre argument must satisfy |u| <= 1")
    u = np.atleast_1d(np.clip(u, -1.0, 1.0))
    out = np.empty((lmax + 1,) + u.shape, dtype=float)
    out[0] = 1.0
    if lmax >= 1:
        out[1] = u
    for l in range(1, lmax):
        out[l + 1] = ((2 * l + 1) * u * out[l] - l * out[l - 1]) / (l + 1)
    return out


def legendre(l: int, u):
    """Legendre polynomial P_l(u), |u| <= 1."""
    vals = legendre_all(l, u)[l]
    return float(vals[()]) if np.ndim(u) == 0 else vals


# Stirling asymptotic series coefficients B_2n / (2n (2n-1)) for arg Gamma.
_STIRLING = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
)

_STIRLING_MIN_RE = 9.0


def gamma_arg(nu, g):
    """arg Gamma(nu + 1 + i*g), continuous in g (no mod-2pi wrapping).

    Raises the argument by the recurrence arg Gamma(z+1) = arg Gamma(z)
    + arctan(Im z / Re z) until Re z >= 9, then evaluates a Stirling
    series.  Every increment is an arctan with positive denominator, so
    continuity in g is structural rather than enforced by unwrapping.
    ``nu`` may be integer or half-integer (nu >= -1/2); ``g`` may be an
    array.
    """
    from .errors import DomainError

    if nu < -0.5:
        raise DomainError("gamma_arg requires nu >= -1/2")
    g = np.asarray(g, dtype=float)
    scalar = g.ndim == 0
    gv = np.atleast_1d(g)

    re = nu + 1.0
    acc = np.zeros_like(gv)
    while re < _STIRLING_MIN_RE:
        acc += np.arctan2(gv, re)
        re += 1.0

    w = re + 1j * gv
    s = (w - 0.5) * np.log(w) - w
    inv = 1.0 / w
    inv2 = inv * inv
    p = inv.copy()
    for c in _STIRLING:
        s += c * p
        p = p * inv2
    out = s.imag - acc
    return float(out[0]) if scalar else out
