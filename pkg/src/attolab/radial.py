"""Radial continuum solver and phase-shift tables.

Solves, in Hartree atomic units,

    u''(r) = [ c/r^2 + 2 V(r) - k^2 ] u(r),      u(0) = 0,

with centrifugal coefficient c = l(l+1) in 3D mode and c = m^2 - 1/4 in
2D mode (the 2D radial function R_m = u / sqrt(r)).  Integration is
Numerov on a uniform grid, vectorized over a whole batch of momenta.
The first two nodes are seeded from a Frobenius series u = r^s sum a_n
r^n (s = l+1 resp. m+1/2), which keeps the startup error at machine
level for every channel including the half-integer-power 2D ones.

Phase extraction
----------------
Short-range tails: u is matched at two radii beyond the potential range
against the exact free pair (kr j_l, kr n_l) in 3D or (sqrt(kr) J_m,
sqrt(kr) Y_m) in 2D, giving delta = atan2(-beta, alpha).

Coulomb tails (Z > 0): u is fitted at N_FIT_POINTS outer radii to
A sin(kr - gamma ln(2kr) - l pi/2 [+ pi/4 in 2D] + Delta) by least
squares.  A pure-Coulomb reference solution on the same grid is fitted
with the same recipe and its fitted phase is subtracted, which cancels
both the finite-r bias of the asymptotic sine form and the solver's
accumulated dispersion; the short-range remainder is
delta_hat = Delta_fit - Delta_ref and the total phase is
Delta = sigma + delta_hat with sigma from the exact Gamma-function
argument.  The same subtraction against a free reference is applied in
the short-range case (there it removes dispersion only).

Everything here is pure; solutions and tables are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import specfun
from .errors import (
    BranchAmbiguityError,
    GridResolutionError,
    ModelError,
    RangeError,
    ValidationError,
)

K_MIN = 0.05          # threshold behavior out of scope
N_FIT_POINTS = 8      # outer radii used by the Coulomb-tail fit
N_SERIES = 8          # Frobenius orders carried by the startup series


# ----------------------------------------------------------------------
# Potential models
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PotentialModel:
    """Central potential V(r), possibly with an attractive Coulomb tail.

    ``coulomb_charge`` Z >= 0 is the charge seen at infinity
    (V -> -Z/r); Z = 0 means strictly short range.  Use the
    classmethod constructors.
    """

    kind: str
    params: tuple
    coulomb_charge: float = 0.0
    short: "PotentialModel | None" = None

    # -- constructors --------------------------------------------------

    @classmethod
    def square_well(cls, v0: float, a: float) -> "PotentialModel":
        """V = v0 for r < a, 0 outside (v0 < 0 is a well)."""
        return cls("square_well", (float(v0), float(a)))

    @classmethod
    def gaussian_well(cls, v0: float, w: float) -> "PotentialModel":
        """V = v0 exp(-r^2/w^2)."""
        return cls("gaussian_well", (float(v0), float(w)))

    @classmethod
    def yukawa(cls, zs: float, mu: float) -> "PotentialModel":
        """V = -zs exp(-mu r)/r."""
        return cls("yukawa", (float(zs), float(mu)))

    @classmethod
    def soft_core(cls, z: float, a_soft: float) -> "PotentialModel":
        """V = -z / sqrt(r^2 + a_soft^2); Coulomb tail of charge z."""
        return cls("soft_core", (float(z), float(a_soft)), coulomb_charge=float(z))

    @classmethod
    def coulomb_plus_short(cls, z: float, short: "PotentialModel") -> "PotentialModel":
        """V = -z/r + V_short(r)."""
        if short.coulomb_charge != 0.0:
            raise ValidationError("inner model of coulomb_plus_short must be short range")
        return cls("coulomb_plus_short", (float(z),), coulomb_charge=float(z), short=short)

    @classmethod
    def free(cls) -> "PotentialModel":
        return cls("free", ())

    # -- evaluation ----------------------------------------------------

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "free":
            return np.zeros_like(r)
        if self.kind == "square_well":
            v0, a = self.params
            return np.where(r <= a, v0, 0.0)
        if self.kind == "gaussian_well":
            v0, w = self.params
            return v0 * np.exp(-(r / w) ** 2)
        if self.kind == "yukawa":
            zs, mu = self.params
            return -zs * np.exp(-mu * r) / r
        if self.kind == "soft_core":
            z, a = self.params
            return -z / np.sqrt(r * r + a * a)
        if self.kind == "coulomb_plus_short":
            (z,) = self.params
            return -z / r + self.short(r)
        raise ValidationError(f"unknown potential kind {self.kind!r}")

    def short_range_part(self, r):
        """V(r) + Z/r, the part that must vanish faster than 1/r^2."""
        r = np.asarray(r, dtype=float)
        if self.coulomb_charge == 0.0:
            return self(r)
        return self(r) + self.coulomb_charge / r

    @property
    def range(self) -> float:
        """Characteristic decay scale of the short-range part (bohr)."""
        if self.kind == "free":
            return 1.0
        if self.kind == "square_well":
            return self.params[1]
        if self.kind == "gaussian_well":
            return self.params[1]
        if self.kind == "yukawa":
            return 1.0 / self.params[1]
        if self.kind == "soft_core":
            return self.params[1]
        if self.kind == "coulomb_plus_short":
            return self.short.range
        raise ValidationError(f"unknown potential kind {self.kind!r}")

    @property
    def origin_charge(self) -> float:
        """-lim r V(r) for r -> 0 (Coulomb singularity at the origin)."""
        if self.kind == "yukawa":
            return self.params[0]
        if self.kind == "coulomb_plus_short":
            return self.params[0] + self.short.origin_charge
        return 0.0

    def regular_taylor(self) -> np.ndarray:
        """Taylor coefficients v_j, j = 0..6, of 2(V + Z_origin/r) at 0."""
        v = np.zeros(7)
        if self.kind in ("free",):
            return v
        if self.kind == "square_well":
            v[0] = 2.0 * self.params[0]
            return v
        if self.kind == "gaussian_well":
            v0, w = self.params
            v[0] = 2.0 * v0
            v[2] = -2.0 * v0 / w**2
            v[4] = v0 / w**4
            v[6] = -v0 / (3.0 * w**6)
            return v
        if self.kind == "yukawa":
            zs, mu = self.params
            # 2 zs (1 - e^{-mu r})/r = 2 zs sum_{n>=1} (-1)^{n+1} mu^n r^{n-1}/n!
            fact = 1.0
            for j in range(7):
                fact *= j + 1
                v[j] = 2.0 * zs * (-1.0) ** j * mu ** (j + 1) / fact
            return v
        if self.kind == "soft_core":
            z, a = self.params
            c = -2.0 * z / a
            v[0] = c
            v[2] = -c / (2.0 * a**2)
            v[4] = 3.0 * c / (8.0 * a**4)
            v[6] = -5.0 * c / (16.0 * a**6)
            return v
        if self.kind == "coulomb_plus_short":
            return self.short.regular_taylor()
        raise ValidationError(f"unknown potential kind {self.kind!r}")

    def validate(self) -> None:
        """Check r^2 V_s -> 0 numerically at r = 10 * range.

        Strictly short-range kinds must be negligible there; for kinds
        with a Coulomb tail the remainder may decay as slowly as r^-3,
        so a decrease of r^2 |V_s| between 10x and 20x range is checked
        instead of an absolute threshold.
        """
        r = 10.0 * self.range
        vs = float(np.abs(self.short_range_part(np.asarray(r))))
        if self.coulomb_charge == 0.0:
            if r * r * vs > 1e-3:
                raise ModelError(
                    f"short-range part of {self.kind} does not decay: "
                    f"r^2 V_s = {r * r * vs:.3e} at r = {r:.1f}"
                )
        else:
            vs2 = float(np.abs(self.short_range_part(np.asarray(2.0 * r))))
            if 4.0 * r * r * vs2 > 0.7 * r * r * vs and r * r * vs > 1e-6:
                raise ModelError(
                    f"short-range remainder of {self.kind} does not decay "
                    f"faster than 1/r^2 (r^2 V_s: {r*r*vs:.3e} at {r:.0f}, "
                    f"{4*r*r*vs2:.3e} at {2*r:.0f})"
                )


def centrifugal_coefficient(channel: int, mode: str) -> float:
    """l(l+1) in 3D mode, m^2 - 1/4 in 2D mode."""
    if mode == "3d":
        return float(channel * (channel + 1))
    if mode == "2d":
        return float(channel * channel) - 0.25
    raise ValidationError(f"mode must be '3d' or '2d', got {mode!r}")


def origin_exponent(channel: int, mode: str) -> float:
    """Exponent s with u ~ r^s at the origin."""
    return channel + 1.0 if mode == "3d" else channel + 0.5


# ----------------------------------------------------------------------
# Grids
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid r_i = h (i+1), i = 0..n-1 (origin excluded)."""

    r_max: float
    h: float

    @property
    def n(self) -> int:
        return int(round(self.r_max / self.h))

    @property
    def r(self) -> np.ndarray:
        return self.h * np.arange(1, self.n + 1)


def default_radial_grid(pot: PotentialModel, k_min: float, k_max: float,
                        r_max: float | None = None, h: float | None = None) -> RadialGrid:
    """Grid satisfying r_max >= 10 max(range, 2pi/k) and h <= (2pi/k)/40."""
    if r_max is None:
        r_max = 10.0 * max(pot.range, 2.0 * np.pi / k_min)
    if h is None:
        h = min((2.0 * np.pi / k_max) / 40.0, pot.range / 20.0)
    if pot.kind == "square_well":
        # keep a node exactly on the well edge so the discontinuity does
        # not degrade the Numerov order
        a = pot.params[1]
        h = a / max(1, round(a / h))
    return RadialGrid(float(r_max), float(h))


def _check_grid(grid: RadialGrid, k_max: float) -> None:
    if grid.h * k_max > np.pi / 20.0:
        raise GridResolutionError(
            f"radial step h={grid.h:.4g} too coarse for k={k_max:.4g} "
            f"(h*k = {grid.h * k_max:.3g} > pi/20)"
        )


# ----------------------------------------------------------------------
# Numerov core
# ----------------------------------------------------------------------

def _series_coeffs(pot: PotentialModel, s: float, k2: np.ndarray) -> np.ndarray:
    """Frobenius coefficients a_n of u = r^s sum a_n r^n at the origin.

    a_n = [-2 Z a_{n-1} + (v * a)_{n-2} - k^2 a_{n-2}] / (n (2s + n - 1))
    with v_j the Taylor coefficients of twice the regular part of V.
    Shape (N_SERIES+1, n_k).
    """
    zt = pot.origin_charge
    v = pot.regular_taylor()
    nk = len(k2)
    a = np.zeros((N_SERIES + 1, nk))
    a[0] = 1.0
    for n in range(1, N_SERIES + 1):
        acc = -2.0 * zt * a[n - 1]
        if n >= 2:
            acc = acc - k2 * a[n - 2]
            for j in range(0, n - 1):
                if v[j] != 0.0:
                    acc = acc + v[j] * a[n - 2 - j]
        a[n] = acc / (n * (2.0 * s + n - 1.0))
    return a


def _series_start(pot: PotentialModel, s: float, k2: np.ndarray,
                  r1: float, r2: float) -> tuple[np.ndarray, np.ndarray]:
    """u at the first two grid nodes from the Frobenius series.

    The r1^s factor is divided out (overall normalization is free).
    """
    a = _series_coeffs(pot, s, k2)
    powers1 = r1 ** np.arange(N_SERIES + 1)
    powers2 = r2 ** np.arange(N_SERIES + 1)
    u1 = a.T @ powers1
    u2 = (r2 / r1) ** s * (a.T @ powers2)
    return u1, u2


LAUNCH_NODES = 24     # nodes integrated in w = u/r^s before Numerov takes over
LAUNCH_SUBSTEPS = 8


def _launch_low_m(pot: PotentialModel, s: float, k2: np.ndarray,
                  r: np.ndarray, h: float) -> np.ndarray:
    """u at the first LAUNCH_NODES nodes via RK4 on w = u / r^s.

    For half-integer s < 2 (2D channels m = 0, 1) the radial solution's
    high derivatives are singular at the origin and Numerov's error
    expansion breaks down there; w'' = (2V - k^2) w - (2s/r) w' has an
    analytic solution and integrates cleanly.  Values are relative to
    r1^s like the series start.
    """
    a = _series_coeffs(pot, s, k2)
    n_launch = min(LAUNCH_NODES, len(r) - 2)
    powers = r[0] ** np.arange(N_SERIES + 1)
    dpowers = np.arange(N_SERIES + 1) * r[0] ** np.concatenate(([0.0], np.arange(N_SERIES)))
    w = a.T @ powers
    wp = a.T @ dpowers

    def rhs(rr, wv, wpv):
        v2 = 2.0 * float(pot(np.asarray(rr)))
        return wpv, (v2 - k2) * wv - (2.0 * s / rr) * wpv

    out = np.empty((n_launch, len(k2)))
    out[0] = w  # relative to r1^s
    for i in range(n_launch - 1):
        rr = r[i]
        sub = h / LAUNCH_SUBSTEPS
        for _ in range(LAUNCH_SUBSTEPS):
            k1w, k1p = rhs(rr, w, wp)
            k2w, k2p = rhs(rr + sub / 2, w + sub / 2 * k1w, wp + sub / 2 * k1p)
            k3w, k3p = rhs(rr + sub / 2, w + sub / 2 * k2w, wp + sub / 2 * k2p)
            k4w, k4p = rhs(rr + sub, w + sub * k3w, wp + sub * k3p)
            w = w + sub / 6 * (k1w + 2 * k2w + 2 * k3w + k4w)
            wp = wp + sub / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
            rr += sub
        out[i + 1] = (r[i + 1] / r[0]) ** s * w
    return out


def _radial_u(pot: PotentialModel, channel: int, mode: str, k2: np.ndarray,
              r: np.ndarray, h: float, n_stop: int | None = None) -> np.ndarray:
    """Outward solution u on the grid (relative normalization).

    Series-started Numerov; 2D channels with m <= 1 get the RK4 launcher
    over the first nodes instead (half-integer-power startup).
    """
    n = len(r) if n_stop is None else n_stop
    c = centrifugal_coefficient(channel, mode)
    s = origin_exponent(channel, mode)
    w_arr = 2.0 * pot(r[:n]) + c / (r[:n] * r[:n])
    if mode == "2d" and channel <= 1 and n > LAUNCH_NODES + 2:
        head = _launch_low_m(pot, s, k2, r, h)
        i0 = head.shape[0] - 2
        tail = _numerov_batch(w_arr[i0:], k2, h, head[-2], head[-1])
        u = np.empty((n, len(k2)))
        u[: i0 + 2] = head
        u[i0:] = tail
        return u
    u1, u2 = _series_start(pot, s, k2, r[0], r[1])
    return _numerov_batch(w_arr, k2, h, u1, u2)


def _numerov_batch(w: np.ndarray, k2: np.ndarray, h: float,
                   u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Propagate u'' = (w - k^2) u outward for a batch of momenta.

    w has shape (n_r,), k2 and the start values (n_k,).  Returns
    (n_r, n_k).  Rolling three-point recurrence with occasional
    rescaling guards against overflow in deeply classically forbidden
    channels.
    """
    n = w.shape[0]
    nk = k2.shape[0]
    u = np.empty((n, nk))
    u[0] = u1
    u[1] = u2
    h2_12 = h * h / 12.0
    a_prev = 1.0 - h2_12 * (w[0] - k2)
    a_curr = 1.0 - h2_12 * (w[1] - k2)
    for i in range(1, n - 1):
        a_next = 1.0 - h2_12 * (w[i + 1] - k2)
        u[i + 1] = ((12.0 - 10.0 * a_curr) * u[i] - a_prev * u[i - 1]) / a_next
        a_prev, a_curr = a_curr, a_next
        if i % 4096 == 0:
            big = np.abs(u[i + 1]) > 1e280
            if np.any(big):
                u[: i + 2, big] *= 1e-160
    return u


# ----------------------------------------------------------------------
# Phase extraction
# ----------------------------------------------------------------------

def _free_pair(mode: str, channel: int, k: float, r: np.ndarray):
    """Exact free radial pair with asymptote (sin, -cos)(theta_mode)."""
    x = k * r
    if mode == "3d":
        bp = specfun.spherical_bessel(channel, x)
        return x * bp.regular, x * bp.irregular
    bp = specfun.cylinder_bessel(channel, x)
    fac = np.sqrt(np.pi * x / 2.0)
    return fac * bp.regular, fac * bp.irregular


def _phase_offset(mode: str, channel: int) -> float:
    """theta_mode = k r - offset (free asymptotic phase reference)."""
    if mode == "3d":
        return channel * np.pi / 2.0
    return channel * np.pi / 2.0 - np.pi / 4.0


def _free_pair_deriv(mode: str, channel: int, k: float, r: np.ndarray):
    """d/dr of the free pair returned by :func:`_free_pair`."""
    x = k * r
    if mode == "3d":
        bp = specfun.spherical_bessel(channel, x)
        return (k * (bp.regular + x * bp.d_regular),
                k * (bp.irregular + x * bp.d_irregular))
    bp = specfun.cylinder_bessel(channel, x)
    fac = np.sqrt(np.pi * x / 2.0)
    return (k * (0.5 * fac / x * bp.regular + fac * bp.d_regular),
            k * (0.5 * fac / x * bp.irregular + fac * bp.d_irregular))


def _match_edge(u_in: np.ndarray, du_in: np.ndarray, a: float, k: np.ndarray,
                mode: str, channel: int):
    """Match (u, u') at a sharp potential edge to the exact free pair."""
    deltas = np.empty_like(k)
    amps = np.empty_like(k)
    coefs = np.empty((len(k), 2))
    ra = np.array([a])
    for j, kk in enumerate(k):
        f1, f2 = _free_pair(mode, channel, kk, ra)
        df1, df2 = _free_pair_deriv(mode, channel, kk, ra)
        mat = np.array([[f1[0], f2[0]], [df1[0], df2[0]]])
        alpha, beta = np.linalg.solve(mat, np.array([u_in[j], du_in[j]]))
        deltas[j] = np.arctan2(-beta, alpha)
        amps[j] = np.hypot(alpha, beta)
        coefs[j] = (alpha, beta)
    return deltas, amps, coefs


def _match_short_range(u: np.ndarray, r: np.ndarray, k: np.ndarray,
                       i1: int, i2: int, mode: str, channel: int):
    """Two-radius match against the exact free pair.

    Returns (delta mod 2pi in (-pi, pi], amplitude) per momentum, with
    the amplitude defined so u/amplitude -> sin(theta_mode + delta).
    """
    deltas = np.empty_like(k)
    amps = np.empty_like(k)
    for j, kk in enumerate(k):
        f1a, f2a = _free_pair(mode, channel, kk, r[i1 : i1 + 1])
        f1b, f2b = _free_pair(mode, channel, kk, r[i2 : i2 + 1])
        mat = np.array([[f1a[0], f2a[0]], [f1b[0], f2b[0]]])
        rhs = np.array([u[i1, j], u[i2, j]])
        alpha, beta = np.linalg.solve(mat, rhs)
        # asymptotically alpha*f1 + beta*f2 -> C sin(theta + delta)
        # (the pair is unit-sine normalized in both modes)
        deltas[j] = np.arctan2(-beta, alpha)
        amps[j] = np.hypot(alpha, beta)
    return deltas, amps


def _fit_coulomb_window(u: np.ndarray, r_win: np.ndarray, idx: np.ndarray,
                        k: np.ndarray, gamma: np.ndarray, offset: float):
    """Least-squares fit u ~ A sin(kr - gamma ln(2kr) - offset + Delta).

    Linear in (A cos Delta, A sin Delta); returns (Delta, A, relative
    residual) arrays over the momentum batch.
    """
    deltas = np.empty_like(k)
    amps = np.empty_like(k)
    resids = np.empty_like(k)
    for j, kk in enumerate(k):
        theta = kk * r_win - gamma[j] * np.log(2.0 * kk * r_win) - offset
        design = np.column_stack([np.sin(theta), np.cos(theta)])
        y = u[idx, j]
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        alpha, beta = coef
        amps[j] = np.hypot(alpha, beta)
        deltas[j] = np.arctan2(beta, alpha)
        fit = design @ coef
        norm = np.linalg.norm(y)
        resids[j] = np.linalg.norm(y - fit) / norm if norm > 0 else np.inf
    return deltas, amps, resids


# ----------------------------------------------------------------------
# Solutions and tables
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RadialSolution:
    """Continuum radial solution for one (channel, k).

    ``u`` is normalized so the asymptotic sine has unit amplitude:
    sin(kr - l pi/2 + delta) for short range, and
    sin(kr - gamma ln 2kr - l pi/2 [+ pi/4 in 2D] + delta) for Coulomb
    tails where ``delta`` is the total phase sigma + delta_hat.
    """

    k: float
    channel: int
    mode: str
    centrifugal_coeff: float
    r: np.ndarray
    u: np.ndarray
    delta: float
    delta_hat: float
    sigma: float
    fit_residual: float


@dataclass(frozen=True)
class PhaseShiftTable:
    """delta(k) with derivatives on a momentum grid for one channel.

    For Coulomb targets ``delta`` is the total phase Delta = sigma +
    delta_hat and ``sigma`` carries the Coulomb phase separately;
    for short-range targets sigma is zero and delta_hat == delta.
    Immutable; derivative columns obey d delta/dE = (d delta/dk)/k.
    """

    channel: int
    mode: str
    coulomb_charge: float
    k_grid: np.ndarray
    delta: np.ndarray
    ddelta_dk: np.ndarray
    ddelta_dE: np.ndarray
    sigma: np.ndarray
    delta_hat: np.ndarray
    alive: np.ndarray = field(default=None)

    def delta_at(self, k0: float) -> float:
        self._check_interior(k0)
        return float(CubicSpline(self.k_grid, self.delta)(k0))

    def ddelta_dk_at(self, k0: float) -> float:
        self._check_interior(k0)
        return float(CubicSpline(self.k_grid, self.ddelta_dk)(k0))

    def ddelta_dE_at(self, k0: float) -> float:
        self._check_interior(k0)
        return float(CubicSpline(self.k_grid, self.ddelta_dE)(k0))

    def _check_interior(self, k0: float) -> None:
        if not (self.k_grid[0] <= k0 <= self.k_grid[-1]):
            raise RangeError(
                f"k0={k0:.4g} outside table range "
                f"[{self.k_grid[0]:.4g}, {self.k_grid[-1]:.4g}]"
            )

    # -- CSV interface --------------------------------------------------

    def to_csv(self, path_or_buf) -> None:
        """Write columns k, delta, ddelta_dk, ddelta_dE, sigma_coulomb."""
        buf = io.StringIO()
        buf.write("k,delta,ddelta_dk,ddelta_dE,sigma_coulomb\n")
        coulomb = self.coulomb_charge > 0.0
        for i in range(len(self.k_grid)):
            sig = repr(float(self.sigma[i])) if coulomb else ""
            buf.write(
                f"{float(self.k_grid[i])!r},{float(self.delta[i])!r},"
                f"{float(self.ddelta_dk[i])!r},{float(self.ddelta_dE[i])!r},{sig}\n"
            )
        text = buf.getvalue()
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w") as fh:
                fh.write(text)

    @classmethod
    def from_csv(cls, path_or_buf, channel: int = 0, mode: str = "3d",
                 coulomb_charge: float | None = None) -> "PhaseShiftTable":
        if hasattr(path_or_buf, "read"):
            lines = path_or_buf.read().splitlines()
        else:
            with open(path_or_buf) as fh:
                lines = fh.read().splitlines()
        header = lines[0].split(",")
        if header != ["k", "delta", "ddelta_dk", "ddelta_dE", "sigma_coulomb"]:
            raise ValidationError(f"unexpected phase-shift CSV header: {lines[0]!r}")
        rows = [ln.split(",") for ln in lines[1:] if ln.strip()]
        k = np.array([float(r[0]) for r in rows])
        delta = np.array([float(r[1]) for r in rows])
        ddk = np.array([float(r[2]) for r in rows])
        ddE = np.array([float(r[3]) for r in rows])
        has_sigma = any(r[4] != "" for r in rows)
        sigma = np.array([float(r[4]) if r[4] != "" else 0.0 for r in rows])
        if coulomb_charge is None:
            coulomb_charge = 1.0 if has_sigma else 0.0
        return cls(channel, mode, coulomb_charge, k, delta, ddk, ddE,
                   sigma, delta - sigma, np.ones_like(k, dtype=bool))


def _continuity(delta_raw: np.ndarray, tie_tol: float = 1e-3) -> np.ndarray:
    """Select +-pi branches so |d delta| is minimized between neighbors.

    Raises BranchAmbiguityError when the best and runner-up branch are
    indistinguishable (within tie_tol) or the best jump still exceeds
    pi/2: both mean the k-grid does not resolve the variation.
    """
    out = delta_raw.copy()
    shifts = np.pi * np.arange(-4, 5)
    for i in range(1, len(out)):
        cand = out[i] + shifts
        dist = np.abs(cand - out[i - 1])
        order = np.argsort(dist)
        best, second = dist[order[0]], dist[order[1]]
        # the nearest pi-translate is never farther than pi/2, so loss of
        # the |d delta| < pi/2 continuity guarantee shows up exactly as a
        # near-tie between the two best branches
        if second - best < tie_tol:
            raise BranchAmbiguityError(
                f"phase branch ambiguous between k samples {i-1} and {i} "
                f"(|jump| candidates {best:.4f} vs {second:.4f}); "
                "refine the k-grid"
            )
        out[i] = cand[order[0]]
    return out


def _solve_batch(pot: PotentialModel, channel: int, k: np.ndarray, mode: str,
                 grid: RadialGrid, debias: bool = True):
    """Shared machinery: solve, fit phases, normalize the batch.

    Returns (r, u_normalized, delta_total, delta_hat, sigma, resid,
    alive).  ``delta_total`` is branch-raw (in (-pi, pi]); table-level
    continuity is applied by the caller.
    """
    pot.validate()
    k = np.asarray(k, dtype=float)
    if np.any(k < K_MIN):
        raise ValidationError(f"momenta below k = {K_MIN} a.u. are not supported")
    _check_grid(grid, float(k.max()))
    r = grid.r
    h = grid.h
    c = centrifugal_coefficient(channel, mode)
    z = pot.coulomb_charge

    k2 = k * k

    # radius beyond which channel (c, k) is classically allowed,
    # with half a wavelength of margin when a barrier exists
    barrier = np.sqrt(max(c, 0.0))
    r_allowed = (barrier + (3.0 if c > 0.0 else 0.0)) / k

    offset = _phase_offset(mode, channel)
    alive = np.ones(len(k), dtype=bool)
    use_edge_path = False
    if z == 0.0 and pot.kind == "square_well":
        # matching at the edge is ill-conditioned once the channel is
        # deeply forbidden there (|n/j| beyond ~1e10 loses the regular
        # coefficient); those channels carry delta ~ 0 and go through
        # the generic matching in the allowed region instead
        f1, f2 = _free_pair(mode, channel, float(k.min()), np.array([pot.params[1]]))
        use_edge_path = abs(f2[0]) < 1e10 * abs(f1[0])
    if use_edge_path:
        # a sharp edge breaks the Numerov error expansion; integrate the
        # (uniform) interior only, match (u, u') at the edge to the exact
        # free pair, and continue analytically outside
        a = pot.params[1]
        i_edge = int(round(a / h)) - 1
        if i_edge < 5 or abs(r[i_edge] - a) > 1e-8 * max(a, 1.0):
            raise GridResolutionError(
                "square-well grids must place a node exactly on the edge; "
                "use default_radial_grid")
        u_in = _radial_u(pot, channel, mode, k2, r, h, n_stop=i_edge + 1)
        ue = u_in[i_edge]
        due = (25.0 * u_in[i_edge] - 48.0 * u_in[i_edge - 1]
               + 36.0 * u_in[i_edge - 2] - 16.0 * u_in[i_edge - 3]
               + 3.0 * u_in[i_edge - 4]) / (12.0 * h)
        delta_tot, amps, coefs = _match_edge(ue, due, float(r[i_edge]), k, mode, channel)
        u = np.empty((grid.n, len(k)))
        u[: i_edge + 1] = u_in
        r_out = r[i_edge + 1 :]
        for j, kk in enumerate(k):
            f1, f2 = _free_pair(mode, channel, kk, r_out)
            u[i_edge + 1 :, j] = coefs[j, 0] * f1 + coefs[j, 1] * f2
        sigma = np.zeros_like(k)
        resid = np.zeros_like(k)
        delta_hat = delta_tot.copy()
        with np.errstate(divide="ignore", invalid="ignore"):
            u_norm = u / amps[None, :]
        return r, u_norm, delta_tot, delta_hat, sigma, resid, alive

    u = _radial_u(pot, channel, mode, k2, r, h)
    if z > 0.0:
        gamma = -z / k
        nu = channel if mode == "3d" else channel - 0.5
        sigma = np.array([specfun.gamma_arg(nu, g) for g in gamma])

        ref = PotentialModel.coulomb_plus_short(z, PotentialModel.free())
        u_ref = _radial_u(ref, channel, mode, k2, r, h)

        i_hi = int(0.98 * grid.n) - 1
        delta_tot = np.zeros_like(k)
        delta_hat = np.zeros_like(k)
        amps = np.ones_like(k)
        resid = np.zeros_like(k)
        lam = 2.0 * np.pi / k
        for j in range(len(k)):
            n_span = max(int(round(1.5 * lam[j] / h)), N_FIT_POINTS)
            i_lo = i_hi - n_span
            if r[max(i_lo, 0)] < r_allowed[j] or i_lo < 0:
                alive[j] = False
                continue
            idx = np.unique(np.linspace(i_lo, i_hi, N_FIT_POINTS).astype(int))
            d_full, _, res = _fit_coulomb_window(
                u[:, j : j + 1], r[idx], idx, k[j : j + 1], gamma[j : j + 1], offset)
            d_ref, _, _ = _fit_coulomb_window(
                u_ref[:, j : j + 1], r[idx], idx, k[j : j + 1], gamma[j : j + 1], offset)
            dh = d_full[0] - d_ref[0]
            dh = (dh + np.pi) % (2.0 * np.pi) - np.pi
            delta_hat[j] = dh
            delta_tot[j] = sigma[j] + dh
            # amplitude from the WKB action invariant: locally
            # u ~ C kappa^{-1/2} sin(int kappa), so the asymptotic (kappa
            # -> k) amplitude is sqrt(u^2 + (u'/kappa)^2) * sqrt(kappa/k);
            # unlike the sine-fit amplitude this carries no O(gamma/kr)
            # finite-r bias
            du = (u[idx - 2, j] - 8.0 * u[idx - 1, j]
                  + 8.0 * u[idx + 1, j] - u[idx + 2, j]) / (12.0 * h)
            kap2 = k2[j] + 2.0 * z / r[idx] - c / r[idx] ** 2
            a_loc = np.sqrt(u[idx, j] ** 2 + du**2 / kap2)
            amps[j] = float(np.mean(a_loc * (kap2 / k2[j]) ** 0.25))
            resid[j] = res[0]
    else:
        sigma = np.zeros_like(k)
        r_match = pot_matching_radius(pot, float(k.min()))
        delta_tot = np.zeros_like(k)
        amps = np.ones_like(k)
        resid = np.zeros_like(k)
        if debias:
            u_free = _radial_u(PotentialModel.free(), channel, mode, k2, r, h)
        for j in range(len(k)):
            i1 = min(int(max(r_match, r_allowed[j]) / h), grid.n - 3)
            quarter = max(1, int(round((np.pi / 2.0 / k[j]) / h)))
            i2 = min(i1 + quarter, grid.n - 1)
            if i2 <= i1 or r[i1] < r_allowed[j]:
                alive[j] = False
                continue
            d, a = _match_short_range(u[:, j : j + 1], r, k[j : j + 1], i1, i2, mode, channel)
            if debias:
                d0, _ = _match_short_range(u_free[:, j : j + 1], r, k[j : j + 1], i1, i2, mode, channel)
                d = d - d0
            dd = (d[0] + np.pi) % (2.0 * np.pi) - np.pi
            delta_tot[j] = dd
            amps[j] = a[0]
        delta_hat = delta_tot.copy()

    with np.errstate(divide="ignore", invalid="ignore"):
        u_norm = np.where(alive[None, :], u / amps[None, :], 0.0)
    delta_tot = np.where(alive, delta_tot, 0.0)
    delta_hat = np.where(alive, delta_hat, 0.0)
    return r, u_norm, delta_tot, delta_hat, sigma, resid, alive


def pot_matching_radius(pot: PotentialModel, k: float, tol: float = 1e-12) -> float:
    """Smallest radius where |2 V_s| / k^2 drops below tol."""
    if pot.kind in ("free",):
        return 1.0
    if pot.kind == "square_well":
        return pot.params[1] * (1.0 + 1e-9)
    scan = np.geomspace(max(pot.range, 1e-3), 400.0 * pot.range, 600)
    vals = np.abs(2.0 * pot.short_range_part(scan)) / k**2
    below = np.nonzero(vals < tol)[0]
    if len(below) == 0:
        raise ModelError("short-range part does not reach matching threshold")
    return float(scan[below[0]])


def solve_radial(pot: PotentialModel, k: float, channel: int, mode: str = "3d",
                 grid: RadialGrid | None = None, debias: bool = True) -> RadialSolution:
    """Solve one continuum channel and extract its phase shift.

    Numerov outward integration from a Frobenius start; the returned u
    is amplitude-normalized to a unit asymptotic sine.  See the module
    docstring for the matching strategy.
    """
    if k <= 0.0:
        raise ValidationError("k must be > 0")
    if grid is None:
        grid = default_radial_grid(pot, k, k)
    karr = np.array([float(k)])
    r, u, d, dh, sig, res, alive = _solve_batch(pot, channel, karr, mode, grid, debias)
    if not alive[0]:
        raise ValidationError(
            f"channel {channel} classically forbidden over the whole grid at k={k}"
        )
    return RadialSolution(
        k=float(k), channel=channel, mode=mode,
        centrifugal_coeff=centrifugal_coefficient(channel, mode),
        r=r, u=u[:, 0], delta=float(d[0]), delta_hat=float(dh[0]),
        sigma=float(sig[0]), fit_residual=float(res[0]),
    )


def phase_shift_table(pot: PotentialModel, channel: int, k_grid, mode: str = "3d",
                      grid: RadialGrid | None = None, debias: bool = True) -> PhaseShiftTable:
    """Tabulate delta(k) with derivatives for one channel.

    Continuity across the grid is enforced by +-pi branch selection
    minimizing |d delta| between neighbors; derivatives are central
    differences (one-sided at the ends) and d delta/dE = (d delta/dk)/k.
    """
    k_grid = np.asarray(k_grid, dtype=float)
    if len(k_grid) < 5 or np.any(np.diff(k_grid) <= 0.0):
        raise ValidationError("k_grid must be strictly increasing with >= 5 points")
    if grid is None:
        grid = default_radial_grid(pot, float(k_grid[0]), float(k_grid[-1]))
    _, _, d, dh, sig, _, alive = _solve_batch(pot, channel, k_grid, mode, grid, debias)

    if not np.all(alive):
        first = int(np.argmax(alive))
        if not np.all(alive[first:]):
            raise ValidationError("non-contiguous dead channels in k-grid")
    else:
        first = 0
    dh_cont = dh.copy()
    dh_cont[first:] = _continuity(dh[first:])
    delta = sig + dh_cont

    ddk = np.gradient(delta, k_grid)  # central differences, one-sided ends
    ddE = ddk / k_grid
    return PhaseShiftTable(
        channel=channel, mode=mode, coulomb_charge=pot.coulomb_charge,
        k_grid=k_grid, delta=delta, ddelta_dk=ddk, ddelta_dE=ddE,
        sigma=sig, delta_hat=dh_cont, alive=alive,
    )


def wigner_delay(table: PhaseShiftTable, k0: float) -> float:
    """Eisenbud-Wigner-Smith delay 2 d delta/dE at k0 (a.u. of time)."""
    return 2.0 * table.ddelta_dE_at(k0)


# ----------------------------------------------------------------------
# Cross-section helpers (optical-theorem checks)
# ----------------------------------------------------------------------

def scattering_amplitude(deltas, k: float, theta: float, sign: int = +1) -> complex:
    """f^(+-)(theta) = k^-1 sum (2l+1) (+-1)^l e^{+-i delta_l} sin delta_l P_l."""
    deltas = np.asarray(deltas, dtype=float)
    lmax = len(deltas) - 1
    pl = specfun.legendre_all(lmax, np.cos(theta))[:, 0]
    ls = np.arange(lmax + 1)
    terms = (2 * ls + 1) * (float(sign)) ** ls * np.exp(1j * sign * deltas) * np.sin(deltas) * pl
    return complex(np.sum(terms) / k)


def total_cross_section(deltas, k: float) -> float:
    """sigma_tot = (4 pi / k^2) sum (2l+1) sin^2 delta_l."""
    deltas = np.asarray(deltas, dtype=float)
    ls = np.arange(len(deltas))
    return float(4.0 * np.pi / k**2 * np.sum((2 * ls + 1) * np.sin(deltas) ** 2))
