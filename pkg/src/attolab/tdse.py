"""2D polarization-plane TDSE propagator (velocity gauge, split operator).

The Hamiltonian in the dipole approximation is

    H(t) = (p + A(t))^2 / 2 + V(r),        E(t) = -dA/dt,

on a square grid with periodic FFT boundaries.  One Strang step is a
half potential phase, an exact kinetic phase in momentum space with the
shift p -> p + A(t_mid), and a second half potential phase; an optional
cos^8 absorbing mask multiplies the state once per step.  With A = 0
the same stepper performs field-free post-pulse propagation.

Ground states are prepared by imaginary-time relaxation of the same
split stepper; the reported energy is the Rayleigh quotient of the
relaxed state (the per-step log-derivative of the norm is used as the
convergence monitor).

A propagation owns its FieldState exclusively; all step functions
return new states and never mutate their inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft as sfft

from .errors import (
    ConvergenceError,
    GridExhaustedError,
    StabilityError,
    ValidationError,
)
from .radial import PotentialModel

FFT_WORKERS = -1
ABSORBER_WIDTH_FRACTION = 0.15
BOUNDARY_DENSITY_TOL = 1e-8


@dataclass(frozen=True)
class PulseSpec:
    """sin^2-envelope pulse defined by its vector potential.

    A(t) = -A0 f(t)/sqrt(1+eps^2) [cos(w t + phi0) x + eps sin(w t + phi0) y]
    with f(t) = sin^2(pi t / T_p), T_p = n_cycles 2 pi / w, and A = 0
    outside [0, T_p].  The envelope guarantees A(0) = A(T_p) = 0, hence
    zero net momentum kick (int E dt = 0) componentwise.
    """

    a0: float
    omega: float
    n_cycles: int
    ellipticity: float = 1.0
    carrier_phase: float = 0.0

    def __post_init__(self):
        if self.a0 < 0 or self.omega <= 0 or self.n_cycles < 1:
            raise ValidationError("pulse requires a0 >= 0, omega > 0, n_cycles >= 1")

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    @property
    def duration(self) -> float:
        return self.n_cycles * self.period

    @property
    def quiver_radius(self) -> float:
        return self.a0 / self.omega

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0.0) & (t <= self.duration)
        return np.where(inside, np.sin(np.pi * t / self.duration) ** 2, 0.0)

    def vector_potential(self, t):
        """A(t) as an array shaped like t + (2,)."""
        t = np.asarray(t, dtype=float)
        f = self.envelope(t)
        pref = -self.a0 / np.sqrt(1.0 + self.ellipticity**2)
        th = self.omega * t + self.carrier_phase
        return np.stack([pref * f * np.cos(th),
                         pref * f * self.ellipticity * np.sin(th)], axis=-1)

    def electric_field(self, t):
        """E(t) = -dA/dt, analytic."""
        t = np.asarray(t, dtype=float)
        inside = (t >= 0.0) & (t <= self.duration)
        f = self.envelope(t)
        df = np.where(inside,
                      (np.pi / self.duration) * np.sin(2.0 * np.pi * t / self.duration),
                      0.0)
        pref = self.a0 / np.sqrt(1.0 + self.ellipticity**2)
        th = self.omega * t + self.carrier_phase
        ex = pref * (df * np.cos(th) - f * self.omega * np.sin(th))
        ey = pref * self.ellipticity * (df * np.sin(th) + f * self.omega * np.cos(th))
        return np.stack([ex, ey], axis=-1)

    def reference_angle(self) -> float:
        """Direction (rad) of -A at the envelope peak t = T_p/2.

        This is the drift momentum predicted for release at the field
        maximum and the zero point for attoclock offset angles.
        """
        a = self.vector_potential(0.5 * self.duration)
        return float(np.arctan2(-a[1], -a[0]))


@dataclass
class FieldState:
    """Complex wavefunction on the square grid [-L, L)^2.

    psi[i, j] is the amplitude at (x_i, y_j) with x_i = -L + i dx
    (meshgrid 'ij' convention).  ``norm_history`` records (t, norm)
    samples taken during propagation.
    """

    psi: np.ndarray
    extent: float
    t: float = 0.0
    gauge: str = "velocity"
    norm_history: list = field(default_factory=list)

    def __post_init__(self):
        n = self.psi.shape[0]
        if self.psi.shape != (n, n):
            raise ValidationError("FieldState grid must be square")

    @property
    def n(self) -> int:
        return self.psi.shape[0]

    @property
    def dx(self) -> float:
        return 2.0 * self.extent / self.n

    def axis(self) -> np.ndarray:
        return -self.extent + self.dx * np.arange(self.n)

    def meshes(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.axis()
        return np.meshgrid(x, x, indexing="ij")

    def k_axis(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.psi) ** 2)) * self.dx)

    def overlap(self, other: "FieldState") -> complex:
        """<self|other> on the shared grid."""
        if self.psi.shape != other.psi.shape or self.extent != other.extent:
            raise ValidationError("overlap requires identical grids")
        return complex(np.vdot(self.psi, other.psi) * self.dx**2)

    def mean_momentum(self) -> np.ndarray:
        """<p> (canonical momentum) from the spectral density."""
        psi_k = sfft.fft2(self.psi, workers=FFT_WORKERS)
        w = np.abs(psi_k) ** 2
        total = w.sum()
        k = self.k_axis()
        px = (w.sum(axis=1) * k).sum() / total
        py = (w.sum(axis=0) * k).sum() / total
        return np.array([px, py])


def grid_potential(pot: PotentialModel, state_or_n, extent: float | None = None) -> np.ndarray:
    """Evaluate the central potential V(|r|) on the square grid."""
    if isinstance(state_or_n, FieldState):
        n, extent = state_or_n.n, state_or_n.extent
    else:
        n = int(state_or_n)
    x = -extent + (2.0 * extent / n) * np.arange(n)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    r = np.hypot(xx, yy)
    r = np.maximum(r, 1e-12)  # central value finite for our soft kinds
    return pot(r)


def absorber_mask(n: int, extent: float,
                  width_fraction: float = ABSORBER_WIDTH_FRACTION) -> np.ndarray:
    """Separable cos^8 mask over the outer ``width_fraction`` of the box."""
    x = -extent + (2.0 * extent / n) * np.arange(n)
    x0 = (1.0 - width_fraction) * extent
    ramp = np.clip((np.abs(x) - x0) / (extent - x0), 0.0, 1.0)
    m1 = np.cos(0.5 * np.pi * ramp) ** 8
    return np.outer(m1, m1)


# ----------------------------------------------------------------------
# Targets (ground-state preparation)
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class TargetModel:
    """A central potential with its relaxed grid ground state."""

    potential: PotentialModel
    e0: float
    psi0: FieldState
    e0_log_derivative: float

    @property
    def ionization_potential(self) -> float:
        return -self.e0


def _apply_hamiltonian(psi: np.ndarray, v: np.ndarray, k2: np.ndarray) -> np.ndarray:
    """H0 psi with the spectral Laplacian (A = 0)."""
    tpsi = sfft.ifft2(k2 * sfft.fft2(psi, workers=FFT_WORKERS), workers=FFT_WORKERS)
    return 0.5 * tpsi + v * psi


def imaginary_time_ground_state(pot: PotentialModel, n: int, extent: float,
                                dtau: float = 0.2, tol: float = 1e-12,
                                max_steps: int = 100_000,
                                seed_width: float | None = None) -> TargetModel:
    """Relax to the grid ground state by imaginary-time split stepping.

    The per-step energy estimate is the log-derivative of the norm,
    E = -ln||psi'|| / dtau; each stage runs until it changes by less
    than a stage tolerance, then dtau is refined (its Trotter bias is
    O(dtau^2)).  The returned e0 is the Rayleigh quotient of the final
    state, so <psi0|H0|psi0> = e0 holds exactly by construction.
    """
    if extent < 30.0:
        raise ValidationError("ground-state grids need extent >= 30 bohr")
    dx = 2.0 * extent / n
    x = -extent + dx * np.arange(n)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    rr = np.hypot(xx, yy)
    v = pot(np.maximum(rr, 1e-12))
    k1 = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
    k2 = k1[:, None] ** 2 + k1[None, :] ** 2

    if seed_width is None:
        seed_width = max(2.0, pot.range)
    psi = np.exp(-(rr / (2.0 * seed_width)) ** 2).astype(complex)
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2)) * dx

    e_log = np.inf
    steps_used = 0
    for stage_dtau in (dtau, dtau / 10.0, dtau / 100.0):
        exp_v = np.exp(-0.5 * stage_dtau * v)
        exp_t = np.exp(-0.5 * stage_dtau * k2)
        stage_tol = max(tol, 1e-13) if stage_dtau < dtau else 1e-9
        prev = np.inf
        while steps_used < max_steps:
            psi = exp_v * psi
            psi = sfft.ifft2(exp_t * sfft.fft2(psi, workers=FFT_WORKERS),
                             workers=FFT_WORKERS)
            psi = exp_v * psi
            nrm = np.sqrt(np.sum(np.abs(psi) ** 2)) * dx
            e_log = -np.log(nrm) / stage_dtau
            psi /= nrm
            steps_used += 1
            if abs(e_log - prev) < stage_tol:
                break
            prev = e_log
        else:
            raise ConvergenceError(
                f"imaginary time did not converge within {max_steps} steps")

    psi = np.real(psi).astype(complex)  # relaxation keeps a real-positive state
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2)) * dx
    hpsi = _apply_hamiltonian(psi, v, k2)
    e0 = float(np.real(np.vdot(psi, hpsi)) * dx**2)
    state = FieldState(psi, extent, t=0.0)
    return TargetModel(pot, e0, state, float(e_log))


# ----------------------------------------------------------------------
# Propagation
# ----------------------------------------------------------------------

def _spectral_kmax(psi: np.ndarray, k1: np.ndarray, tail_power: float = 1e-4) -> float:
    """|k| below which all but ``tail_power`` of the spectral power lives.

    Exponentially small occupation tails carry no Strang error, so the
    stability bound is sized by the power-carrying momenta.
    """
    w = np.abs(sfft.fft2(psi, workers=FFT_WORKERS)) ** 2
    kmag = np.hypot(np.abs(k1)[:, None], np.abs(k1)[None, :]).ravel()
    order = np.argsort(kmag)
    cum = np.cumsum(w.ravel()[order])
    cut = np.searchsorted(cum, (1.0 - tail_power) * cum[-1])
    return float(kmag[order][min(cut, len(order) - 1)])


def _check_stability(state: FieldState, pulse: PulseSpec | None, dt: float) -> None:
    """dt times the reachable kinetic energy must stay below 1/2.

    The kinetic step itself is exact; the bound protects the Strang
    splitting error, sized by the state's occupied momenta shifted by
    the peak vector potential.
    """
    k1 = state.k_axis()
    kmax = _spectral_kmax(state.psi, k1)
    if pulse is not None:
        kmax += pulse.a0
    if dt * 0.5 * kmax**2 > 0.5:
        raise StabilityError(
            f"dt = {dt} times reachable kinetic energy {0.5 * kmax**2:.2f} "
            "exceeds 0.5; reduce dt")


def _step_factory(state: FieldState, v: np.ndarray, dt: float):
    """Precompute the pieces of one Strang step on this grid."""
    k1 = state.k_axis()
    exp_v_half = np.exp(-0.5j * dt * v)
    exp_kin_x0 = np.exp(-0.5j * dt * k1**2)  # A = 0 fast path

    def kinetic_phase(ax: float, ay: float):
        if ax == 0.0 and ay == 0.0:
            return np.outer(exp_kin_x0, exp_kin_x0)
        ex = np.exp(-0.5j * dt * (k1 + ax) ** 2)
        ey = np.exp(-0.5j * dt * (k1 + ay) ** 2)
        return np.outer(ex, ey)

    return exp_v_half, kinetic_phase


def _propagate(state: FieldState, pot: PotentialModel, pulse: PulseSpec | None,
               t_end: float, dt: float, mask: np.ndarray | None,
               norm_stride: int = 50,
               boundary_check: bool = False) -> FieldState:
    span = t_end - state.t
    if span <= 0.0:
        return replace(state, norm_history=list(state.norm_history))
    n_full = int(np.floor(span / dt + 1e-9))
    rem = span - n_full * dt  # land exactly on t_end with a short step
    v = grid_potential(pot, state)
    exp_v_half, kinetic_phase = _step_factory(state, v, dt)

    psi = state.psi.copy()
    t = state.t
    history = list(state.norm_history)
    dx = state.dx

    def one_step(psi, t, step, exp_vh, kin):
        if pulse is not None:
            ax, ay = pulse.vector_potential(t + 0.5 * step)
        else:
            ax = ay = 0.0
        psi *= exp_vh
        psi_k = sfft.fft2(psi, workers=FFT_WORKERS)
        psi_k *= kin(float(ax), float(ay))
        psi = sfft.ifft2(psi_k, workers=FFT_WORKERS)
        psi *= exp_vh
        if mask is not None:
            psi *= mask
        return psi

    for i in range(n_full):
        psi = one_step(psi, t, dt, exp_v_half, kinetic_phase)
        t += dt
        if (i + 1) % norm_stride == 0 or i == n_full - 1:
            nrm = float(np.sqrt(np.sum(np.abs(psi) ** 2)) * dx)
            history.append((t, nrm))
            if nrm < 0.1 * (history[0][1] if history else 1.0):
                # structured diagnostic: losing > 90% of the norm almost
                # always means a misconfigured mask
                history.append((t, float("nan")))
                raise StabilityError(
                    f"norm collapsed to {nrm:.3e} during propagation; "
                    "check the absorber configuration")
    if rem > 1e-10:
        exp_vh_r, kin_r = _step_factory(state, v, rem)
        psi = one_step(psi, t, rem, exp_vh_r, kin_r)
        t += rem
    out = FieldState(psi, state.extent, t=t_end, gauge=state.gauge,
                     norm_history=history)
    if boundary_check:
        frame_density = boundary_frame_density(out)
        if frame_density > BOUNDARY_DENSITY_TOL:
            raise GridExhaustedError(
                f"probability density {frame_density:.2e} at the boundary "
                f"frame exceeds {BOUNDARY_DENSITY_TOL}",
                required_extent=1.5 * state.extent)
    return out


def boundary_frame_density(state: FieldState, cells: int = 3) -> float:
    """Max |psi|^2 within ``cells`` grid cells of the box boundary."""
    p = np.abs(state.psi) ** 2
    frame = np.concatenate([
        p[:cells].ravel(), p[-cells:].ravel(),
        p[:, :cells].ravel(), p[:, -cells:].ravel()])
    return float(frame.max())


def propagate_pulse(state: FieldState, target: TargetModel, pulse: PulseSpec,
                    dt: float = 0.01, absorber: bool = False,
                    norm_stride: int = 50) -> FieldState:
    """Propagate through the laser pulse from the state's time to T_p."""
    if dt > 0.02:
        raise ValidationError("pulse propagation requires dt <= 0.02 a.u.")
    excursion = pulse.quiver_radius + pulse.a0 * pulse.duration / np.sqrt(1 + pulse.ellipticity**2)
    if not absorber and excursion + 30.0 > state.extent:
        raise ValidationError(
            f"grid extent {state.extent} cannot contain quiver+drift "
            f"excursion {excursion:.0f} + 30 bohr margin without an absorber")
    _check_stability(state, pulse, dt)
    mask = absorber_mask(state.n, state.extent) if absorber else None
    return _propagate(state, target.potential, pulse, pulse.duration, dt, mask,
                      norm_stride=norm_stride)


def post_pulse_propagate(state: FieldState, target: TargetModel, tau: float,
                         dt: float = 0.05, absorber: bool = False,
                         boundary_check: bool = True,
                         norm_stride: int = 200) -> FieldState:
    """Field-free propagation for a duration tau after the pulse.

    Production spectrum extraction keeps the absorber off (the grid is
    enlarged instead) so outgoing flux is retained for projection; an
    outgoing packet reaching the boundary raises GridExhaustedError.
    """
    if tau < 0.0:
        raise ValidationError("tau must be >= 0")
    if tau == 0.0:
        return replace(state, norm_history=list(state.norm_history))
    _check_stability(state, None, dt)
    mask = absorber_mask(state.n, state.extent) if absorber else None
    return _propagate(state, target.potential, None, state.t + tau, dt, mask,
                      norm_stride=norm_stride, boundary_check=boundary_check)


# ----------------------------------------------------------------------
# Grid surgery (PPW pipeline) and checkpoints
# ----------------------------------------------------------------------

def spectral_resample(state: FieldState, n_new: int) -> FieldState:
    """Coarsen the grid to n_new points by cropping momentum space.

    The box size is unchanged, dx grows to 2 extent / n_new.  Exact for
    states band-limited below the new Nyquist momentum pi/dx'; used
    before zero-padding the box for long field-free flights.
    """
    n = state.n
    if n_new == n:
        return replace(state, norm_history=list(state.norm_history))
    if n_new > n or n_new % 2 != 0:
        raise ValidationError("spectral_resample needs an even n_new <= n")
    psi_k = np.fft.fftshift(sfft.fft2(state.psi, workers=FFT_WORKERS))
    lo = n // 2 - n_new // 2
    block = psi_k[lo : lo + n_new, lo : lo + n_new].copy()
    # isotropic band limit: corner modes beyond the per-axis Nyquist of
    # the new grid would dominate the reachable kinetic energy while
    # carrying negligible power
    dx_new = 2.0 * state.extent / n_new
    k1 = np.fft.fftshift(2.0 * np.pi * np.fft.fftfreq(n_new, d=dx_new))
    kmag = np.hypot(k1[:, None], k1[None, :])
    block[kmag > np.pi / dx_new] = 0.0
    psi_small = sfft.ifft2(np.fft.ifftshift(block), workers=FFT_WORKERS)
    psi_small = psi_small * (n_new / n) ** 2
    return FieldState(np.ascontiguousarray(psi_small), state.extent, t=state.t,
                      gauge=state.gauge, norm_history=list(state.norm_history))


def pad_box(state: FieldState, n_new: int) -> FieldState:
    """Embed the state centered in a larger box at the same dx."""
    n = state.n
    if n_new < n:
        raise ValidationError("pad_box cannot shrink the grid")
    if (n_new - n) % 2 != 0:
        raise ValidationError("pad_box needs an even size difference")
    psi = np.zeros((n_new, n_new), dtype=complex)
    lo = (n_new - n) // 2
    psi[lo : lo + n, lo : lo + n] = state.psi
    extent_new = state.extent * n_new / n
    return FieldState(psi, extent_new, t=state.t, gauge=state.gauge,
                      norm_history=list(state.norm_history))


def save_checkpoint(state: FieldState, prefix: str,
                    pulse: PulseSpec | None = None,
                    potential: PotentialModel | None = None) -> None:
    """Raw little-endian complex128 dump plus a JSON sidecar."""
    state.psi.astype("<c16").tofile(f"{prefix}.bin")
    meta = {
        "n": state.n,
        "extent": state.extent,
        "t": state.t,
        "gauge": state.gauge,
        "dtype": "complex128",
        "endianness": "little",
        "pulse": None if pulse is None else {
            "a0": pulse.a0, "omega": pulse.omega, "n_cycles": pulse.n_cycles,
            "ellipticity": pulse.ellipticity, "carrier_phase": pulse.carrier_phase},
        "potential": None if potential is None else {
            "kind": potential.kind, "params": list(potential.params),
            "coulomb_charge": potential.coulomb_charge},
    }
    with open(f"{prefix}.json", "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_checkpoint(prefix: str) -> tuple[FieldState, dict]:
    with open(f"{prefix}.json") as fh:
        meta = json.load(fh)
    if meta["dtype"] != "complex128" or meta["endianness"] != "little":
        raise ValidationError("unsupported checkpoint dtype/endianness")
    psi = np.fromfile(f"{prefix}.bin", dtype="<c16").reshape(meta["n"], meta["n"])
    return FieldState(psi.astype(complex), meta["extent"], t=meta["t"],
                      gauge=meta["gauge"]), meta
