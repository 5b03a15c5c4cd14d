"""Concrete quantum clocks and clock-reading statistics.

Two grid clocks are provided.  The free-particle clock is a Gaussian
wavepacket on a periodic position grid that drifts at unit speed while
spreading with the standard variance law sigma^2(t) = sigma0^2 +
t^2/(4 m^2 sigma0^2); its reading observable is the grid position.  The
ideal clock is a grid delta translating rigidly, one node per time step, so
its reading distribution is a discrete delta.  Both use spectrally defined
grid Hamiltonians (exact band-limited dynamics, no finite-difference
dispersion).

The clock-reading density over Newtonian time, its mean/variance expansion
coefficients, and the fundamental accuracy bound delta_T = T^a * Tp^(1-a)
with its associated spread-growth rate live here as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .states import (
    DensityOperator,
    HilbertSpace,
    Observable,
    interval_projector,
)

QUAD_TOL = 1e-8


class UnreachableReadingError(ValueError):
    """The requested clock reading is never attained on [0, tau]."""


def trapezoid_weights(t_grid: np.ndarray) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("time grid must be a 1-d array with at least 2 points")
    dt = np.diff(t)
    if not np.all(dt > 0):
        raise ValueError("time grid must be strictly increasing")
    w = np.zeros_like(t)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


@dataclass(frozen=True)
class AccuracyLaw:
    """Fundamental time-measurement uncertainty delta_T = T^a * Tp^(1-a)."""

    exponent_a: float
    t_planck: float

    def __post_init__(self):
        if not 0.0 < self.exponent_a <= 1.0:
            raise ValueError(f"exponent must lie in (0, 1], got {self.exponent_a}")
        if self.t_planck <= 0.0:
            raise ValueError(f"t_planck must be positive, got {self.t_planck}")

    def delta_t(self, T: float) -> float:
        if T < 0:
            raise ValueError("elapsed time must be nonnegative")
        if T == 0.0:
            return 0.0
        return T ** self.exponent_a * self.t_planck ** (1.0 - self.exponent_a)

    def accumulated_spread(self, T: float) -> float:
        """b(T) = Tp^(2(1-a)) * T^(2a); the decay exponent per unit omega^2."""
        if T < 0:
            raise ValueError("elapsed time must be nonnegative")
        if T == 0.0:
            return 0.0
        return self.t_planck ** (2.0 * (1.0 - self.exponent_a)) * T ** (2.0 * self.exponent_a)

    def spread_rate(self, T: float) -> float:
        """db/dT; at T = 0 the right-limit (infinite for a < 1/2)."""
        a = self.exponent_a
        if T < 0:
            raise ValueError("elapsed time must be nonnegative")
        if T == 0.0:
            if a < 0.5:
                return math.inf
            if a == 0.5:
                return self.t_planck
            return 0.0
        return 2.0 * a * self.t_planck ** (2.0 * (1.0 - a)) * T ** (2.0 * a - 1.0)


def accuracy_bound(law: AccuracyLaw, T: float) -> float:
    return law.delta_t(T)


def fundamental_b_rate(law: AccuracyLaw, T: float) -> float:
    return law.spread_rate(T)


@dataclass(frozen=True)
class ClockModel:
    """A quantum clock on a uniform position-like grid.

    ``dispersion`` holds the Hamiltonian eigenvalues at FFT-ordered wave
    numbers, so time evolution of the (pure) clock state is an elementwise
    phase in Fourier space.  The dense Hamiltonian is materialized lazily for
    full-space constructions.
    """

    kind: str
    x: np.ndarray
    dispersion: np.ndarray
    psi0: np.ndarray
    delta_c: float
    tau: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("x", "dispersion", "psi0"):
            arr = np.array(getattr(self, name), copy=True)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.delta_c <= 0:
            raise ValueError("clock window half-width must be positive")
        if self.tau <= 0:
            raise ValueError("operational horizon tau must be positive")

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @cached_property
    def space(self) -> HilbertSpace:
        return HilbertSpace((self.n,))

    @cached_property
    def t_obs(self) -> Observable:
        """Reading observable: the grid position operator."""
        return Observable(
            matrix=np.diag(self.x.astype(complex)),
            space=self.space,
            eigenvalues=self.x.astype(float),
            eigenvectors=np.eye(self.n, dtype=complex),
        )

    @cached_property
    def _fourier_basis(self) -> np.ndarray:
        n = self.n
        j = np.arange(n)
        return np.exp(2j * np.pi * np.outer(j, j) / n) / math.sqrt(n)

    @cached_property
    def h_clock(self) -> Observable:
        v = self._fourier_basis
        h = (v * self.dispersion) @ v.conj().T
        return Observable(
            matrix=h,
            space=self.space,
            eigenvalues=self.dispersion.astype(float),
            eigenvectors=v,
        )

    @cached_property
    def rho0(self) -> DensityOperator:
        return DensityOperator.from_vector(self.psi0, self.space)

    def reading_window(self, t0: float) -> tuple[float, float]:
        return t0 - self.delta_c, t0 + self.delta_c

    def window_projector(self, t0: float) -> np.ndarray:
        lo, hi = self.reading_window(t0)
        if hi < float(self.x[0]) or lo > float(self.x[-1]):
            raise UnreachableReadingError(
                f"reading {t0} lies outside the clock range [{self.x[0]}, {self.x[-1]}]"
            )
        return interval_projector(self.t_obs, lo, hi)

    def evolve_state(self, t_grid: np.ndarray) -> np.ndarray:
        """Clock wavefunction at each grid time, shape (n, n_t)."""
        t = np.atleast_1d(np.asarray(t_grid, dtype=float))
        psi_k = np.fft.fft(self.psi0)
        phases = np.exp(-1j * np.outer(self.dispersion, t))
        return np.fft.ifft(psi_k[:, None] * phases, axis=0)

    def window_probabilities(self, t0: float, t_grid: np.ndarray) -> np.ndarray:
        """Probability of the reading window around ``t0`` at each Newtonian time."""
        lo, hi = self.reading_window(t0)
        if hi < float(self.x[0]) or lo > float(self.x[-1]):
            raise UnreachableReadingError(
                f"reading {t0} lies outside the clock range [{self.x[0]}, {self.x[-1]}]"
            )
        mask = (self.x >= lo) & (self.x <= hi)
        psi_t = self.evolve_state(t_grid)
        return np.sum(np.abs(psi_t[mask, :]) ** 2, axis=0)

    def default_t_grid(self, n_points: int | None = None) -> np.ndarray:
        if self.kind == "ideal":
            # aligned with the grid spacing so rigid translation is exact
            m = int(math.floor(self.tau / self.dx + 1e-9))
            return self.dx * np.arange(m + 1)
        if n_points is None:
            # resolve the reading-density structure (packet width and window)
            # without inflating the full-space quadrature stacks
            sigma0 = float(self.params.get("sigma0", self.delta_c))
            dt = max(min(sigma0, self.delta_c) / 6.0, self.tau / 20000.0)
            n_points = int(math.ceil(self.tau / dt)) + 1
            n_points = min(max(n_points, 48), 20001)
        return np.linspace(0.0, self.tau, n_points)


def build_free_particle_clock(
    grid_points: int,
    mass: float,
    sigma0: float,
    delta_c: float,
    tau: float,
) -> ClockModel:
    """Spreading-wavepacket clock drifting at unit speed.

    The grid covers [-pad, tau + pad] periodically; the packet starts at the
    origin so its reading tracks elapsed Newtonian time.
    """
    if grid_points < 8:
        raise ValueError("grid_points must be at least 8")
    if mass <= 0 or sigma0 <= 0:
        raise ValueError("mass and sigma0 must be positive")
    if delta_c <= 0 or tau <= 0:
        raise ValueError("delta_c and tau must be positive")
    sigma_max = math.sqrt(sigma0**2 + tau**2 / (4.0 * mass**2 * sigma0**2))
    pad = max(8.0 * sigma_max, 4.0 * delta_c, 6.0 * sigma0)
    length = tau + 2.0 * pad
    dx = length / grid_points
    if sigma0 < 2.0 * dx:
        raise ValueError(
            f"grid too coarse to resolve sigma0: sigma0 = {sigma0} < 2 dx = {2 * dx:.4g}"
        )
    x = -pad + dx * np.arange(grid_points)
    k = 2.0 * np.pi * np.fft.fftfreq(grid_points, d=dx)
    dispersion = k + k**2 / (2.0 * mass)
    psi0 = np.exp(-(x**2) / (4.0 * sigma0**2)).astype(complex)
    psi0 /= np.linalg.norm(psi0)
    return ClockModel(
        kind="free_particle",
        x=x,
        dispersion=dispersion,
        psi0=psi0,
        delta_c=delta_c,
        tau=tau,
        params={"mass": mass, "sigma0": sigma0},
    )


def build_ideal_clock(grid_points: int, tau: float, delta_c: float | None = None) -> ClockModel:
    """Rigid-translation clock: a grid delta advancing one node per grid time.

    With the default window (just under half a grid step) the reading
    distribution on an aligned time grid is a discrete delta.
    """
    if grid_points < 8:
        raise ValueError("grid_points must be at least 8")
    if tau <= 0:
        raise ValueError("tau must be positive")
    spare = 4
    dx = tau / (grid_points - spare)
    x = dx * np.arange(grid_points)
    k = 2.0 * np.pi * np.fft.fftfreq(grid_points, d=dx)
    psi0 = np.zeros(grid_points, dtype=complex)
    psi0[0] = 1.0
    if delta_c is None:
        delta_c = 0.45 * dx
    return ClockModel(
        kind="ideal",
        x=x,
        dispersion=k,
        psi0=psi0,
        delta_c=delta_c,
        tau=tau,
        params={},
    )


@dataclass(frozen=True)
class ClockDensity:
    """Normalized density over Newtonian time for a fixed clock reading."""

    t_value: float
    t_grid: np.ndarray
    density: np.ndarray
    norm_check: float
    weight: float = 1.0

    def __post_init__(self):
        for name in ("t_grid", "density"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.t_grid.shape != self.density.shape:
            raise ValueError("t_grid and density shapes differ")
        if np.any(self.density < -1e-12):
            raise ValueError("density has negative entries")

    def mean(self) -> float:
        w = trapezoid_weights(self.t_grid)
        s = float(np.sum(w * self.density))
        return float(np.sum(w * self.density * self.t_grid) / s)

    def variance(self) -> float:
        w = trapezoid_weights(self.t_grid)
        s = float(np.sum(w * self.density))
        m = float(np.sum(w * self.density * self.t_grid) / s)
        return float(np.sum(w * self.density * (self.t_grid - m) ** 2) / s)

    def std(self) -> float:
        return math.sqrt(max(self.variance(), 0.0))


def clock_density(clock: ClockModel, t0: float, t_grid: np.ndarray | None = None) -> ClockDensity:
    """Density that Newtonian time is t given a clock reading in the window
    around ``t0``, normalized over [0, tau] on the supplied grid."""
    if t_grid is None:
        t_grid = clock.default_t_grid()
    t_grid = np.asarray(t_grid, dtype=float)
    raw = clock.window_probabilities(t0, t_grid)
    w = trapezoid_weights(t_grid)
    denom = float(np.sum(w * raw))
    if denom <= 0.0 or not np.isfinite(denom):
        raise UnreachableReadingError(
            f"clock never reads {t0} within [0, {clock.tau}]: normalization integral {denom}"
        )
    density = raw / denom
    norm_check = float(np.sum(w * density))
    return ClockDensity(
        t_value=float(t0), t_grid=t_grid, density=density, norm_check=norm_check, weight=denom
    )


def gaussian_clock_density(
    t0: float, t_grid: np.ndarray, width: float, mean: float | None = None
) -> ClockDensity:
    """Synthetic Gaussian reading density (grid-normalized)."""
    if width <= 0:
        raise ValueError("width must be positive")
    t_grid = np.asarray(t_grid, dtype=float)
    mu = t0 if mean is None else mean
    raw = np.exp(-((t_grid - mu) ** 2) / (2.0 * width**2))
    w = trapezoid_weights(t_grid)
    denom = float(np.sum(w * raw))
    density = raw / denom
    return ClockDensity(
        t_value=float(t0),
        t_grid=t_grid,
        density=density,
        norm_check=float(np.sum(w * density)),
        weight=denom,
    )


def delta_clock_density(t0: float, t_grid: np.ndarray) -> ClockDensity:
    """Discrete delta at the grid node nearest ``t0``."""
    t_grid = np.asarray(t_grid, dtype=float)
    idx = int(np.argmin(np.abs(t_grid - t0)))
    w = trapezoid_weights(t_grid)
    density = np.zeros_like(t_grid)
    density[idx] = 1.0 / w[idx]
    return ClockDensity(
        t_value=float(t0), t_grid=t_grid, density=density, norm_check=1.0, weight=1.0
    )


def density_moments(d: ClockDensity) -> tuple[float, float]:
    """First two expansion coefficients of the reading density around its label.

    Returns ``a = -(mean - T)`` and ``b = variance / 2``.  The ``b``
    coefficient is what enters the dephasing rate of the physical-time master
    equation; ``a`` is reported but deliberately not fed into evolution.
    """
    w = trapezoid_weights(d.t_grid)
    s = float(np.sum(w * d.density))
    mean = float(np.sum(w * d.density * d.t_grid) / s)
    var = float(np.sum(w * d.density * (d.t_grid - mean) ** 2) / s)
    return -(mean - d.t_value), 0.5 * var
