"""Clock-conditioned probabilities, physical-time states, and the corrected
master equation.

All dynamics in the unobservable Newtonian time t is unitary.  Conditioning
on a clock reading T produces (i) conditional probabilities as quadratures of
projector sandwiches over t, (ii) a physical-time state as the reading-density
mixture of the unitary trajectory, and (iii) to second order in the reading
density width, a master equation whose double-commutator term dephases energy
off-diagonals at the rate the reading variance grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _accel
from .clocks import (
    AccuracyLaw,
    ClockDensity,
    ClockModel,
    UnreachableReadingError,
    clock_density,
    density_moments,
    trapezoid_weights,
)
from .states import (
    TOL_PSD,
    TOL_TRACE,
    DensityOperator,
    HilbertSpace,
    Observable,
    ProjectorFamily,
    ValidationError,
    hermitize,
    interval_projector,
    spectral_norm,
)


class GridMismatchError(ValueError):
    """Trajectory and density grids do not coincide."""


class ZeroProbabilityError(ValueError):
    """A reduction or history has vanishing probability."""


class MasterIntegrationError(RuntimeError):
    """The master integrator could not keep the state positive."""


def heisenberg_stack(op: np.ndarray, h: Observable | None, t_grid: np.ndarray) -> np.ndarray:
    """Heisenberg-evolved copies e^{iHt} A e^{-iHt} stacked over a time grid."""
    t = np.asarray(t_grid, dtype=float)
    a = np.asarray(op, dtype=complex)
    if h is None:
        return np.broadcast_to(a, (t.size,) + a.shape).copy()
    v = h.eigenvectors
    lam = h.eigenvalues
    tilde = v.conj().T @ a @ v
    phase = np.exp(1j * t[:, None, None] * (lam[:, None] - lam[None, :])[None, :, :])
    return v @ (tilde * phase) @ v.conj().T


def _kron_stack(a_t: np.ndarray, b_t: np.ndarray) -> np.ndarray:
    nt, da, _ = a_t.shape
    db = b_t.shape[1]
    out = np.einsum("tik,tjl->tijkl", a_t, b_t)
    return out.reshape(nt, da * db, da * db)


def _system_projector(q_proj: np.ndarray, space: HilbertSpace, n_clock: int) -> np.ndarray:
    """Accept a system-factor projector, or a full-space one acting trivially
    on the clock, and return the system-factor matrix."""
    d_full = space.total_dim
    d_sys = d_full // n_clock
    q = np.asarray(q_proj, dtype=complex)
    if q.shape == (d_sys, d_sys):
        b = q
    elif q.shape == (d_full, d_full):
        resh = q.reshape(n_clock, d_sys, n_clock, d_sys)
        b = np.einsum("iaib->ab", resh) / n_clock
        rebuilt = np.einsum("ij,ab->iajb", np.eye(n_clock), b).reshape(d_full, d_full)
        if np.max(np.abs(q - rebuilt)) > 1e-9:
            raise ValidationError("projector acts on the clock factor")
    else:
        raise ValidationError(
            f"projector shape {q.shape} matches neither the system ({d_sys}) nor the full space"
        )
    b = hermitize(b, 1e-8)
    if spectral_norm(b @ b - b) > 1e-8:
        raise ValidationError("supplied operator is not a projector")
    return b


def _split_space(rho: DensityOperator, clock: ClockModel) -> tuple[int, int]:
    dims = rho.space.dims
    if len(dims) < 2 or dims[0] != clock.n:
        raise ValidationError(
            f"state must live on clock (dim {clock.n}) tensor system, got factors {dims}"
        )
    return clock.n, int(np.prod(dims[1:]))


def conditional_probabilities(
    rho: DensityOperator,
    projectors: Sequence[np.ndarray] | ProjectorFamily,
    clock: ClockModel,
    t0: float,
    h_system: Observable | None = None,
    t_grid: np.ndarray | None = None,
) -> np.ndarray:
    """Probabilities that each projector's quantity holds when the clock reads
    in the window around ``t0``; shares one reading quadrature across members."""
    if isinstance(projectors, ProjectorFamily):
        projectors = projectors.projectors
    n_cl, d_sys = _split_space(rho, clock)
    if t_grid is None:
        t_grid = clock.default_t_grid()
    t_grid = np.asarray(t_grid, dtype=float)
    w = trapezoid_weights(t_grid)

    pt_cl = heisenberg_stack(clock.window_projector(t0), clock.h_clock, t_grid)
    eye_sys = np.broadcast_to(np.eye(d_sys, dtype=complex), (t_grid.size, d_sys, d_sys))
    pt_full = _kron_stack(pt_cl, eye_sys)
    eye_cl = np.broadcast_to(np.eye(n_cl, dtype=complex), (t_grid.size, n_cl, n_cl))

    values = np.empty(len(projectors), dtype=float)
    den = None
    for i, q in enumerate(projectors):
        b = _system_projector(q, rho.space, n_cl)
        pq_full = _kron_stack(eye_cl, heisenberg_stack(b, h_system, t_grid))
        num_t, den_t = _accel.sandwich_traces(pq_full, pt_full, rho.matrix)
        num = float(np.sum(w * num_t))
        den = float(np.sum(w * den_t))
        if den <= 0.0:
            raise UnreachableReadingError(
                f"clock never reads {t0} on this state: normalization {den}"
            )
        values[i] = num / den
    if np.any(values < -1e-8) or np.any(values > 1.0 + 1e-8):
        raise ArithmeticError(f"conditional probability left [0, 1]: {values}")
    return np.clip(values, 0.0, 1.0)


def conditional_probability(
    rho: DensityOperator,
    q_proj: np.ndarray,
    clock: ClockModel,
    t0: float,
    h_system: Observable | None = None,
    t_grid: np.ndarray | None = None,
) -> float:
    return float(conditional_probabilities(rho, [q_proj], clock, t0, h_system, t_grid)[0])


@dataclass(frozen=True)
class Trajectory:
    """States labeled by physical time."""

    times: np.ndarray
    states: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.array(self.times, dtype=float, copy=True)
        t.flags.writeable = False
        if np.any(np.diff(t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if t.size != len(self.states):
            raise ValueError("times and states lengths differ")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", tuple(self.states))

    def __len__(self) -> int:
        return len(self.states)

    def state_at(self, t: float, atol: float = 1e-9) -> DensityOperator:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > atol:
            raise KeyError(f"time {t} not on trajectory grid (nearest {self.times[idx]})")
        return self.states[idx]

    def to_csv(self, path) -> None:
        d = self.states[0].dim
        cols = ["T"]
        for i in range(d):
            for j in range(d):
                cols.append(f"re_{i}_{j}")
                cols.append(f"im_{i}_{j}")
        lines = ["# row-major matrix entries: re_i_j, im_i_j", ",".join(cols)]
        for t, st in zip(self.times, self.states):
            vals = [repr(float(t))]
            m = st.matrix
            for i in range(d):
                for j in range(d):
                    vals.append(repr(float(m[i, j].real)))
                    vals.append(repr(float(m[i, j].imag)))
            lines.append(",".join(vals))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


def newtonian_trajectory(rho0: DensityOperator, h: Observable, t_grid: np.ndarray) -> Trajectory:
    """Unitary Schroedinger evolution sampled on a Newtonian time grid."""
    t = np.asarray(t_grid, dtype=float)
    v, lam = h.eigenvectors, h.eigenvalues
    tilde = v.conj().T @ rho0.matrix @ v
    phase = np.exp(-1j * t[:, None, None] * (lam[:, None] - lam[None, :])[None, :, :])
    stack = v @ (tilde * phase) @ v.conj().T
    states = [DensityOperator(matrix=m, space=rho0.space) for m in stack]
    return Trajectory(times=t, states=tuple(states), metadata={"kind": "unitary"})


def physical_time_state(traj: Trajectory, density: ClockDensity) -> DensityOperator:
    """Mixture of the Newtonian trajectory weighted by the reading density."""
    if traj.times.size != density.t_grid.size or not np.allclose(
        traj.times, density.t_grid, rtol=0.0, atol=1e-12
    ):
        raise GridMismatchError("trajectory and clock density use different time grids")
    w = trapezoid_weights(density.t_grid)
    weights = w * density.density
    total = float(weights.sum())
    if total <= 0:
        raise ZeroProbabilityError("clock density has no weight on the trajectory grid")
    mix = np.einsum("t,tij->ij", weights / total, np.stack([s.matrix for s in traj.states]))
    return DensityOperator(matrix=mix, space=traj.states[0].space)


@dataclass(frozen=True)
class EmpiricalSpreadRate:
    """Accumulated reading-variance table b(T) measured from clock densities."""

    t_values: np.ndarray
    b_values: np.ndarray
    a_values: np.ndarray | None = None

    def __post_init__(self):
        t = np.array(self.t_values, dtype=float)
        b = np.array(self.b_values, dtype=float)
        order = np.argsort(t)
        t, b = t[order], b[order]
        t.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "t_values", t)
        object.__setattr__(self, "b_values", b)
        if self.a_values is not None:
            a = np.array(self.a_values, dtype=float)[order]
            a.flags.writeable = False
            object.__setattr__(self, "a_values", a)

    @classmethod
    def from_densities(cls, densities: Sequence[ClockDensity]) -> "EmpiricalSpreadRate":
        t, b, a = [], [], []
        for d in densities:
            a_i, b_i = density_moments(d)
            t.append(d.t_value)
            b.append(b_i)
            a.append(a_i)
        return cls(t_values=np.array(t), b_values=np.array(b), a_values=np.array(a))

    def accumulated(self, T: float) -> float:
        return float(np.interp(T, self.t_values, self.b_values))


RateSource = AccuracyLaw | EmpiricalSpreadRate | None


@dataclass(frozen=True)
class EvolutionSetup:
    """System Hamiltonian plus the dephasing-rate source for physical time."""

    h_system: Observable
    rate_source: RateSource = None
    dt: float | None = None
    sign_convention: int = 1

    def __post_init__(self):
        if self.sign_convention not in (1, -1):
            raise ValueError("sign_convention must be +1 or -1")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def bohr_frequencies(self) -> np.ndarray:
        w = self.h_system.eigenvalues
        return w[:, None] - w[None, :]

    @property
    def omega_max(self) -> float:
        w = self.h_system.eigenvalues
        return float(w[-1] - w[0]) if w.size else 0.0

    def accumulated_b(self, T: float) -> float:
        src = self.rate_source
        if src is None:
            return 0.0
        if isinstance(src, AccuracyLaw):
            return src.accumulated_spread(T)
        if isinstance(src, EmpiricalSpreadRate):
            return src.accumulated(T)
        if callable(src):
            return float(src(T))
        raise TypeError(f"unsupported rate source {type(src)!r}")

    def step_size(self, t_end: float) -> float:
        if self.dt is not None:
            return self.dt
        if self.omega_max > 0:
            return min(0.01 / self.omega_max, 0.01 * t_end)
        return 0.01 * t_end


def _checked_step(
    h: np.ndarray,
    rho: np.ndarray,
    t: float,
    dt: float,
    setup: EvolutionSetup,
    depth: int,
) -> np.ndarray:
    """RK4 step using the exact accumulated-spread increment as the step rate;
    halves the step (splitting the increment exactly) if positivity degrades."""
    db = setup.accumulated_b(t + dt) - setup.accumulated_b(t)
    rate = setup.sign_convention * db / dt
    out = _accel.rk4_dephasing_step(h, rho, dt, rate)
    out = 0.5 * (out + out.conj().T)
    if abs(out.trace().real - 1.0) > TOL_TRACE:
        raise MasterIntegrationError(f"trace drifted to {out.trace().real!r} at T = {t + dt}")
    if float(np.linalg.eigvalsh(out)[0]) < -TOL_PSD:
        if depth >= 8:
            raise MasterIntegrationError(
                f"positivity violated at T = {t + dt} after {depth} halvings"
            )
        half = _checked_step(h, rho, t, 0.5 * dt, setup, depth + 1)
        return _checked_step(h, half, t + 0.5 * dt, 0.5 * dt, setup, depth + 1)
    return out


def master_evolve(
    rho0: DensityOperator,
    setup: EvolutionSetup,
    t_end: float,
    record_stride: int = 1,
) -> Trajectory:
    """Integrate the physical-time master equation

        drho/dT = -i [H, rho] - (db/dT) [H, [H, rho]]

    with fixed-step RK4.  Within each step the rate is the exact increment of
    the accumulated spread b over the step, so the integrated off-diagonal
    decay exponent telescopes to omega_mn^2 * b(T) regardless of how singular
    db/dT is at T = 0.  Both terms are traceless and Hermiticity-preserving.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if rho0.dim != setup.h_system.dim:
        raise ValidationError("state and Hamiltonian dimensions differ")
    dt = setup.step_size(t_end)
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-12)))
    dt = t_end / n_steps
    h = np.ascontiguousarray(setup.h_system.matrix)
    rho = np.ascontiguousarray(rho0.matrix)
    times = [0.0]
    states = [rho0]
    for k in range(n_steps):
        rho = _checked_step(h, rho, k * dt, dt, setup, 0)
        if (k + 1) % record_stride == 0 or k == n_steps - 1:
            times.append((k + 1) * dt)
            states.append(DensityOperator(matrix=rho, space=rho0.space))
    meta = {
        "dt": dt,
        "sign_convention": setup.sign_convention,
        "rate_source": type(setup.rate_source).__name__ if setup.rate_source else "none",
        # only the second moment of the reading density drives the evolution;
        # the first-moment coefficient is reported by density_moments but not used
        "first_moment_used": False,
    }
    return Trajectory(times=np.array(times), states=tuple(states), metadata=meta)


def offdiag_decay_factor(omega: float, law: AccuracyLaw, T: float) -> float:
    """exp(-omega^2 * Tp^{2(1-a)} * T^{2a}): surviving fraction of an energy
    off-diagonal after physical time T under the fundamental accuracy bound."""
    return math.exp(-(omega**2) * law.accumulated_spread(T))


@dataclass(frozen=True)
class ReductionEvent:
    """One member of a commuting reduction set: an optional system projector
    and an optional clock window centered at ``t0``."""

    q_proj: np.ndarray | None = None
    t0: float | None = None
    delta: float | None = None


def _as_event(e) -> ReductionEvent:
    if isinstance(e, ReductionEvent):
        return e
    if isinstance(e, (tuple, list)) and len(e) in (2, 3):
        return ReductionEvent(*e)
    raise TypeError(f"cannot interpret reduction event {e!r}")


def reduce_state(
    rho: DensityOperator,
    clock: ClockModel,
    events: Sequence,
    h_system: Observable | None = None,
    t_grid: np.ndarray | None = None,
) -> DensityOperator:
    """Normalized quasi-projection: the ordered projector product sandwiched
    around the state and integrated over Newtonian time."""
    events = [_as_event(e) for e in events]
    if not events:
        raise ValueError("at least one reduction event is required")
    n_cl, d_sys = _split_space(rho, clock)
    if t_grid is None:
        t_grid = clock.default_t_grid()
    t_grid = np.asarray(t_grid, dtype=float)
    w = trapezoid_weights(t_grid)
    nt = t_grid.size

    sys_projs = []
    for e in events:
        if e.q_proj is not None:
            sys_projs.append(_system_projector(e.q_proj, rho.space, n_cl))
        else:
            sys_projs.append(None)
    present = [b for b in sys_projs if b is not None]
    for i in range(len(present)):
        for j in range(i + 1, len(present)):
            if spectral_norm(present[i] @ present[j] - present[j] @ present[i]) > 1e-9:
                raise ValidationError("reduction projectors do not commute")

    m_stack = None
    for e, b in zip(events, sys_projs):
        if e.t0 is not None:
            if e.delta is not None:
                lo, hi = e.t0 - e.delta, e.t0 + e.delta
                if hi < float(clock.x[0]) or lo > float(clock.x[-1]):
                    raise UnreachableReadingError(f"reading {e.t0} outside clock range")
                win = interval_projector(clock.t_obs, lo, hi)
            else:
                win = clock.window_projector(e.t0)
            a_t = heisenberg_stack(win, clock.h_clock, t_grid)
        else:
            a_t = np.broadcast_to(np.eye(n_cl, dtype=complex), (nt, n_cl, n_cl))
        if b is not None:
            b_t = heisenberg_stack(b, h_system, t_grid)
        else:
            b_t = np.broadcast_to(np.eye(d_sys, dtype=complex), (nt, d_sys, d_sys))
        factor = _kron_stack(np.ascontiguousarray(a_t), np.ascontiguousarray(b_t))
        m_stack = factor if m_stack is None else m_stack @ factor

    sandwich = m_stack @ rho.matrix @ np.conj(np.transpose(m_stack, (0, 2, 1)))
    num = np.einsum("t,tij->ij", w, sandwich)
    den = float(num.trace().real)
    if den <= 1e-300:
        raise ZeroProbabilityError("reduction has zero probability")
    return DensityOperator(matrix=num / den, space=rho.space)


def history_probability(
    rho: DensityOperator,
    clock: ClockModel,
    events: Sequence,
    h_system: Observable | None = None,
    t_grid: np.ndarray | None = None,
) -> float:
    """Chained probability of an ordered sequence of (projector, reading) events:
    each factor conditions on the state reduced by the preceding events."""
    events = [_as_event(e) for e in events]
    for e in events:
        if e.q_proj is None or e.t0 is None:
            raise ValueError("history events need both a projector and a clock reading")
    readings = [e.t0 for e in events]
    if any(b < a for a, b in zip(readings, readings[1:])):
        raise ValueError(f"history readings must be ordered in T, got {readings}")
    total = 1.0
    state = rho
    for i, e in enumerate(events):
        p = conditional_probability(state, e.q_proj, clock, e.t0, h_system, t_grid)
        total *= p
        if total == 0.0:
            return 0.0
        if i + 1 < len(events):
            state = reduce_state(state, clock, [e], h_system, t_grid)
    return total


def effective_projector(
    q_proj: np.ndarray,
    clock: ClockModel,
    t0: float,
    h_system: Observable | None = None,
    t_grid: np.ndarray | None = None,
) -> np.ndarray:
    """Reading-density average of the Heisenberg projector: the operator whose
    expectation reproduces the clock-conditioned probability on product states.
    A quasi projector; exact for a delta reading density."""
    density = clock_density(clock, t0, t_grid)
    q = np.asarray(q_proj, dtype=complex)
    stack = heisenberg_stack(q, h_system, density.t_grid)
    w = trapezoid_weights(density.t_grid)
    weights = w * density.density
    f = np.einsum("t,tij->ij", weights / weights.sum(), stack)
    return 0.5 * (f + f.conj().T)


def quasi_projector_defect(f: np.ndarray, tol: float = 1e-8) -> tuple[float, float]:
    """Rank and defect of a quasi projector: N = Tr F, eta = Tr(F - F^2)/N."""
    m = hermitize(np.asarray(f, dtype=complex), tol)
    lam = np.linalg.eigvalsh(m)
    if lam[0] < -tol or lam[-1] > 1.0 + tol:
        raise ValueError(f"spectrum outside [0, 1]: [{lam[0]:.3e}, {lam[-1]:.6f}]")
    n = float(lam.sum())
    if n <= tol:
        raise ValueError("operator has (numerically) zero trace")
    eta = float(np.sum(lam - lam**2) / n)
    return n, eta
