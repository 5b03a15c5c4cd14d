"""Event detection by undecidability, and the lattice of actualized properties.

A candidate event compares the clock-conditioned state with its pinching over
a complete family of outcome projectors.  When no projector test can tell the
two apart to better than exp(-alpha * N) for N environment particles, the
event is declared and the outcome statistics and compatible sub-properties
are recorded.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .clocks import ClockModel, clock_density, trapezoid_weights
from .relational import (
    ReductionEvent,
    _kron_stack,
    _split_space,
    conditional_probabilities,
    heisenberg_stack,
    reduce_state,
)
from .states import (
    TOL_PROJ,
    DensityOperator,
    Observable,
    ProjectorFamily,
    ValidationError,
    evolution_operator,
    spectral_norm,
)


def _schrodinger_frame(
    state: DensityOperator, clock: ClockModel, t0: float, h_system: Observable | None
) -> DensityOperator:
    """Rotate a Heisenberg-picture conditioned state into the Schroedinger
    frame labeled by the clock reading.  Pure change of frame: projector-test
    distinguishability of two states conditioned at the same reading is
    unaffected."""
    u_cl = evolution_operator(clock.h_clock, t0)
    d_sys = state.dim // clock.n
    u_sys = evolution_operator(h_system, t0) if h_system is not None else np.eye(d_sys, dtype=complex)
    u = np.kron(u_cl, u_sys)
    return DensityOperator(matrix=u @ state.matrix @ u.conj().T, space=state.space)


def rho_mod(
    rho: DensityOperator,
    clock: ClockModel,
    t0: float,
    h_system: Observable | None = None,
    t_grid: np.ndarray | None = None,
    picture: str = "schrodinger",
) -> DensityOperator:
    """State conditioned on the clock reading alone (window sandwich over t).

    ``picture="schrodinger"`` (default) labels the result by the reading, so
    an ideal clock yields the unitarily evolved system at t0 next to the
    collapsed clock window; ``"heisenberg"`` returns the raw sandwich integral.
    """
    out = reduce_state(rho, clock, [ReductionEvent(q_proj=None, t0=t0)], h_system, t_grid)
    if picture == "heisenberg":
        return out
    if picture != "schrodinger":
        raise ValueError(f"unknown picture {picture!r}")
    return _schrodinger_frame(out, clock, t0, h_system)


def rho_event(
    rho: DensityOperator,
    family: ProjectorFamily,
    clock: ClockModel,
    t0: float,
    h_system: Observable | None = None,
    t_grid: np.ndarray | None = None,
    picture: str = "schrodinger",
) -> DensityOperator:
    """Clock-conditioned state additionally pinched over the outcome family:
    what the state would be had one of the outcomes definitely occurred."""
    n_cl, d_sys = _split_space(rho, clock)
    if family.dim != d_sys:
        raise ValidationError(f"family dimension {family.dim} does not match system {d_sys}")
    if not family.complete:
        raise ValidationError("outcome family must be complete on the system factor")
    if t_grid is None:
        t_grid = clock.default_t_grid()
    t_grid = np.asarray(t_grid, dtype=float)
    w = trapezoid_weights(t_grid)
    nt = t_grid.size

    win_t = heisenberg_stack(clock.window_projector(t0), clock.h_clock, t_grid)
    eye_sys = np.broadcast_to(np.eye(d_sys, dtype=complex), (nt, d_sys, d_sys))
    pt_full = _kron_stack(np.ascontiguousarray(win_t), eye_sys)
    inner = pt_full @ rho.matrix @ pt_full

    eye_cl = np.broadcast_to(np.eye(n_cl, dtype=complex), (nt, n_cl, n_cl))
    num = np.zeros((rho.dim, rho.dim), dtype=complex)
    den = 0.0
    for p in family.projectors:
        pa_full = _kron_stack(eye_cl, heisenberg_stack(p, h_system, t_grid))
        term = pa_full @ inner @ pa_full
        num += np.einsum("t,tij->ij", w, term)
    den = float(np.einsum("t,tii->", w, inner).real)
    if den <= 1e-300:
        raise ValidationError("clock reading has zero probability")
    out = DensityOperator(matrix=num / den, space=rho.space)
    if picture == "heisenberg":
        return out
    if picture != "schrodinger":
        raise ValueError(f"unknown picture {picture!r}")
    return _schrodinger_frame(out, clock, t0, h_system)


def pinch(matrix: np.ndarray, family: ProjectorFamily) -> np.ndarray:
    """Sum of P rho P over the family members."""
    m = np.asarray(matrix, dtype=complex)
    return sum(p @ m @ p for p in family.projectors)


def distinguishability(rho1: DensityOperator, rho2: DensityOperator) -> float:
    """Best projector test: max over projectors P of |Tr(P (rho1 - rho2))|.

    Equals the sum of positive eigenvalues of the difference, i.e. half its
    trace norm for traceless differences.
    """
    if rho1.space.total_dim != rho2.space.total_dim:
        raise ValidationError("states live on different spaces")
    diff = rho1.matrix - rho2.matrix
    lam = np.linalg.eigvalsh(diff)
    return float(lam[lam > 0].sum())


def _greedy_matching(candidate: ProjectorFamily, essential: ProjectorFamily) -> list[int]:
    """For each essential member, the candidate member of largest overlap
    Tr(P_b P_a); ties resolve to the lowest candidate index."""
    matches = []
    for pa in essential.projectors:
        overlaps = np.array([float(np.einsum("ij,ji->", pb, pa).real) for pb in candidate.projectors])
        matches.append(int(np.argmax(overlaps)))
    return matches


def property_included(
    candidate: ProjectorFamily,
    essential: ProjectorFamily,
    tol: float = TOL_PROJ,
) -> bool:
    """Whether the candidate property is implied by the essential one.

    Operator-level inclusion: some candidate member absorbs each essential
    projector (P_b P_a = P_a) while every other member annihilates it.
    """
    if candidate.dim != essential.dim:
        raise ValidationError("families live on different spaces")
    matches = _greedy_matching(candidate, essential)
    for pa, m in zip(essential.projectors, matches):
        for idx, pb in enumerate(candidate.projectors):
            prod = pb @ pa
            if idx == m:
                if spectral_norm(prod - pa) > tol:
                    return False
            else:
                if spectral_norm(prod) > tol:
                    return False
    return True


@dataclass(frozen=True)
class PropertyLattice:
    """Inclusion verdicts for candidate properties against an essential family."""

    essential: ProjectorFamily
    candidate_labels: tuple
    candidate_families: tuple
    included: tuple
    transfer_residuals: tuple

    def as_dict(self) -> dict:
        return {
            "candidates": [
                {
                    "label": str(lbl),
                    "included": bool(inc),
                    "transfer_residual": None if res is None else float(res),
                }
                for lbl, inc, res in zip(
                    self.candidate_labels, self.included, self.transfer_residuals
                )
            ],
            "essential_ranks": list(self.essential.ranks()),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


def actualized_properties(
    essential: ProjectorFamily,
    candidates: list[tuple[str, ProjectorFamily]],
    state: DensityOperator | np.ndarray | None = None,
    tol: float = TOL_PROJ,
) -> PropertyLattice:
    """Mark each candidate included/excluded; for included candidates verify on
    the supplied state that pinching over the candidate equals pinching over
    the essential family (so included properties inherit undecidability)."""
    labels, families, included, residuals = [], [], [], []
    rho = None
    if state is not None:
        rho = state.matrix if isinstance(state, DensityOperator) else np.asarray(state, dtype=complex)
    pinched_essential = pinch(rho, essential) if rho is not None else None
    for label, fam in candidates:
        ok = property_included(fam, essential, tol)
        res = None
        if rho is not None:
            res = float(np.max(np.abs(pinch(rho, fam) - pinched_essential)))
        labels.append(label)
        families.append(fam)
        included.append(ok)
        residuals.append(res)
    return PropertyLattice(
        essential=essential,
        candidate_labels=tuple(labels),
        candidate_families=tuple(families),
        included=tuple(included),
        transfer_residuals=tuple(residuals),
    )


@dataclass(frozen=True)
class EventRecord:
    """Outcome of one event-detection query."""

    observable_label: str
    t0: float
    delta_c: float
    distinguishability: float
    epsilon: float
    n_particles: int
    alpha: float
    event_occurred: bool
    outcome_probabilities: dict
    actualized_properties: tuple
    metadata: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "observable_label": self.observable_label,
            "T0": self.t0,
            "delta_C": self.delta_c,
            "distinguishability": self.distinguishability,
            "epsilon": self.epsilon,
            "N_particles": self.n_particles,
            "alpha": self.alpha,
            "event_occurred": self.event_occurred,
            "outcome_probabilities": {str(k): v for k, v in self.outcome_probabilities.items()},
            "actualized_properties": [str(p) for p in self.actualized_properties],
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


def detect_event(
    rho: DensityOperator,
    family: ProjectorFamily,
    clock: ClockModel,
    t0: float,
    n_particles: int,
    alpha: float,
    h_system: Observable | None = None,
    candidates: list[tuple[str, ProjectorFamily]] | None = None,
    t_grid: np.ndarray | None = None,
    observable_label: str = "observable",
) -> EventRecord:
    """Declare an event when the conditioned state and its pinching cannot be
    told apart by any projector test to better than exp(-alpha * N)."""
    if n_particles < 1:
        raise ValueError("n_particles must be at least 1")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    modified = rho_mod(rho, clock, t0, h_system, t_grid)
    pinched = rho_event(rho, family, clock, t0, h_system, t_grid)
    d = distinguishability(modified, pinched)
    eps = math.exp(-alpha * n_particles)
    occurred = d < eps

    outcome_probabilities: dict = {}
    actualized: tuple = ()
    if occurred:
        probs = conditional_probabilities(rho, family, clock, t0, h_system, t_grid)
        outcome_probabilities = {lbl: float(p) for lbl, p in zip(family.labels, probs)}
        cand = candidates if candidates is not None else [(observable_label, family)]
        lattice = actualized_properties(family, cand, state=None)
        actualized = tuple(
            lbl for lbl, inc in zip(lattice.candidate_labels, lattice.included) if inc
        )

    try:
        ambiguity = clock_density(clock, t0, t_grid).std()
    except ValueError:
        ambiguity = float("nan")
    return EventRecord(
        observable_label=observable_label,
        t0=float(t0),
        delta_c=float(clock.delta_c),
        distinguishability=float(d),
        epsilon=float(eps),
        n_particles=int(n_particles),
        alpha=float(alpha),
        event_occurred=bool(occurred),
        outcome_probabilities=outcome_probabilities,
        actualized_properties=actualized,
        metadata={"clock_ambiguity_width": ambiguity},
    )
