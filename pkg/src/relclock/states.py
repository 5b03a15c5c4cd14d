"""Dense complex operator algebra on finite-dimensional composite Hilbert spaces.

States are density matrices, observables are Hermitian matrices with cached
spectral data, and measurements are projector families.  Everything is built
on plain ``numpy.ndarray`` with ``complex128`` entries; all wrapper objects
are immutable after construction and safe to share between workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

TOL_HERM = 1e-9
TOL_TRACE = 1e-9
TOL_PSD = 1e-9
TOL_PROJ = 1e-9
TOL_UNITARY = 1e-9

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
for _m in (SIGMA_X, SIGMA_Y, SIGMA_Z):
    _m.flags.writeable = False


class ValidationError(ValueError):
    """An operator failed a structural invariant (hermiticity, trace, ...)."""


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=complex, copy=True, order="C")
    out.flags.writeable = False
    return out


def herm_defect(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def hermitize(m: np.ndarray, tol: float = TOL_HERM) -> np.ndarray:
    """Symmetrize a numerically-Hermitian matrix; reject real asymmetry."""
    d = herm_defect(m)
    if d > tol:
        raise ValidationError(f"matrix is not Hermitian: max asymmetry {d:.3e} > {tol:.1e}")
    return 0.5 * (m + m.conj().T)


@dataclass(frozen=True)
class HilbertSpace:
    """Composite Hilbert space given by an ordered tuple of factor dimensions."""

    dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if not self.dims or any(d < 1 for d in self.dims):
            raise ValidationError(f"subsystem dimensions must be >= 1, got {self.dims}")

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    def __mul__(self, other: "HilbertSpace") -> "HilbertSpace":
        return HilbertSpace(self.dims + other.dims)


def _check_square(m: np.ndarray, dim: int | None = None, what: str = "operator") -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"{what} must be a square matrix, got shape {m.shape}")
    if dim is not None and m.shape[0] != dim:
        raise ValidationError(f"{what} has dimension {m.shape[0]}, expected {dim}")


@dataclass(frozen=True)
class DensityOperator:
    """Unit-trace positive Hermitian matrix on a composite space."""

    matrix: np.ndarray
    space: HilbertSpace

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        _check_square(m, self.space.total_dim, "density matrix")
        m = hermitize(m, TOL_HERM)
        tr = float(m.trace().real)
        if abs(tr - 1.0) > TOL_TRACE:
            raise ValidationError(f"density matrix trace {tr!r} differs from 1 beyond {TOL_TRACE:.1e}")
        lo = float(np.linalg.eigvalsh(m)[0])
        if lo < -TOL_PSD:
            raise ValidationError(f"density matrix has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "matrix", _freeze(m))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, dims: Sequence[int] | HilbertSpace) -> "DensityOperator":
        space = dims if isinstance(dims, HilbertSpace) else HilbertSpace(tuple(dims))
        return cls(matrix=np.asarray(matrix, dtype=complex), space=space)

    @classmethod
    def from_vector(cls, psi: np.ndarray, dims: Sequence[int] | HilbertSpace) -> "DensityOperator":
        v = np.asarray(psi, dtype=complex).ravel()
        n = np.linalg.norm(v)
        if n == 0:
            raise ValidationError("state vector is zero")
        v = v / n
        return cls.from_matrix(np.outer(v, v.conj()), dims)

    @classmethod
    def maximally_mixed(cls, dims: Sequence[int] | HilbertSpace) -> "DensityOperator":
        space = dims if isinstance(dims, HilbertSpace) else HilbertSpace(tuple(dims))
        d = space.total_dim
        return cls(matrix=np.eye(d, dtype=complex) / d, space=space)

    @property
    def dim(self) -> int:
        return self.space.total_dim

    def purity(self) -> float:
        return float(np.einsum("ij,ji->", self.matrix, self.matrix).real)

    def expectation(self, op: np.ndarray) -> float:
        return float(np.einsum("ij,ji->", op, self.matrix).real)

    def tensor(self, other: "DensityOperator") -> "DensityOperator":
        return DensityOperator(np.kron(self.matrix, other.matrix), self.space * other.space)


@dataclass(frozen=True)
class Observable:
    """Hermitian operator with a cached spectral decomposition.

    ``eigenvalues`` are ascending; ``eigenvectors`` holds orthonormal
    eigenvectors as columns.  A precomputed decomposition may be supplied
    (used when the spectrum is known analytically, e.g. spectral grid
    operators); it is verified against the same tolerances.
    """

    matrix: np.ndarray
    space: HilbertSpace
    eigenvalues: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    eigenvectors: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        _check_square(m, self.space.total_dim, "observable")
        m = hermitize(m, TOL_HERM)
        object.__setattr__(self, "matrix", _freeze(m))
        if self.eigenvalues is None or self.eigenvectors is None:
            w, v = np.linalg.eigh(self.matrix)
        else:
            w = np.asarray(self.eigenvalues, dtype=float).ravel()
            v = np.asarray(self.eigenvectors, dtype=complex)
            order = np.argsort(w, kind="stable")
            w, v = w[order], v[:, order]
        d = v.shape[0]
        unitary_defect = float(np.max(np.abs(v.conj().T @ v - np.eye(d))))
        if unitary_defect > TOL_UNITARY:
            raise ValidationError(f"eigenvector matrix not unitary: defect {unitary_defect:.3e}")
        object.__setattr__(self, "eigenvalues", _freeze_real(w))
        object.__setattr__(self, "eigenvectors", _freeze(v))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, dims: Sequence[int] | HilbertSpace | None = None) -> "Observable":
        m = np.asarray(matrix, dtype=complex)
        if dims is None:
            space = HilbertSpace((m.shape[0],))
        else:
            space = dims if isinstance(dims, HilbertSpace) else HilbertSpace(tuple(dims))
        return cls(matrix=m, space=space)

    @property
    def dim(self) -> int:
        return self.space.total_dim

    def norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues))) if self.dim else 0.0


def _freeze_real(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ProjectorFamily:
    """Orthogonal projectors labeled by eigenvalues or [lo, hi] intervals.

    When ``complete`` is set the projectors must resolve the identity.
    """

    labels: tuple
    projectors: tuple
    complete: bool = True

    def __post_init__(self):
        if len(self.labels) != len(self.projectors):
            raise ValidationError("labels and projectors must have equal length")
        projs = []
        for p in self.projectors:
            p = hermitize(np.asarray(p, dtype=complex), TOL_PROJ)
            if spectral_norm(p @ p - p) > TOL_PROJ:
                raise ValidationError("family member is not idempotent")
            projs.append(_freeze(p))
        for i in range(len(projs)):
            for j in range(i + 1, len(projs)):
                if spectral_norm(projs[i] @ projs[j]) > TOL_PROJ:
                    raise ValidationError(f"projectors {i} and {j} are not orthogonal")
        if self.complete and projs:
            total = sum(projs)
            if spectral_norm(total - np.eye(total.shape[0])) > TOL_PROJ:
                raise ValidationError("family flagged complete but does not resolve the identity")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "projectors", tuple(projs))

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0] if self.projectors else 0

    def __len__(self) -> int:
        return len(self.projectors)

    def ranks(self) -> tuple[int, ...]:
        return tuple(int(round(p.trace().real)) for p in self.projectors)


def spectral_norm(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of square matrices, left to right."""
    mats = [np.asarray(o, dtype=complex) for o in ops]
    for m in mats:
        _check_square(m)
    return reduce(np.kron, mats)


def tensor_with_identity(op: np.ndarray, dims: Sequence[int], position: int) -> np.ndarray:
    """Embed a single-factor operator at ``position`` in a product of identities."""
    mats = [np.eye(d, dtype=complex) for d in dims]
    _check_square(np.asarray(op), dims[position], "embedded operator")
    mats[position] = np.asarray(op, dtype=complex)
    return tensor(*mats)


def partial_trace_matrix(mat: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every factor not in ``keep``; kept factors stay in their order."""
    dims = tuple(int(d) for d in dims)
    keep = sorted(set(int(k) for k in keep))
    n = len(dims)
    if not keep:
        raise ValueError("keep must name at least one subsystem")
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"subsystem index out of range for {n} factors: {keep}")
    m = np.asarray(mat, dtype=complex).reshape(dims + dims)
    # einsum with traced row/col axes identified
    row = list(range(n))
    col = list(range(n, 2 * n))
    for ax in range(n):
        if ax not in keep:
            col[ax] = row[ax]
    out_idx = [row[k] for k in keep] + [col[k] for k in keep]
    reduced = np.einsum(m, row + col, out_idx)
    d_keep = int(np.prod([dims[k] for k in keep]))
    return reduced.reshape(d_keep, d_keep)


def partial_trace(rho: DensityOperator, keep: Iterable[int]) -> DensityOperator:
    keep = sorted(set(int(k) for k in keep))
    reduced = partial_trace_matrix(rho.matrix, rho.space.dims, keep)
    return DensityOperator.from_matrix(reduced, tuple(rho.space.dims[k] for k in keep))


def projector_family(obs: Observable, grouping_tol: float | None = None) -> ProjectorFamily:
    """One projector per eigenvalue cluster; clusters merge eigenvalues closer
    than ``grouping_tol`` (default ``1e-8 * max|eigenvalue|``)."""
    w, v = obs.eigenvalues, obs.eigenvectors
    if grouping_tol is None:
        grouping_tol = 1e-8 * max(obs.norm(), 1.0)
    labels: list[float] = []
    projectors: list[np.ndarray] = []
    start = 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[i - 1] > grouping_tol:
            block = v[:, start:i]
            labels.append(float(np.mean(w[start:i])))
            projectors.append(block @ block.conj().T)
            start = i
    return ProjectorFamily(labels=tuple(labels), projectors=tuple(projectors), complete=True)


def interval_projector(obs: Observable, lo: float, hi: float) -> np.ndarray:
    """Projector onto the span of eigenvectors with eigenvalue in [lo, hi].

    An empty interval yields the zero matrix.
    """
    if lo > hi:
        raise ValueError(f"interval bounds out of order: [{lo}, {hi}]")
    mask = (obs.eigenvalues >= lo) & (obs.eigenvalues <= hi)
    if not mask.any():
        return np.zeros((obs.dim, obs.dim), dtype=complex)
    block = obs.eigenvectors[:, mask]
    return block @ block.conj().T


def evolution_operator(h: Observable, t: float) -> np.ndarray:
    """exp(-i H t) through the cached spectral decomposition (hbar = 1)."""
    phases = np.exp(-1j * h.eigenvalues * t)
    return (h.eigenvectors * phases) @ h.eigenvectors.conj().T


def unitary_evolve(op, h: Observable, t: float, picture: str | None = None):
    """Evolve an operator or state for Newtonian time ``t`` under ``h``.

    Heisenberg: A(t) = e^{iHt} A e^{-iHt}.  Schroedinger: rho(t) = e^{-iHt} rho e^{iHt}.
    Defaults to Schroedinger for density operators and Heisenberg otherwise.
    """
    if picture is None:
        picture = "schrodinger" if isinstance(op, DensityOperator) else "heisenberg"
    if picture not in ("heisenberg", "schrodinger"):
        raise ValueError(f"unknown picture {picture!r}")
    u = evolution_operator(h, t)
    if isinstance(op, DensityOperator):
        if op.dim != h.dim:
            raise ValidationError(f"dimension mismatch: state {op.dim} vs hamiltonian {h.dim}")
        m = op.matrix
        out = u @ m @ u.conj().T if picture == "schrodinger" else u.conj().T @ m @ u
        return DensityOperator(matrix=out, space=op.space)
    if isinstance(op, Observable):
        if op.dim != h.dim:
            raise ValidationError(f"dimension mismatch: observable {op.dim} vs hamiltonian {h.dim}")
        m = op.matrix
        out = u.conj().T @ m @ u if picture == "heisenberg" else u @ m @ u.conj().T
        return Observable(matrix=out, space=op.space)
    m = np.asarray(op, dtype=complex)
    _check_square(m, h.dim)
    return u.conj().T @ m @ u if picture == "heisenberg" else u @ m @ u.conj().T


# -- JSON wire format ---------------------------------------------------------
#
# {"dims": [...], "re": [[...]], "im": [[...]]}, row major, full doubles.

def operator_to_json(matrix: np.ndarray, dims: Sequence[int]) -> str:
    m = np.asarray(matrix, dtype=complex)
    payload = {
        "dims": [int(d) for d in dims],
        "re": m.real.tolist(),
        "im": m.imag.tolist(),
    }
    return json.dumps(payload)


def operator_from_json(text: str | dict) -> tuple[np.ndarray, tuple[int, ...]]:
    payload = json.loads(text) if isinstance(text, str) else text
    dims = tuple(int(d) for d in payload["dims"])
    re = np.asarray(payload["re"], dtype=float)
    im = np.asarray(payload["im"], dtype=float)
    if re.shape != im.shape:
        raise ValidationError("re and im blocks have different shapes")
    d = int(np.prod(dims))
    if re.shape != (d, d):
        raise ValidationError(f"matrix shape {re.shape} does not match dims product {d}")
    return re + 1j * im, dims
