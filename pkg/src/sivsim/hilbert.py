"""Operator algebra on small composite Hilbert spaces.

Dense complex matrices throughout: total dimensions in this package stay
below ~100 (three-level emitter x small Fock space, or two three-level
emitters), so sparse storage would only add overhead.

Basis ordering is row-major: for subsystem dimensions ``(d0, d1, ...)``
the composite index is ``i0*d1*d2*... + i1*d2*... + ...``, i.e. the
leftmost factor is the most significant. ``numpy.kron`` follows the same
convention, which is relied on everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "HilbertSpace",
    "Operator",
    "DensityState",
    "tensor",
    "embed",
    "partial_trace",
    "expectation",
    "basis_state",
    "ket_projector",
    "transition",
    "identity",
    "destroy",
]

# Tolerances for DensityState validation.
TRACE_TOL = 1e-9
HERMITICITY_TOL = 1e-10
POSITIVITY_TOL = 1e-8


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HilbertSpace:
    """Composite Hilbert space with a fixed subsystem ordering."""

    dims: tuple[int, ...]

    def __init__(self, dims: Iterable[int]):
        dims = tuple(int(d) for d in dims)
        if not dims or any(d < 2 for d in dims):
            raise ValueError(f"subsystem dimensions must all be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total_dim(self) -> int:
        return prod(self.dims)

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    def __repr__(self) -> str:
        return f"HilbertSpace(dims={self.dims})"


@dataclass(frozen=True)
class Operator:
    """A linear operator on a :class:`HilbertSpace`.

    The matrix is stored read-only; all arithmetic returns new operators,
    so instances are safe to share across threads.
    """

    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = _readonly(self.matrix)
        d = self.space.total_dim
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} does not match space dimension {d}")
        object.__setattr__(self, "matrix", m)

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol)

    def _check_space(self, other: "Operator"):
        if self.space.dims != other.space.dims:
            raise ValueError(
                f"operator spaces differ: {self.space.dims} vs {other.space.dims}"
            )

    def __add__(self, other: "Operator") -> "Operator":
        self._check_space(other)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check_space(other)
        return Operator(self.space, self.matrix - other.matrix)

    def __neg__(self) -> "Operator":
        return Operator(self.space, -self.matrix)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.space, self.matrix * complex(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check_space(other)
        return Operator(self.space, self.matrix @ other.matrix)


@dataclass(frozen=True)
class DensityState:
    """Density matrix on a :class:`HilbertSpace`.

    Validation (trace one, Hermitian, positive semidefinite) runs by
    default; pass ``validate=False`` in hot loops where the caller
    guarantees the invariants.
    """

    space: HilbertSpace
    rho: np.ndarray = field(repr=False)

    def __init__(self, space: HilbertSpace, rho: np.ndarray, validate: bool = True):
        object.__setattr__(self, "space", space)
        rho = _readonly(rho)
        d = space.total_dim
        if rho.shape != (d, d):
            raise ValueError(f"rho shape {rho.shape} does not match space dimension {d}")
        object.__setattr__(self, "rho", rho)
        if validate:
            self.validate()

    def validate(self, trace_tol: float = TRACE_TOL,
                 herm_tol: float = HERMITICITY_TOL,
                 pos_tol: float = POSITIVITY_TOL):
        tr = np.trace(self.rho)
        if abs(tr - 1.0) > trace_tol:
            raise ValueError(f"trace(rho) = {tr}, deviates from 1 by more than {trace_tol}")
        herm_err = np.max(np.abs(self.rho - self.rho.conj().T))
        if herm_err > herm_tol:
            raise ValueError(f"rho is not Hermitian within {herm_tol} (max dev {herm_err:.3e})")
        evals = np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))
        if evals.min() < -pos_tol:
            raise ValueError(f"rho has negative eigenvalue {evals.min():.3e}")

    @classmethod
    def from_ket(cls, space: HilbertSpace, ket: np.ndarray) -> "DensityState":
        ket = np.asarray(ket, dtype=np.complex128).ravel()
        ket = ket / np.linalg.norm(ket)
        return cls(space, np.outer(ket, ket.conj()))

    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))


# ---------------------------------------------------------------------------
# elementary constructors

def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.total_dim, dtype=np.complex128))


def basis_state(space: HilbertSpace, indices: Sequence[int] | int) -> np.ndarray:
    """Composite basis ket |i0, i1, ...> as a flat complex vector."""
    if isinstance(indices, (int, np.integer)):
        indices = (int(indices),)
    indices = tuple(int(i) for i in indices)
    if len(indices) != space.n_subsystems:
        raise ValueError(f"expected {space.n_subsystems} indices, got {len(indices)}")
    flat = 0
    for i, d in zip(indices, space.dims):
        if not 0 <= i < d:
            raise ValueError(f"index {i} out of range for dimension {d}")
        flat = flat * d + i
    ket = np.zeros(space.total_dim, dtype=np.complex128)
    ket[flat] = 1.0
    return ket


def ket_projector(space: HilbertSpace, indices: Sequence[int] | int) -> Operator:
    ket = basis_state(space, indices)
    return Operator(space, np.outer(ket, ket.conj()))


def transition(dim: int, i: int, j: int) -> Operator:
    """Single-subsystem transition operator |i><j| on a dim-level system."""
    m = np.zeros((dim, dim), dtype=np.complex128)
    m[i, j] = 1.0
    return Operator(HilbertSpace((dim,)), m)


def destroy(dim: int) -> Operator:
    """Bosonic annihilation operator truncated to a dim-level Fock space."""
    m = np.diag(np.sqrt(np.arange(1, dim, dtype=np.float64)), k=1).astype(np.complex128)
    return Operator(HilbertSpace((dim,)), m)


# ---------------------------------------------------------------------------
# composition and reduction

def tensor(a: Operator, b: Operator) -> Operator:
    """Kronecker product; the result space concatenates the factor dims."""
    space = HilbertSpace(a.space.dims + b.space.dims)
    return Operator(space, np.kron(a.matrix, b.matrix))


def embed(op: Operator, target_index: int, space: HilbertSpace) -> Operator:
    """Embed a single-subsystem operator into ``space``, identity elsewhere."""
    if not 0 <= target_index < space.n_subsystems:
        raise ValueError(f"target_index {target_index} out of range")
    d_target = space.dims[target_index]
    if op.space.total_dim != d_target:
        raise ValueError(
            f"operator dimension {op.space.total_dim} does not match "
            f"subsystem {target_index} dimension {d_target}"
        )
    m = np.eye(1, dtype=np.complex128)
    for k, d in enumerate(space.dims):
        factor = op.matrix if k == target_index else np.eye(d, dtype=np.complex128)
        m = np.kron(m, factor)
    return Operator(space, m)


def partial_trace(state: DensityState, keep: Iterable[int]) -> DensityState:
    """Trace out all subsystems not in ``keep``.

    Kept factors stay in their original order regardless of the order in
    which ``keep`` lists them.
    """
    keep = sorted(set(int(k) for k in keep))
    dims = state.space.dims
    n = len(dims)
    if not keep:
        raise ValueError("keep set must be nonempty")
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {n} subsystems")
    if len(keep) == n:
        return state

    rho = state.rho.reshape(dims + dims)
    # trace out dropped axes from highest to lowest so indices stay valid
    dropped = [k for k in range(n) if k not in keep]
    n_left = n
    for k in reversed(dropped):
        rho = np.trace(rho, axis1=k, axis2=k + n_left)
        n_left -= 1
    new_dims = tuple(dims[k] for k in keep)
    new_space = HilbertSpace(new_dims)
    d = new_space.total_dim
    return DensityState(new_space, rho.reshape(d, d), validate=False)


def expectation(state: DensityState, op: Operator) -> complex:
    """Tr(rho @ op); real up to 1e-10 when ``op`` is Hermitian."""
    if state.space.dims != op.space.dims:
        raise ValueError(
            f"state and operator spaces differ: {state.space.dims} vs {op.space.dims}"
        )
    return complex(np.trace(state.rho @ op.matrix))
