"""Measurement protocols: static MUB/FMUB/Pauli builders and the adaptive
AMUB/FO/FOMUB handlers.

A protocol is consumed by the experiment engine through a single handler
interface: ``handler.next(measured, records)`` returns the next
MeasurementSpec (or None when the protocol is exhausted). Handlers never see
the true state; adaptive ones work from the accumulated measurement records
via the estimator they were given.
"""

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .mub import SUPPORTED_MUB_DIMS, mub_bases
from .qcore import (
    POVM_SUM_TOL,
    PSD_EIG_FLOOR,
    DensityMatrix,
    PureState,
    eig_hermitian,
    haar_vector,
)

ADAPTIVE_MIN_STEP = 100   # shots per adaptive step: max(100, floor(N_t / 30))
ADAPTIVE_STEP_DIV = 30


class IncompleteRecordsError(ValueError):
    """Measurement records do not determine a state (design rank below d^2)."""


_PAULI = {
    0: np.eye(2, dtype=complex),
    1: np.array([[0, 1], [1, 0]], dtype=complex),
    2: np.array([[0, -1j], [1j, 0]], dtype=complex),
    3: np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(eq=False)
class Povm:
    """A positive-operator-valued measure: PSD elements summing to identity."""

    elements: np.ndarray  # shape (n_outcomes, d, d)

    def __post_init__(self):
        self.elements = np.asarray(self.elements, dtype=complex)
        if self.elements.ndim != 3 or self.elements.shape[1] != self.elements.shape[2]:
            raise ValueError("POVM elements must be a stack of square matrices")
        total = self.elements.sum(axis=0)
        d = total.shape[0]
        if np.max(np.abs(total - np.eye(d))) > POVM_SUM_TOL:
            raise ValueError("POVM elements do not sum to the identity")
        for p in self.elements:
            if np.linalg.eigvalsh((p + p.conj().T) / 2)[0] < PSD_EIG_FLOOR:
                raise ValueError("POVM element is not positive semidefinite")

    @property
    def d(self) -> int:
        return self.elements.shape[1]

    @property
    def n_outcomes(self) -> int:
        return self.elements.shape[0]


@dataclass(eq=False)
class MeasurementSpec:
    """One measurement setting: a POVM plus the number of state copies to use.

    Observable- and operator-type measurements are encoded through their
    induced POVMs; the original operator is retained in ``observable`` and the
    per-outcome eigenvalues in ``outcome_values``. ``basis``/``basis_factors``
    carry the measured basis (and its per-subsystem factors, when the setting
    is factorized) for bookkeeping and tests.
    """

    povm: Povm
    shots: int = 1
    kind: str = "povm"  # povm | observable | operator
    dims: tuple[int, ...] | None = None
    basis: np.ndarray | None = None
    basis_factors: tuple[np.ndarray, ...] | None = None
    observable: np.ndarray | None = None
    outcome_values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("povm", "observable", "operator"):
            raise ValueError(f"unknown measurement kind {self.kind!r}")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")


def basis_povm(u: np.ndarray) -> Povm:
    """POVM of rank-1 projectors onto the columns of a unitary."""
    return Povm(np.einsum("ik,jk->kij", u, u.conj()))


def allocate_shots(n: int, m: int) -> list[int]:
    """Split n shots over m settings as evenly as possible (earlier settings
    absorb the remainder)."""
    if m < 1:
        raise ValueError("need at least one setting")
    if n < m:
        raise ValueError(f"cannot allocate {n} shots over {m} settings")
    base, rem = divmod(n, m)
    return [base + 1] * rem + [base] * (m - rem)


# --- static protocols --------------------------------------------------------

def mub_protocol(dims) -> list[MeasurementSpec]:
    """Measurements in all d+1 mutually unbiased bases of the full space."""
    dims = tuple(int(x) for x in dims)
    d = int(np.prod(dims))
    specs = []
    for u in mub_bases(d):
        factors = (u,) if len(dims) == 1 else None
        specs.append(MeasurementSpec(basis_povm(u), dims=dims, basis=u,
                                     basis_factors=factors))
    return specs


def fmub_protocol(dims) -> list[MeasurementSpec]:
    """Factorized MUB measurements: every subsystem measured independently in
    its own MUBs, prod_j (d_j + 1) settings in total."""
    dims = tuple(int(x) for x in dims)
    for dj in dims:
        if dj not in SUPPORTED_MUB_DIMS:
            raise ValueError(
                f"subsystem dimension {dj} outside the MUB-supported set "
                f"{SUPPORTED_MUB_DIMS}")
    local = [mub_bases(dj) for dj in dims]
    specs = []
    for combo in itertools.product(*local):
        u = combo[0]
        for f in combo[1:]:
            u = np.kron(u, f)
        specs.append(MeasurementSpec(basis_povm(u), dims=dims, basis=u,
                                     basis_factors=tuple(combo)))
    return specs


def pauli_protocol(n: int) -> list[MeasurementSpec]:
    """All 4^n - 1 nontrivial Pauli-word observables on n qubits, each encoded
    as its two-outcome eigenprojector POVM (eigenvalues +1 and -1)."""
    if n < 1:
        raise ValueError("need at least one qubit")
    dims = (2,) * n
    d = 2**n
    eye = np.eye(d, dtype=complex)
    specs = []
    for word in itertools.product(range(4), repeat=n):
        if all(w == 0 for w in word):
            continue  # the identity word carries no information
        op = np.eye(1, dtype=complex)
        for w in word:
            op = np.kron(op, _PAULI[w])
        povm = Povm(np.stack([(eye + op) / 2, (eye - op) / 2]))
        specs.append(MeasurementSpec(povm, kind="observable", dims=dims,
                                     observable=op,
                                     outcome_values=np.array([1.0, -1.0])))
    return specs


class StaticHandler:
    """Serves a fixed list of pre-allocated measurement settings."""

    def __init__(self, specs: list[MeasurementSpec]):
        self._specs = list(specs)
        self._idx = 0

    def next(self, measured: int, records) -> MeasurementSpec | None:
        if self._idx >= len(self._specs):
            return None
        spec = self._specs[self._idx]
        self._idx += 1
        return spec


def static_handler(specs: list[MeasurementSpec], n_total: int) -> StaticHandler:
    """Spread a run's sample budget evenly over a static protocol's settings."""
    shots = allocate_shots(n_total, len(specs))
    return StaticHandler([replace(s, shots=k) for s, k in zip(specs, shots)])


# --- adaptive protocols ------------------------------------------------------

def _adaptive_step_total(measured: int, budget: int | None) -> int:
    step = max(ADAPTIVE_MIN_STEP, measured // ADAPTIVE_STEP_DIV)
    if budget is not None:
        step = min(step, budget - measured)
    return step


class _QueuedAdaptiveHandler:
    """Common machinery: refill a queue of specs once per adaptive step."""

    def __init__(self, dims, estimator, budget):
        self.dims = tuple(int(x) for x in dims)
        self.d = int(np.prod(self.dims))
        self.estimator = estimator
        self.budget = budget
        self._queue: list[MeasurementSpec] = []

    def next(self, measured: int, records) -> MeasurementSpec | None:
        if not self._queue:
            step = _adaptive_step_total(measured, self.budget)
            if step < 1:
                return None
            self._queue = self._build_step(step, records)
        return self._queue.pop(0)

    def _estimate(self, records) -> np.ndarray | None:
        # early adaptive steps may not determine a state yet; fall back to
        # the data-free branch until they do (other estimator failures
        # propagate to the caller)
        if not records:
            return None
        try:
            return self.estimator(records).estimate.mat
        except IncompleteRecordsError:
            return None

    def _build_step(self, step: int, records) -> list[MeasurementSpec]:
        raise NotImplementedError


class AmubHandler(_QueuedAdaptiveHandler):
    """Adaptive MUB: rotate the canonical MUBs so that the first basis
    diagonalizes the current state estimate."""

    def __init__(self, dims, estimator, budget=None):
        super().__init__(dims, estimator, budget)
        if self.d not in SUPPORTED_MUB_DIMS:
            raise ValueError(
                f"total dimension {self.d} outside the MUB-supported set "
                f"{SUPPORTED_MUB_DIMS}")
        self._canonical = mub_bases(self.d)

    def _build_step(self, step, records):
        est = self._estimate(records)
        if est is None:
            rotated = self._canonical
        else:
            _, v = eig_hermitian(est)
            rotated = [v @ b for b in self._canonical]
        n_bases = min(len(rotated), step)
        shots = allocate_shots(step, n_bases)
        return [MeasurementSpec(basis_povm(u), shots=k, dims=self.dims, basis=u)
                for u, k in zip(rotated[:n_bases], shots)]


def amub_handler(dims, estimator, budget: int | None = None) -> AmubHandler:
    return AmubHandler(dims, estimator, budget)


def _env_vector(tensor: np.ndarray, phis: list[np.ndarray], j: int) -> np.ndarray:
    """Contract every subsystem axis except j with the conjugated local vectors."""
    out = tensor
    removed = 0
    for i in range(len(phis)):
        if i == j:
            continue
        out = np.tensordot(phis[i].conj(), out, axes=([0], [i - removed]))
        removed += 1
    return out


def _product_vector_factors(targets: np.ndarray, dims, rng,
                            restarts: int = 5, sweeps: int = 100,
                            tol: float = 1e-9):
    """Alternating minimization of sum_k |<phi_1 x ... x phi_n | t_k>|^2.

    Each local update is an exact smallest-eigenvector computation, so the
    objective is monotonically non-increasing within a sweep cycle.
    Returns (factors, residual).
    """
    dims = tuple(int(x) for x in dims)
    n = len(dims)
    tensors = [targets[:, k].reshape(dims) for k in range(targets.shape[1])]
    best_factors, best_obj = None, np.inf
    for _ in range(restarts):
        phis = [haar_vector(dj, rng).vec for dj in dims]
        prev = np.inf
        for _ in range(sweeps):
            for j in range(n):
                a = np.zeros((dims[j], dims[j]), dtype=complex)
                for t in tensors:
                    env = _env_vector(t, phis, j)
                    a += np.outer(env, env.conj())
                _, vecs = np.linalg.eigh(a)
                phis[j] = vecs[:, 0]
            obj = sum(abs(np.vdot(phis[0], _env_vector(t, phis, 0))) ** 2
                      for t in tensors)
            if prev - obj < tol:
                break
            prev = obj
        if obj < best_obj:
            best_obj = obj
            best_factors = [p.copy() for p in phis]
        if best_obj < 1e-14:
            break
    return best_factors, float(best_obj)


def orthogonal_product_vector(rho_est: DensityMatrix, k: int,
                              rng: np.random.Generator) -> PureState:
    """Product state minimizing overlap with the top-k eigenvectors of an
    estimate; an exact orthogonal solution exists whenever k <= sum(d_j) - n."""
    dims = rho_est.dims
    k_max = sum(dims) - len(dims)
    if not 1 <= k <= k_max:
        raise ValueError(f"k must lie in 1..{k_max} for dims {dims}")
    _, v = eig_hermitian(rho_est.mat)
    factors, _ = _product_vector_factors(v[:, :k], dims, rng)
    out = np.eye(1, dtype=complex).ravel()
    for p in factors:
        out = np.kron(out, p)
    return PureState(dims, out)


def complete_local_basis(phi: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Unitary whose first column is phi, the rest completed by Gram-Schmidt
    over Haar-random vectors."""
    d = phi.shape[0]
    cols = [phi / np.linalg.norm(phi)]
    while len(cols) < d:
        cand = haar_vector(d, rng).vec
        for c in cols:
            cand = cand - c * np.vdot(c, cand)
        nrm = np.linalg.norm(cand)
        if nrm > 1e-8:
            cols.append(cand / nrm)
    return np.column_stack(cols)


class FoHandler(_QueuedAdaptiveHandler):
    """Factorized-orthogonal protocol: each step measures one random product
    basis containing a vector orthogonal to K principal components of the
    current estimate (K drawn uniformly from 1..K_max)."""

    def __init__(self, dims, estimator, rng, budget=None):
        super().__init__(dims, estimator, budget)
        if len(self.dims) < 2:
            raise ValueError("factorized-orthogonal protocols need at least "
                             "two subsystems")
        self.rng = rng
        self.k_max = sum(self.dims) - len(self.dims)

    def _orthogonal_factors(self, records) -> list[np.ndarray]:
        est = self._estimate(records)
        if est is None:
            # nothing measured yet: any random product direction will do
            return [haar_vector(dj, self.rng).vec for dj in self.dims]
        k = int(self.rng.integers(1, self.k_max + 1))
        _, v = eig_hermitian(est)
        factors, _ = _product_vector_factors(v[:, :k], self.dims, self.rng)
        return factors

    def _build_step(self, step, records):
        factors = self._orthogonal_factors(records)
        locals_ = tuple(complete_local_basis(p, self.rng) for p in factors)
        u = np.eye(1, dtype=complex)
        for loc in locals_:
            u = np.kron(u, loc)
        return [MeasurementSpec(basis_povm(u), shots=step, dims=self.dims,
                                basis=u, basis_factors=locals_)]


def fo_handler(dims, estimator, rng, budget: int | None = None) -> FoHandler:
    return FoHandler(dims, estimator, rng, budget)


class FomubHandler(FoHandler):
    """FO + FMUB: per step, rotate each subsystem's MUBs so one basis vector
    matches the FO product vector, then measure the whole rotated FMUB."""

    def __init__(self, dims, estimator, rng, budget=None):
        super().__init__(dims, estimator, rng, budget)
        for dj in self.dims:
            if dj not in SUPPORTED_MUB_DIMS:
                raise ValueError(
                    f"subsystem dimension {dj} outside the MUB-supported set "
                    f"{SUPPORTED_MUB_DIMS}")
        self._local_mubs = [mub_bases(dj) for dj in self.dims]

    def _build_step(self, step, records):
        factors = self._orthogonal_factors(records)
        rotations = [complete_local_basis(p, self.rng) for p in factors]
        rotated = [[r @ b for b in bases]
                   for r, bases in zip(rotations, self._local_mubs)]
        combos = list(itertools.product(*rotated))
        n_bases = min(len(combos), step)
        shots = allocate_shots(step, n_bases)
        specs = []
        for combo, k in zip(combos[:n_bases], shots):
            u = combo[0]
            for f in combo[1:]:
                u = np.kron(u, f)
            specs.append(MeasurementSpec(basis_povm(u), shots=k, dims=self.dims,
                                         basis=u, basis_factors=tuple(combo)))
        return specs


def fomub_handler(dims, estimator, rng, budget: int | None = None) -> FomubHandler:
    return FomubHandler(dims, estimator, rng, budget)
