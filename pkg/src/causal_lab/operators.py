"""Dense complex-operator algebra on small tensor-product spaces.

Operators are plain ``numpy`` arrays of shape ``(d, d)``.  Subsystem layouts
are described by a sequence of local dimensions, e.g. ``(2, 2, 2, 2)`` for
the ``I1, O1, I2, O2`` ordering used throughout the package.
"""
from __future__ import annotations

from functools import reduce
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class DimensionError(ValueError):
    """Raised when an operator does not match the subsystem layout."""


def as_operator(op) -> np.ndarray:
    """Return ``op`` as a square complex array, validating shape and finiteness."""
    arr = np.asarray(op, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"operator must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("operator has non-finite entries")
    return arr


def dagger(op: np.ndarray) -> np.ndarray:
    return np.conj(np.transpose(op))


def kron(*ops) -> np.ndarray:
    """Tensor product of operators, left to right."""
    if not ops:
        raise ValueError("kron needs at least one operator")
    return reduce(np.kron, [np.asarray(o, dtype=complex) for o in ops])


def _check_dims(op: np.ndarray, dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise DimensionError(f"subsystem dimensions must be positive: {dims}")
    if int(np.prod(dims)) != op.shape[0] or op.shape[0] != op.shape[1]:
        raise DimensionError(
            f"operator of shape {op.shape} does not match subsystem dims {dims}"
        )
    return dims


def partial_trace(op, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    Kept subsystems appear in ascending index order in the result.  An empty
    ``keep`` returns the full trace as a ``1 x 1`` operator.
    """
    op = np.asarray(op, dtype=complex)
    dims = _check_dims(op, dims)
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {n} subsystems")
    tensor = op.reshape(dims + dims)
    # einsum subscripts: row index i_s, column index i_s for traced subsystems
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * n > len(letters):
        raise DimensionError("too many subsystems")
    rows = list(letters[:n])
    cols = list(letters[n : 2 * n])
    for s in range(n):
        if s not in keep:
            cols[s] = rows[s]
    out = "".join(rows[s] for s in keep) + "".join(cols[s] for s in keep)
    reduced = np.einsum("".join(rows) + "".join(cols) + "->" + out, tensor)
    dk = int(np.prod([dims[s] for s in keep])) if keep else 1
    return reduced.reshape(dk, dk)


def reorder_subsystems(op, dims: Sequence[int], permutation: Sequence[int]) -> np.ndarray:
    """Relabel tensor factors: subsystem ``i`` of the result is ``permutation[i]`` of ``op``.

    For a product ``A0 ⊗ A1 ⊗ ...`` the result is ``A_{p[0]} ⊗ A_{p[1]} ⊗ ...``.
    """
    op = np.asarray(op, dtype=complex)
    dims = _check_dims(op, dims)
    perm = [int(p) for p in permutation]
    if sorted(perm) != list(range(len(dims))):
        raise DimensionError(f"{permutation} is not a permutation of {len(dims)} subsystems")
    n = len(dims)
    tensor = op.reshape(dims + dims)
    tensor = np.transpose(tensor, perm + [n + p for p in perm])
    d = op.shape[0]
    return tensor.reshape(d, d)


def inverse_permutation(permutation: Sequence[int]) -> list[int]:
    inv = [0] * len(permutation)
    for i, p in enumerate(permutation):
        inv[p] = i
    return inv


def partial_transpose(op, dims: Sequence[int], subsystems: Iterable[int]) -> np.ndarray:
    """Transpose the listed tensor factors in place."""
    op = np.asarray(op, dtype=complex)
    dims = _check_dims(op, dims)
    n = len(dims)
    axes = list(range(2 * n))
    for s in subsystems:
        axes[s], axes[n + s] = axes[n + s], axes[s]
    tensor = np.transpose(op.reshape(dims + dims), axes)
    return tensor.reshape(op.shape)


def embed_mixed(op, dims: Sequence[int], subsystems: Iterable[int]) -> np.ndarray:
    """Replace the listed factors by their maximally mixed state.

    Returns ``Tr_S(op) ⊗ I_S / d_S`` with factors put back at their original
    positions.  This is the map appearing in the no-signalling constraints.
    """
    op = np.asarray(op, dtype=complex)
    dims = _check_dims(op, dims)
    sub = sorted(set(int(s) for s in subsystems))
    rest = [s for s in range(len(dims)) if s not in sub]
    reduced = partial_trace(op, dims, rest)
    d_sub = int(np.prod([dims[s] for s in sub])) if sub else 1
    joined = np.kron(reduced, np.eye(d_sub) / d_sub)
    order = rest + sub
    joined_dims = [dims[s] for s in order]
    return reorder_subsystems(joined, joined_dims, inverse_permutation(order))


def is_hermitian(op, tol: float = HERMITIAN_TOL) -> bool:
    op = np.asarray(op)
    return bool(np.max(np.abs(op - dagger(op)), initial=0.0) <= tol)


def is_density(op, tol: float = PSD_TOL) -> bool:
    op = np.asarray(op, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1] or not is_hermitian(op, 1e-10):
        return False
    evals = np.linalg.eigvalsh((op + dagger(op)) / 2)
    return bool(evals.min() >= -tol and abs(np.trace(op).real - 1.0) <= tol)


def is_effect(op, tol: float = PSD_TOL) -> bool:
    op = np.asarray(op, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1] or not is_hermitian(op, 1e-10):
        return False
    evals = np.linalg.eigvalsh((op + dagger(op)) / 2)
    return bool(evals.min() >= -tol and evals.max() <= 1 + tol)


def check_density(op, name: str = "state") -> np.ndarray:
    arr = as_operator(op)
    if not is_density(arr):
        raise ValueError(f"{name} is not a density matrix (PSD, unit trace)")
    return arr


def check_effect(op, name: str = "effect") -> np.ndarray:
    arr = as_operator(op)
    if not is_effect(arr):
        raise ValueError(f"{name} is not an effect (0 <= M <= I)")
    return arr


def ket(*amplitudes) -> np.ndarray:
    v = np.asarray(amplitudes, dtype=complex)
    return v / np.linalg.norm(v)


def projector(vector) -> np.ndarray:
    v = np.asarray(vector, dtype=complex).reshape(-1)
    return np.outer(v, np.conj(v))


def basis_projector(index: int, d: int = 2) -> np.ndarray:
    out = np.zeros((d, d), dtype=complex)
    out[index, index] = 1.0
    return out


def bell_state() -> np.ndarray:
    """|Φ+⟩⟨Φ+| with |Φ+⟩ = (|00⟩ + |11⟩)/√2."""
    return projector(ket(1, 0, 0, 1))


def bloch_vector(theta_deg: float, phi_deg: float) -> np.ndarray:
    """Unit Bloch vector ``(sinθ cosφ, sinθ sinφ, cosθ)`` for angles in degrees."""
    theta = np.deg2rad(float(theta_deg) % 360.0)
    phi = np.deg2rad(float(phi_deg) % 360.0)
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def bloch_operator(vector) -> np.ndarray:
    """``(I + n·σ) / 2`` for a real 3-vector ``n``."""
    nx, ny, nz = (float(c) for c in vector)
    return 0.5 * (PAULI_I + nx * PAULI_X + ny * PAULI_Y + nz * PAULI_Z)


def bloch_pure_state(theta_deg: float, phi_deg: float) -> np.ndarray:
    """Qubit projector whose Bloch vector points along ``(θ, φ)`` (degrees)."""
    return bloch_operator(bloch_vector(theta_deg, phi_deg))


def hermitian_basis(d: int) -> list[np.ndarray]:
    """Orthonormal Hermitian basis of ``B(C^d)``: ``I/√d`` followed by normalized
    generalized Gell-Mann matrices (symmetric, antisymmetric, diagonal).

    ``Tr(E_a E_b) = δ_ab`` for the returned operators.
    """
    d = int(d)
    if d < 1:
        raise ValueError("dimension must be positive")
    basis = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for j in range(d):
        for k in range(j + 1, d):
            sym = np.zeros((d, d), dtype=complex)
            sym[j, k] = sym[k, j] = 1 / np.sqrt(2)
            anti = np.zeros((d, d), dtype=complex)
            anti[j, k] = -1j / np.sqrt(2)
            anti[k, j] = 1j / np.sqrt(2)
            basis.extend([sym, anti])
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        basis.append(np.diag(diag / np.sqrt(l * (l + 1))).astype(complex))
    return basis


def hs_gram(ops: Sequence[np.ndarray]) -> np.ndarray:
    """Real Gram matrix ``Re Tr(A_i† A_j)`` of a family of Hermitian operators."""
    flat = np.array([np.asarray(o, dtype=complex).reshape(-1) for o in ops])
    return np.real(np.conj(flat) @ flat.T)


def operator_rank(ops: Sequence[np.ndarray], tol: float = 1e-8) -> int:
    """Dimension of the real span of Hermitian operators."""
    if len(ops) == 0:
        return 0
    flat = np.array([np.asarray(o, dtype=complex).reshape(-1) for o in ops])
    real = np.concatenate([flat.real, flat.imag], axis=1)
    return int(np.linalg.matrix_rank(real, tol=tol))


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def seed_sequence(seed) -> np.random.SeedSequence:
    """Normalize an int / ``SeedSequence`` / ``Generator`` / ``None`` seed."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(2**63)))
    return np.random.SeedSequence(None if seed is None else int(seed))


def haar_unitary(d: int, seed=None) -> np.ndarray:
    """Haar-random ``d x d`` unitary from the QR decomposition of a Ginibre matrix."""
    rng = _rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_effect(d: int, seed=None) -> np.ndarray:
    """``U diag(λ) U†`` with Haar ``U`` and i.i.d. uniform ``λ_i`` on [0, 1]."""
    if d < 2:
        raise ValueError("effects are sampled on d >= 2")
    rng = _rng(seed)
    u = haar_unitary(d, rng)
    lam = rng.uniform(0.0, 1.0, size=d)
    eff = (u * lam) @ dagger(u)
    return (eff + dagger(eff)) / 2


def random_density(d: int, seed=None) -> np.ndarray:
    """Density matrix from the Hilbert-Schmidt (Ginibre) ensemble."""
    if d < 1:
        raise ValueError("dimension must be positive")
    rng = _rng(seed)
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ dagger(g)
    rho = (rho + dagger(rho)) / 2
    return rho / np.trace(rho).real


def random_pure_state(d: int, seed=None) -> np.ndarray:
    rng = _rng(seed)
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return projector(v / np.linalg.norm(v))


def schmidt_coefficients(vector, dims: tuple[int, int]) -> np.ndarray:
    """Schmidt coefficients (singular values, descending) of a bipartite pure vector."""
    v = np.asarray(vector, dtype=complex).reshape(dims)
    return np.linalg.svd(v, compute_uv=False)


def random_entangled_pure_state(
    dims: tuple[int, int] = (2, 2), seed=None, min_schmidt: float = 0.1
) -> np.ndarray:
    """Random pure bipartite state whose smallest Schmidt coefficient is ≥ ``min_schmidt``.

    Rejection sampling on the uniform (Haar) pure-state ensemble.
    """
    rng = _rng(seed)
    d = dims[0] * dims[1]
    for _ in range(10_000):
        v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        v /= np.linalg.norm(v)
        if schmidt_coefficients(v, dims)[min(dims) - 1] >= min_schmidt:
            return projector(v)
    raise RuntimeError("could not sample an entangled state with the requested Schmidt bound")


def frobenius(op) -> float:
    return float(np.linalg.norm(np.asarray(op)))
