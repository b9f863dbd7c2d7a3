"""Dense linear algebra on qubit operators.

Operators are plain square ``numpy`` arrays of dimension ``2**q``. Wire 0 is
the most significant tensor factor everywhere in the package, so
``tensor(a, b)`` puts ``a`` on the low-numbered wires.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence

import numpy as np

from .config import check_capacity
from .errors import ArgumentError, NotPSDError, ValidationError

PSD_TOL = 1e-9

NORM_KINDS = ("spectral", "schatten2_normalized", "frobenius", "trace")


def num_qubits(a: np.ndarray) -> int:
    """Return ``q`` for a ``2**q x 2**q`` operator, raising on anything else."""
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"operator must be square, got shape {a.shape}")
    dim = a.shape[0]
    q = dim.bit_length() - 1
    if dim < 1 or 1 << q != dim:
        raise ValidationError(f"dimension {dim} is not a power of two")
    return q


def as_operator(a, *, check_finite: bool = True) -> np.ndarray:
    arr = np.asarray(a, dtype=complex)
    num_qubits(arr)
    if check_finite and not np.all(np.isfinite(arr)):
        raise ValidationError("operator has non-finite entries")
    return arr


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    check_capacity(num_qubits(a) + num_qubits(b))
    return np.kron(a, b)


def tensor_all(ops: Iterable[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = tensor(out, op)
    return out


def _check_wires(wires: Iterable[int], q: int) -> list[int]:
    wires = list(wires)
    for w in wires:
        if not 0 <= w < q:
            raise ArgumentError(f"wire {w} out of range for {q} qubits")
    if len(set(wires)) != len(wires):
        raise ArgumentError(f"repeated wire in {wires}")
    return wires


def partial_trace(a: np.ndarray, traced_wires: Iterable[int]) -> np.ndarray:
    """Trace out ``traced_wires``; the remaining wires keep their relative order."""
    q = num_qubits(a)
    traced = set(_check_wires(traced_wires, q))
    if not traced:
        return a.copy()
    keep = [w for w in range(q) if w not in traced]
    t = a.reshape([2] * (2 * q))
    # move kept row/col axes to the front, traced row/col axes to the back
    order = keep + [q + w for w in keep] + sorted(traced) + [q + w for w in sorted(traced)]
    t = t.transpose(order)
    k = len(keep)
    dk = 1 << k
    dt = 1 << len(traced)
    t = t.reshape(dk, dk, dt, dt)
    return np.trace(t, axis1=2, axis2=3)


def permute_wires(a: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Reorder wires so that new wire ``j`` is old wire ``order[j]``."""
    q = num_qubits(a)
    order = _check_wires(order, q)
    if len(order) != q:
        raise ArgumentError("permutation must list every wire once")
    t = a.reshape([2] * (2 * q)).transpose(list(order) + [q + w for w in order])
    return t.reshape(a.shape)


def apply_on_wires(op: np.ndarray, wires: Sequence[int], mat: np.ndarray, side: str = "left") -> np.ndarray:
    """Multiply ``mat`` by ``op`` acting on ``wires`` without building the full embedding.

    ``side="left"`` gives ``(op on wires) @ mat``, ``"right"`` gives ``mat @ (op on wires)``.
    """
    q = num_qubits(mat)
    k = num_qubits(op)
    wires = _check_wires(wires, q)
    if len(wires) != k:
        raise ArgumentError(f"operator on {k} qubits applied to {len(wires)} wires")
    if side == "right":
        return apply_on_wires(op.T, wires, mat.T, "left").T
    t = mat.reshape([2] * q + [-1])
    rest = [w for w in range(q) if w not in wires]
    t = t.transpose(wires + rest + [q])
    t = (op @ t.reshape(1 << k, -1)).reshape([2] * q + [-1])
    inv = np.argsort(wires + rest + [q])
    return t.transpose(list(inv)).reshape(mat.shape)


def embed(op: np.ndarray, wires: Sequence[int], total_qubits: int) -> np.ndarray:
    """Full ``2**total`` matrix of ``op`` acting on ``wires``, identity elsewhere."""
    check_capacity(total_qubits)
    return apply_on_wires(op, wires, np.eye(1 << total_qubits, dtype=complex))


def norm(a: np.ndarray, kind: str = "spectral") -> float:
    q = num_qubits(a)
    if kind == "spectral":
        if not a.size:
            return 0.0
        return float(np.linalg.svd(a, compute_uv=False)[0])
    if kind == "frobenius":
        return float(np.linalg.norm(a))
    if kind == "schatten2_normalized":
        return float(np.linalg.norm(a) / np.sqrt(1 << q))
    if kind == "trace":
        return float(np.linalg.svd(a, compute_uv=False).sum())
    raise ArgumentError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")


def spectral_norm(a: np.ndarray) -> float:
    return norm(a, "spectral")


def hs_norm(a: np.ndarray) -> float:
    """Normalized Schatten-2 norm, the ``||.||_2`` used throughout learning."""
    return norm(a, "schatten2_normalized")


def is_unitary(u: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() <= tol)


def psd_sqrt(a: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Principal square root of a Hermitian PSD operator.

    Eigenvalues in ``[-tol, 0)`` are treated as round-off and clamped to zero;
    anything more negative is rejected.
    """
    num_qubits(a)
    herm = 0.5 * (a + a.conj().T)
    if np.abs(herm - a).max() > tol:
        raise NotPSDError("operator is not Hermitian")
    vals, vecs = np.linalg.eigh(herm)
    if vals.size and vals.min() < -tol:
        raise NotPSDError(f"eigenvalue {vals.min():.3e} below -{tol:g}")
    vals = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * vals) @ vecs.conj().T


def check_density(rho: np.ndarray, tol: float = PSD_TOL) -> int:
    """Validate a density operator and return its qubit count."""
    q = num_qubits(rho)
    if np.abs(rho - rho.conj().T).max() > tol:
        raise ValidationError("density operator is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValidationError(f"density operator has trace {np.trace(rho).real:.6g}")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
        raise ValidationError("density operator is not PSD")
    return q
