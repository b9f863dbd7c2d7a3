"""Unitary dilation, operator dilation and the symmetric low-degree CZ approximation."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .config import check_capacity
from .errors import ArgumentError, NormError, ValidationError
from .linalg import num_qubits, spectral_norm
from .minimax import minimax_fit
from .pauli import PauliExpansion, _fwht, _popcount, restrict_away_from, synthesize

NORM_SLACK = 1e-9
LOG2_E = math.log2(math.e)


def _defects(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``((I - A A^dag)^1/2, (I - A^dag A)^1/2)`` from one SVD of ``A``.

    With ``A = W S V^dag`` both roots are diagonal in the singular bases, and
    ``1 - s^2`` is formed as ``(1 - s)(1 + s)``, so contractions of norm one
    keep full precision where an eigen-decomposition of ``I - A A^dag``
    would lose half the digits.
    """
    w, sv, vh = np.linalg.svd(a)
    sv = np.clip(sv, 0.0, 1.0)
    d = np.sqrt((1 - sv) * (1 + sv))
    left = (w * d) @ w.conj().T
    right = (vh.conj().T * d) @ vh
    return left, right


def unitary_dilate(a: np.ndarray) -> np.ndarray:
    """``[[A, (I-AA^dag)^1/2], [-(I-A^dag A)^1/2, A^dag]]`` on one extra qubit.

    The extra qubit is the most significant one, so the ``|0>`` block is ``A``.
    With ``+A^dag`` in the corner the block matrix is unitary for every
    contraction and reduces to ``blockdiag(V, V^dag)`` for unitary ``V``.
    """
    q = num_qubits(a)
    check_capacity(q + 1)
    nrm = spectral_norm(a)
    if nrm > 1 + NORM_SLACK:
        raise NormError(f"dilation needs ||A|| <= 1, got {nrm:.12g}")
    left, right = _defects(a)
    return np.block([[a, left], [-right, a.conj().T]])


def dilation_blocks(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Top row of the dilation: ``(A, (I - A A^dag)^1/2)``."""
    return a, _defects(a)[0]


@dataclass(frozen=True)
class DilationEnsemble:
    sets: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        sets = tuple(tuple(int(w) for w in s) for s in self.sets)
        object.__setattr__(self, "sets", sets)
        seen: set[int] = set()
        for s in sets:
            if len(set(s)) != len(s) or seen & set(s):
                raise ValidationError("ensemble sets must be pairwise disjoint")
            seen |= set(s)

    def __len__(self) -> int:
        return len(self.sets)

    def check_range(self, q: int) -> None:
        for s in self.sets:
            for w in s:
                if not 0 <= w < q:
                    raise ValidationError(f"ensemble wire {w} outside {q} qubits")


def flag_restrictions(p: PauliExpansion, ensemble: DilationEnsemble) -> list[PauliExpansion]:
    """``A_f`` for each flag pattern ``f`` (flag ``i`` is bit ``m-1-i`` of ``f``).

    ``A_f`` keeps the terms that avoid every set whose flag is raised.
    """
    m = len(ensemble)
    out = []
    for f in range(1 << m):
        raised = [w for i, s in enumerate(ensemble.sets) if (f >> (m - 1 - i)) & 1 for w in s]
        out.append(restrict_away_from(p, raised))
    return out


def operator_dilate(p: PauliExpansion, ensemble: DilationEnsemble | Sequence[Sequence[int]]) -> np.ndarray:
    """Attach one flag wire per ensemble set, after the original wires and in ensemble order.

    Each Pauli term ``B_s`` becomes ``B_s (x) L_1 (x) ... (x) L_m`` where ``L_i`` is
    ``|0><0|`` if ``s`` touches set ``i`` and ``I`` otherwise. The result is block
    diagonal in the flag basis with blocks ``A_f``.
    """
    if not isinstance(ensemble, DilationEnsemble):
        ensemble = DilationEnsemble(tuple(tuple(s) for s in ensemble))
    q = p.qubits
    ensemble.check_range(q)
    m = len(ensemble)
    check_capacity(q + m)
    n, nf = 1 << q, 1 << m
    out = np.zeros((n, nf, n, nf), dtype=complex)
    for f, block in enumerate(flag_restrictions(p, ensemble)):
        out[:, f, :, f] = synthesize(block)
    return out.reshape(n * nf, n * nf)


def weight_diagonal(values: Sequence[float], k: int) -> np.ndarray:
    """Diagonal of ``p(W)`` where ``W`` counts ones and ``values[w] = p(w)``."""
    return np.asarray(values, dtype=float)[_popcount(np.arange(1 << k))]


def diagonal_degree(diag: np.ndarray, tol: float = 1e-12) -> int:
    """Pauli degree of a diagonal operator (only Z-strings can appear)."""
    coeffs = _fwht(np.asarray(diag, dtype=complex), axis=0) / len(diag)
    nz = np.nonzero(np.abs(coeffs) > tol)[0]
    if not len(nz):
        return 0
    return int(_popcount(nz).max())


def cz_error_bound(r: float) -> float:
    """``2^(1 - r/256) log2(e)``, vacuous (> 2) unless ``r`` is in the hundreds."""
    return 2.0 ** (1 - r / 256) * LOG2_E


@dataclass(frozen=True)
class CzApproxResult:
    k: int
    r: float
    target_degree: int
    degree: int
    poly_values: tuple[float, ...]
    spectral_error: float
    minimax_error: float
    scale: float
    paper_bound: float

    @property
    def diagonal(self) -> np.ndarray:
        return weight_diagonal(self.poly_values, self.k)

    @property
    def operator(self) -> np.ndarray:
        return np.diag(self.diagonal.astype(complex))

    @property
    def bound_nonvacuous(self) -> bool:
        return self.paper_bound <= 2

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "r": self.r,
            "degree": self.degree,
            "target_degree": self.target_degree,
            "spectral_error": self.spectral_error,
            "minimax_error": self.minimax_error,
            "scale": self.scale,
            "paper_bound": self.paper_bound,
            "poly_values": list(self.poly_values),
        }


def cz_target(k: int) -> np.ndarray:
    f = np.ones(k + 1)
    f[k] = -1
    return f


def symmetric_approx(f: np.ndarray, degree: int) -> tuple[np.ndarray, float, float, float]:
    """Minimax fit on ``0..k`` rescaled to a contraction.

    Returns ``(values, error, pre-rescale error, scale)``.
    """
    k = len(f) - 1
    fit = minimax_fit(np.arange(k + 1), f, degree)
    peak = float(np.abs(fit.values).max())
    scale = 1.0 / peak if peak > 1 else 1.0
    values = fit.values * scale
    return values, float(np.abs(values - f).max()), fit.error, scale


def cz_low_degree_approx(k: int, r: float) -> CzApproxResult:
    """Contraction ``p(W)`` of degree ``min(k, ceil(sqrt(k r)))`` closest to ``CZ_k`` on the weight spectrum."""
    if k < 2:
        raise ArgumentError("k must be at least 2")
    if not 1 < r < k:
        raise ArgumentError(f"r must lie in (1, {k}), got {r}")
    target = min(k, math.ceil(math.sqrt(k * r) - 1e-12))
    f = cz_target(k)
    if target >= k:
        values, error, minimax_error, scale = f.copy(), 0.0, 0.0, 1.0
    else:
        values, error, minimax_error, scale = symmetric_approx(f, target)
    return CzApproxResult(
        k=k,
        r=float(r),
        target_degree=target,
        degree=diagonal_degree(weight_diagonal(values, k)),
        poly_values=tuple(float(v) for v in values),
        spectral_error=error,
        minimax_error=minimax_error,
        scale=scale,
        paper_bound=cz_error_bound(r),
    )
