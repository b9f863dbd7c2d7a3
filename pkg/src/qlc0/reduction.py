"""Reconstructing ``U (x) U^dag`` from per-wire learned channels.

For every wire ``i`` the circuit channel restricted to output wire ``i`` is
learned (or taken exactly). Contracting its Choi representation with a
single-qubit Pauli gives the Heisenberg-evolved observable
``V_i B_x^(i) V_i^dag``, where ``V_i = U^dag`` is the canonical local
inversion. Since ``S_i = 1/2 sum_x B_x^(i) (x) B_x^(i+n)``, these slices
assemble ``V_i S_i V_i^dag`` and the product ``S prod_i V_i S_i V_i^dag``
equals ``U (x) U^dag``.

Layout of the ``2n``-qubit operators: original register on wires ``0..n-1``,
mirror register on ``n..2n-1``.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .circuit import ChannelSpec, Qac0Circuit, _isometry, choi
from .config import check_capacity
from .errors import ArgumentError, InvalidInversionError, ValidationError
from .learning import channel_learn
from .linalg import embed, num_qubits, partial_trace, permute_wires, spectral_norm
from .pauli import SINGLE, synthesize

CLEAN_TOL = 1e-8
RESIDUAL_LIMIT = 1e-6


def clean_unitary(c: Qac0Circuit, tol: float = CLEAN_TOL) -> np.ndarray:
    """The ``n``-qubit unitary ``V`` with ``U(phi (x) psi) = (V phi) (x) psi``, ``psi`` the ancilla state."""
    v = _isometry(c)  # (2^(n+a), 2^n)
    psi = c.ancilla_state()
    cols = v.reshape(1 << c.n, 1 << c.a, 1 << c.n)
    # the ancilla register must factor out as psi for every basis input
    block = np.einsum("iax,a->ix", cols, psi.conj())
    rebuilt = np.einsum("ix,a->iax", block, psi)
    if np.abs(rebuilt - cols).max() > tol:
        raise ValidationError("circuit does not return its ancillas to their initial state")
    return block


def swap_operator(n: int) -> np.ndarray:
    """Full swap between the original and mirror registers on ``2n`` wires."""
    check_capacity(2 * n)
    d = 1 << n
    return np.eye(d * d).reshape(d, d, d, d).transpose(1, 0, 2, 3).reshape(d * d, d * d).astype(complex)


def swap_pair(i: int, n: int) -> np.ndarray:
    """``S_i``: swap of wires ``i`` and ``i + n``."""
    check_capacity(2 * n)
    order = list(range(2 * n))
    order[i], order[i + n] = order[i + n], order[i]
    dim = 1 << (2 * n)
    # row b of the permutation matrix is the basis vector with wires i and i+n exchanged
    return np.eye(dim, dtype=complex).reshape([2] * (2 * n) + [dim]).transpose(order + [2 * n]).reshape(dim, dim)


def swap_decomposition(i: int, n: int) -> np.ndarray:
    """``1/2 sum_x B_x^(i) (x) B_x^(i+n)``."""
    return 0.5 * sum(np.kron(embed(b, [i], n), embed(b, [i], n)) for b in SINGLE)


@dataclass
class LocalInversion:
    wire: int
    operator: np.ndarray
    residual: float
    rest: np.ndarray | None = field(default=None, repr=False)  # W with U V_i = W (x) I_i


def local_inversion(c: Qac0Circuit, i: int, candidate: np.ndarray | None = None) -> LocalInversion:
    """``V_i`` with ``U V_i = W (x) I_i``; ``U^dag`` unless a candidate is supplied and certified."""
    u = clean_unitary(c)
    n = c.n
    if not 0 <= i < n:
        raise ArgumentError(f"wire {i} outside the {n} input wires")
    v = u.conj().T if candidate is None else np.asarray(candidate, dtype=complex)
    if v.shape != u.shape:
        raise ArgumentError(f"candidate must be {u.shape[0]}x{u.shape[0]}")
    if np.abs(v.conj().T @ v - np.eye(len(v))).max() > 1e-9:
        raise InvalidInversionError("candidate is not unitary")
    prod = u @ v
    # move wire i last and split off the identity on it
    order = [w for w in range(n) if w != i] + [i]
    moved = permute_wires(prod, order)
    rest = partial_trace(moved, [n - 1]) / 2
    residual = spectral_norm(moved - np.kron(rest, np.eye(2)))
    if residual > RESIDUAL_LIMIT:
        raise InvalidInversionError(f"U V_{i} does not act trivially on wire {i} (residual {residual:.3g})")
    return LocalInversion(i, v, residual, rest)


def wire_channel(c: Qac0Circuit, i: int) -> ChannelSpec:
    """The channel ``rho -> Tr_{-i}(U rho U^dag)``, whose dual gives the slices ``V_i B_x V_i^dag``."""
    return ChannelSpec(c, (i,))


def heisenberg_slice(m_i: np.ndarray, x: int) -> np.ndarray:
    """``Q_{i,x} = Tr_out[M^T (I (x) B_x^T)]``, with ``Q_{i,0} = I``.

    For the exact Choi representation of ``rho -> Tr_{-i}(W rho W^dag)`` this
    is the dual map applied to ``B_x``, namely ``W^dag B_x^(i) W``.
    """
    m_i = np.asarray(m_i, dtype=complex)
    q = num_qubits(m_i)
    if q < 2:
        raise ArgumentError("slice needs a Choi representation on at least 2 qubits")
    n = q - 1
    if x not in (0, 1, 2, 3):
        raise ArgumentError("x must be 0, 1, 2 or 3")
    if x == 0:
        return np.eye(1 << n, dtype=complex)
    prod = m_i.T @ np.kron(np.eye(1 << n), SINGLE[x].T)
    return partial_trace(prod, [n])


@dataclass
class SewnOperator:
    operator: np.ndarray
    per_wire_blocks: list[list[np.ndarray]]
    factors: list[np.ndarray] = field(default_factory=list, repr=False)


def sew_factor(blocks: Sequence[np.ndarray], i: int, n: int) -> np.ndarray:
    """``Q_i = 1/2 sum_x Q_{i,x} (x) B_x^(i+n)``."""
    return 0.5 * sum(np.kron(blocks[x], embed(SINGLE[x], [i], n)) for x in range(4))


def sew_operators(factors: Sequence[np.ndarray], n: int) -> np.ndarray:
    """``S Q_1 ... Q_n``."""
    out = swap_operator(n)
    for f in factors:
        out = out @ f
    return out


def sew(blocks: Sequence[Sequence[np.ndarray]] | Mapping[int, Sequence[np.ndarray]], n: int) -> SewnOperator:
    check_capacity(2 * n)
    rows = []
    for i in range(n):
        try:
            row = blocks[i]
        except (KeyError, IndexError):
            raise ArgumentError(f"missing blocks for wire {i}") from None
        if len(row) != 4 or any(b is None for b in row):
            raise ArgumentError(f"wire {i} needs four blocks")
        row = [np.asarray(b, dtype=complex) for b in row]
        if any(b.shape != (1 << n, 1 << n) for b in row):
            raise ArgumentError(f"blocks for wire {i} must be {1 << n}x{1 << n}")
        rows.append(row)
    factors = [sew_factor(rows[i], i, n) for i in range(n)]
    return SewnOperator(sew_operators(factors, n), rows, factors)


def target_operator(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj().T)


@dataclass
class WireReport:
    wire: int
    residual: float
    choi_spectral_error: float
    choi_l2_error: float
    factor_error: float  # ||Q_i - V_i S_i V_i^dag||
    samples_used: int = 0

    def as_dict(self) -> dict:
        return {
            "wire": self.wire,
            "residual": self.residual,
            "choi_spectral_error": self.choi_spectral_error,
            "choi_l2_error": self.choi_l2_error,
            "factor_error": self.factor_error,
            "samples_used": self.samples_used,
        }


@dataclass
class ReductionReport:
    sewn: SewnOperator
    mode: str
    eps: float
    delta: float
    wires: list[WireReport]
    final_error: float
    paper_bound: float  # 9 n eps
    hybrid_bound: float | None  # 3 n max factor error, when that is below 1/n
    seed: int | None = None

    @property
    def within_bound(self) -> bool:
        return self.final_error <= self.paper_bound + 1e-9

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "eps": self.eps,
            "delta": self.delta,
            "seed": self.seed,
            "final_error": self.final_error,
            "paper_bound": self.paper_bound,
            "hybrid_bound": self.hybrid_bound,
            "within_bound": self.within_bound,
            "wires": [w.as_dict() for w in self.wires],
        }


def _perturbation(dim: int, size: float, seed) -> np.ndarray:
    """Hermitian matrix of spectral norm exactly ``size``."""
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = g + g.conj().T
    return size * h / spectral_norm(h)


def run_reduction(
    c: Qac0Circuit,
    eps: float = 0.0,
    delta: float = 0.05,
    *,
    mode: str = "exact",
    seed: int = 0,
    inject: Mapping[int, float] | None = None,
    workers: int = 1,
    constant: float | None = None,
) -> ReductionReport:
    """Learn (or compute) each wire's Choi representation, slice, sew and compare to ``U (x) U^dag``.

    ``sampled`` mode learns each wire's ``n -> 1`` channel at full degree with
    normalized Schatten-2 accuracy ``eps`` and failure budget ``delta / n``.
    ``inject`` maps wires to a spectral-norm perturbation added to their Choi
    representation before slicing.
    """
    if mode not in ("exact", "sampled"):
        raise ArgumentError(f"unknown mode {mode!r}")
    if mode == "sampled" and not 0 < eps < 1:
        raise ArgumentError("sampled mode needs eps in (0, 1)")
    if not 0 < delta < 1:
        raise ArgumentError("delta must lie in (0, 1)")
    n = c.n
    check_capacity(2 * n, "sewn operator")
    u = clean_unitary(c)
    inject = dict(inject or {})
    for w in inject:
        if not 0 <= w < n:
            raise ArgumentError(f"injection wire {w} out of range")
    seeds = np.random.SeedSequence(seed).spawn(n)

    def pipeline(i: int):
        inv = local_inversion(c, i)
        spec = wire_channel(c, i)
        exact = choi(spec).representation
        samples = 0
        if mode == "exact":
            m_i = exact.copy()
        else:
            kw = {} if constant is None else {"constant": constant}
            hyp = channel_learn(
                spec, n + 1, eps, delta / n, seed=int(seeds[i].generate_state(1)[0]), **kw
            )
            m_i = synthesize(hyp.expansion)
            samples = hyp.samples_used
        if i in inject:
            m_i = m_i + _perturbation(len(m_i), inject[i], seeds[i].spawn(1)[0])
        diff = m_i - exact
        blocks = [heisenberg_slice(m_i, x) for x in range(4)]
        return inv, blocks, samples, spectral_norm(diff), float(np.linalg.norm(diff) / math.sqrt(len(diff)))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(pipeline, range(n)))
    else:
        results = [pipeline(i) for i in range(n)]
    sewn = sew([r[1] for r in results], n)
    ud = u.conj().T
    reports = []
    for i, (inv, _, samples, spec_err, l2_err) in enumerate(results):
        exact_factor = np.kron(ud, np.eye(1 << n)) @ swap_pair(i, n) @ np.kron(u, np.eye(1 << n))
        reports.append(
            WireReport(i, inv.residual, spec_err, l2_err, spectral_norm(sewn.factors[i] - exact_factor), samples)
        )
    eps_v = max(w.factor_error for w in reports)
    return ReductionReport(
        sewn=sewn,
        mode=mode,
        eps=eps,
        delta=delta,
        wires=reports,
        final_error=spectral_norm(sewn.operator - target_operator(u)),
        paper_bound=9 * n * eps,
        hybrid_bound=3 * n * eps_v if eps_v < 1 / n else None,
        seed=seed,
    )
