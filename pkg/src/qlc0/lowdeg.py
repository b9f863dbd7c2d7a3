"""Low-degree approximation of conjugated operators through shallow circuits.

One CZ layer at a time: small gates are conjugated exactly, large gates are
replaced by dilated symmetric approximations, and the approximation is read
off as the flag-``|0>`` block of the dilated conjugation. Chaining layers
gives the multi-layer approximation with its ``2^-d`` degree schedule.

Constant policy: the existential constants are fixed as ``C_TILDE = 4 log2 e``
and ``C = 2 C_TILDE``. Every report carries the bound computed with them next
to the exactly measured error.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .circuit import CzLayer, Qac0Circuit, SingleLayer, apply_layer, build_unitary, cz_layer_diagonal
from .config import check_capacity
from .dilation import LOG2_E, cz_low_degree_approx, symmetric_approx
from .errors import ArgumentError, PreconditionError
from .linalg import apply_on_wires, spectral_norm
from .pauli import PauliExpansion, expand, restrict_away_from, synthesize

C_TILDE = 4 * LOG2_E
C_LAYER = 2 * C_TILDE


def layer_error_bound(n: int, r: float, a_norm: float = 1.0) -> float:
    return C_LAYER * n * 2.0 ** (-r / 512) * a_norm


def degree_schedule(n: int, ell: int, r: float, layers: int) -> list[float]:
    """Closed form of ``b_{i+1} = 4 sqrt(n b_i r)``, ``b_0 = ell``: ``(16 n r)^(1-2^-i) ell^(2^-i)``."""
    return [(16 * n * r) ** (1 - 2.0**-i) * ell ** (2.0**-i) for i in range(layers + 1)]


@dataclass
class GateReport:
    wires: tuple[int, ...]
    part: str  # "T0", "T1" or "T2"
    degree: int | None = None
    spectral_error: float = 0.0
    dilation_distance: float = 0.0  # ||CZ^up - approx^up||

    def as_dict(self) -> dict:
        return {
            "wires": list(self.wires),
            "part": self.part,
            "degree": self.degree,
            "spectral_error": self.spectral_error,
            "dilation_distance": self.dilation_distance,
        }


@dataclass
class LayerApproxReport:
    approx: PauliExpansion
    achieved_degree: int
    degree_bound: float
    spectral_error: float
    error_bound: float
    partition: dict
    branch: str  # "approx", "exact" or "fallback"
    ell: int
    r: float
    input_norm: float
    output_norm: float
    hybrid_bound: float  # 2 ||A|| sum_i ||CZ_i^up - approx_i^up||, measured constants
    gates: list[GateReport] = field(default_factory=list)
    dense: np.ndarray | None = field(default=None, repr=False)

    @property
    def fallback(self) -> bool:
        return self.branch == "fallback"

    @property
    def bound_nonvacuous(self) -> bool:
        return self.error_bound <= 2

    def as_dict(self) -> dict:
        return {
            "branch": self.branch,
            "ell": self.ell,
            "r": self.r,
            "achieved_degree": self.achieved_degree,
            "degree_bound": self.degree_bound,
            "spectral_error": self.spectral_error,
            "error_bound": self.error_bound,
            "hybrid_bound": self.hybrid_bound,
            "input_norm": self.input_norm,
            "output_norm": self.output_norm,
            "partition": self.partition,
            "gates": [g.as_dict() for g in self.gates],
        }


def _sets_of(layer) -> tuple[tuple[int, ...], ...]:
    if isinstance(layer, CzLayer):
        return layer.sets
    return tuple(tuple(int(w) for w in s) for s in layer)


def _embed_weight_values(values: Sequence[float], wires: Sequence[int], q: int) -> np.ndarray:
    """Length-``2**q`` vector whose entry is ``values[#ones among wires]``."""
    idx = np.arange(1 << q)
    count = np.zeros(1 << q, dtype=int)
    for w in wires:
        count += (idx >> (q - 1 - w)) & 1
    return np.asarray(values, dtype=float)[count]


def admissible_branch(n: int, ell: int, r: float) -> str:
    if r > n / ell:
        return "exact"
    if r < math.sqrt(n / ell):
        return "approx"
    return "fallback"


def approx_layer(
    layer,
    a: PauliExpansion,
    ell: int,
    r: float,
    *,
    dense: np.ndarray | None = None,
) -> LayerApproxReport:
    """Approximate ``U A U^dag`` for one CZ layer ``U`` by a low-degree operator.

    ``r`` must lie in ``(1, n)``. Inside ``(1, sqrt(n/ell))`` gates larger than
    ``t = sqrt(n/ell)`` are approximated; above ``n/ell`` the exact conjugate is
    returned. In between (where no degree guarantee is available) the exact branch
    is used and the report is marked ``fallback``.
    """
    sets = _sets_of(layer)
    n = a.qubits
    check_capacity(n)
    if ell < 1:
        raise ArgumentError("ell must be at least 1")
    if not 1 < r < n:
        raise ArgumentError(f"r={r} outside the admissible range (1, {n})")
    if a.degree > ell:
        raise PreconditionError(f"operator degree {a.degree} exceeds ell={ell}")
    a_dense = synthesize(a) if dense is None else dense
    a_norm = spectral_norm(a_dense)
    u = cz_layer_diagonal(sets, n)
    target = (u[:, None] * u.conj()[None, :]) * a_dense

    t = math.sqrt(n / ell)
    branch = admissible_branch(n, ell, r)
    gates = []
    for s in sets:
        size = len(s)
        part = "T0" if size <= t else ("T1" if size <= t * t else "T2")
        gates.append(GateReport(tuple(s), part))
    partition = {
        "t": t,
        "T0": sum(g.part == "T0" for g in gates),
        "T1": sum(g.part == "T1" for g in gates),
        "T2": sum(g.part == "T2" for g in gates),
    }

    if branch != "approx":
        m_dense = target
        hybrid = 0.0
    else:
        m_dense, hybrid = _dilated_conjugation(a, sets, gates, r, n)
        hybrid *= 2 * a_norm
    approx = expand(m_dense)
    return LayerApproxReport(
        approx=approx,
        achieved_degree=approx.degree,
        degree_bound=4 * math.sqrt(n * ell * r),
        spectral_error=spectral_norm(target - m_dense),
        error_bound=layer_error_bound(n, r, a_norm),
        partition=partition,
        branch=branch,
        ell=ell,
        r=float(r),
        input_norm=a_norm,
        output_norm=spectral_norm(m_dense),
        hybrid_bound=hybrid,
        gates=gates,
        dense=m_dense,
    )


def _dilated_conjugation(a: PauliExpansion, sets, gates: list[GateReport], r: float, n: int):
    """Flag-``|0>`` block of ``U~ A^Up U~^dag``.

    Every gate factor is diagonal, so with flag pattern ``f`` the block is
    ``sum_f (k_f k_f^dag) * A_f`` (elementwise), where ``k_f`` multiplies the
    exact small gates with, per approximated gate, either the approximation
    (flag 0) or its defect ``sqrt(1 - p^2)`` (flag 1), and ``A_f`` keeps the
    Pauli terms avoiding every raised set. Flags of exactly-conjugated gates
    factor out and are omitted.
    """
    exact_sets = [g.wires for g in gates if g.part == "T0"]
    base = cz_layer_diagonal(exact_sets, n) if exact_sets else np.ones(1 << n, dtype=complex)
    approx_gates = [g for g in gates if g.part != "T0"]
    top: list[np.ndarray] = []
    defect: list[np.ndarray] = []
    hybrid = 0.0
    for g in approx_gates:
        res = cz_low_degree_approx(len(g.wires), r)
        vals = np.asarray(res.poly_values)
        d = np.sqrt(np.clip(1 - vals**2, 0, None))
        f = np.ones(len(vals))
        f[-1] = -1
        g.degree = res.degree
        g.spectral_error = res.spectral_error
        # per weight the dilation difference is [[f-p, -d], [d, f-p]], norm sqrt((f-p)^2 + d^2)
        g.dilation_distance = float(np.sqrt((f - vals) ** 2 + d**2).max())
        hybrid += g.dilation_distance
        top.append(_embed_weight_values(vals, g.wires, n))
        defect.append(_embed_weight_values(d, g.wires, n))
    kt = len(approx_gates)
    out = np.zeros((1 << n, 1 << n), dtype=complex)
    for f in range(1 << kt):
        k = base.copy()
        raised: list[int] = []
        for i in range(kt):
            if (f >> (kt - 1 - i)) & 1:
                k = k * defect[i]
                raised.extend(approx_gates[i].wires)
            else:
                k = k * top[i]
        if not np.any(k):
            continue
        block = restrict_away_from(a, raised)
        if not block.coeffs:
            continue
        out += (k[:, None] * k.conj()[None, :]) * synthesize(block)
    return out, hybrid


@dataclass
class CircuitApproxReport:
    approx: PauliExpansion
    per_layer: list[LayerApproxReport]
    total_error: float
    total_error_bound: float
    degree_bound: float
    degree_schedule: list[float]
    degree_exponents: list[float]
    norms: list[float]
    norm_bounds: list[float]
    achieved_degrees: list[int]
    r: float
    n: int
    depth: int
    flags: list[str] = field(default_factory=list)

    @property
    def bound_nonvacuous(self) -> bool:
        return self.total_error_bound <= 2

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "depth": self.depth,
            "r": self.r,
            "approx_degree": self.approx.degree,
            "total_error": self.total_error,
            "total_error_bound": self.total_error_bound,
            "degree_bound": self.degree_bound,
            "degree_schedule": self.degree_schedule,
            "degree_exponents": self.degree_exponents,
            "achieved_degrees": self.achieved_degrees,
            "norms": self.norms,
            "norm_bounds": self.norm_bounds,
            "flags": self.flags,
            "per_layer": [rep.as_dict() for rep in self.per_layer],
        }


def approx_circuit(c: Qac0Circuit, a: PauliExpansion, r: float, *, fallback: bool = True) -> CircuitApproxReport:
    """Layer-by-layer approximation of ``U A U^dag`` for the whole circuit.

    Single-qubit layers are applied exactly (they never raise the degree);
    each CZ layer goes through :func:`approx_layer` with ``ell`` set to the
    current degree. With ``fallback=False`` a layer whose ``r`` falls in the
    uncovered gap raises instead of being conjugated exactly.
    """
    q = c.wires
    if a.qubits != q:
        raise ArgumentError(f"observable acts on {a.qubits} wires, circuit has {q}")
    if not 1 < r < q:
        raise ArgumentError(f"r={r} outside the admissible range (1, {q})")
    current = synthesize(a)
    expansion = a
    ell0 = max(1, a.degree)
    p = C_TILDE * q * 2.0 ** (-r / 512)
    reports: list[LayerApproxReport] = []
    norms = [spectral_norm(current)]
    degrees = [a.degree]
    flags: list[str] = []
    cz_index = 0
    for idx, layer in enumerate(c.layers):
        if isinstance(layer, SingleLayer):
            if not layer.gates:
                continue
            current = apply_layer(layer, current, q)
            current = _right_apply_dagger(layer, current, q)
            expansion = expand(current)
            continue
        cz_index += 1
        ell = max(1, expansion.degree)
        branch = admissible_branch(q, ell, r)
        if branch == "fallback":
            msg = (
                f"layer {idx} (CZ layer {cz_index}): r={r} in [sqrt(n/ell), n/ell] = "
                f"[{math.sqrt(q / ell):.4g}, {q / ell:.4g}]"
            )
            if not fallback:
                raise ArgumentError(f"inadmissible r at {msg}")
            flags.append(f"fallback at {msg}")
        rep = approx_layer(layer, expansion, ell, r, dense=current)
        reports.append(rep)
        current = rep.dense
        expansion = rep.approx
        norms.append(rep.output_norm)
        degrees.append(rep.achieved_degree)
    u = build_unitary(c)
    exact = u @ synthesize(a) @ u.conj().T
    d = c.depth
    sched = degree_schedule(q, ell0, r, d)
    return CircuitApproxReport(
        approx=expansion,
        per_layer=reports,
        total_error=spectral_norm(exact - current),
        total_error_bound=d * C_LAYER * q * 2.0 ** (-r / 512),
        degree_bound=sched[-1],
        degree_schedule=sched,
        degree_exponents=[1 - 2.0**-i for i in range(d + 1)],
        norms=norms,
        norm_bounds=[(1 + p) ** i for i in range(d + 1)],
        achieved_degrees=degrees,
        r=float(r),
        n=q,
        depth=d,
        flags=flags,
    )


def _right_apply_dagger(layer: SingleLayer, mat: np.ndarray, q: int) -> np.ndarray:
    for wire, gate in sorted(layer.gates.items()):
        mat = apply_on_wires(np.asarray(gate, dtype=complex).conj().T, [wire], mat, side="right")
    return mat


class EprApprox(NamedTuple):
    expansion: PauliExpansion
    achieved_error: float
    poly_degree: int


_BELL_PREP = np.array(
    [[1, 0, 0, 1], [0, 1, 1, 0], [0, 1, -1, 0], [1, 0, 0, -1]], dtype=complex
).T / np.sqrt(2)  # maps |00> -> |Phi+>, columns are the four Bell states


def epr_projector(n: int) -> np.ndarray:
    """``2^-n |EPR_n><EPR_n|`` on ``2n`` wires, pairs ``(i, n+i)``."""
    check_capacity(2 * n)
    v = np.eye(1 << n).reshape(-1) / np.sqrt(1 << n)
    return np.outer(v, v).astype(complex)


def _pair_count_diagonal(values: Sequence[float], n: int) -> np.ndarray:
    """Diagonal (in the pair-Bell basis) of ``p(W_B)``: counts pairs sitting in ``|00>``."""
    q = 2 * n
    idx = np.arange(1 << q)
    count = np.zeros(1 << q, dtype=int)
    for i in range(n):
        hi = (idx >> (q - 1 - i)) & 1
        lo = (idx >> (q - 1 - (n + i))) & 1
        count += (hi == 0) & (lo == 0)
    return np.asarray(values, dtype=float)[count]


def bell_weight_operator(values: Sequence[float], n: int) -> np.ndarray:
    """``p(W_B)`` with ``W_B = sum_i P_i``, ``P_i`` the Bell projector on ``(i, n+i)``."""
    check_capacity(2 * n)
    diag = _pair_count_diagonal(values, n).astype(complex)
    op = np.diag(diag)
    for i in range(n):
        op = apply_on_wires(_BELL_PREP, [i, n + i], op)
        op = apply_on_wires(_BELL_PREP.conj().T, [i, n + i], op, side="right")
    return op


def approx_epr(n: int, target_eps: float) -> EprApprox:
    """Lowest-degree symmetric polynomial in ``W_B`` within ``target_eps`` of the EPR projector."""
    if n < 1:
        raise ArgumentError("n must be at least 1")
    if not 0 < target_eps < 1:
        raise ArgumentError("target_eps must lie in (0, 1)")
    f = np.zeros(n + 1)
    f[n] = 1
    for deg in range(1, n + 1):
        if deg >= n:
            values, err = f, 0.0
            break
        values, err, _, _ = symmetric_approx(f, deg)
        if err <= target_eps:
            break
    op = bell_weight_operator(values, n)
    return EprApprox(expand(op), float(err), deg)
