"""Random single-qubit Pauli-basis measurements (classical shadows) of a simulated state.

Each record stores, per wire, the measured axis (1 = X, 2 = Y, 3 = Z, the same
letters as Pauli strings) and the outcome sign (+1 for bit 0). Samples are
drawn in fixed-size blocks, block ``j`` from its own substream
``SeedSequence(seed, spawn_key=(j,))``, so the data do not depend on how the
blocks are split between worker threads.

Estimation uses median-of-means over ``K`` contiguous batches. For small
registers one histogram over (batch, basis code, outcome bits) is built and
every observable sharing a support is read off it by marginalizing the other
wires and contracting outcome bits with signs; larger registers use one
``bincount`` pass per support instead.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import check_capacity
from .errors import ArgumentError, PreconditionError, ValidationError
from .linalg import check_density
from .pauli import LETTERS, PauliString, parse_label, support

BLOCK_SIZE = 1 << 16
SHADOW_CONSTANT = 4.0  # c in N = c 3^d ln(2M/delta) / eps^2
FULL_TABLE_MAX_QUBITS = 8  # above this, Born distributions are built per distinct basis
FORMAT = "qlc0-shadows"

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_SDG = np.diag([1, -1j])
# rotation taking the +1 / -1 eigenvectors of X, Y, Z to |0> / |1>
ROTATIONS = (_H, _H @ _SDG, np.eye(2, dtype=complex))
# K[c, o, a, b] = R_c[o, a] conj(R_c[o, b]): outcome-o probability kernel for basis c
_KERNEL = np.einsum("coa,cob->coab", np.array(ROTATIONS), np.array(ROTATIONS).conj())


@dataclass(frozen=True)
class ShadowSample:
    basis: tuple[int, ...]
    outcomes: tuple[int, ...]

    def __post_init__(self):
        if len(self.basis) != len(self.outcomes):
            raise ValidationError("basis and outcomes must have equal length")


@dataclass(frozen=True)
class ShadowSet:
    """Shadow records stored compactly, one integer pair per sample.

    ``codes`` holds the measured bases in base 3 (X=0, Y=1, Z=2, wire 0 most
    significant) and ``outcome_bits`` the outcome bitstring (bit 0 means +1,
    wire 0 most significant). ``bases`` / ``outcomes`` expand them to
    ``(N, q)`` arrays over ``{1,2,3}`` and ``{+1,-1}``.
    """

    qubits: int
    codes: np.ndarray
    outcome_bits: np.ndarray
    seed: int | None
    batches: int
    choi_dims: tuple[int, int] | None = None  # (n, m) when the state is a Choi state

    def __post_init__(self):
        c = np.asarray(self.codes, dtype=np.int64).reshape(-1)
        o = np.asarray(self.outcome_bits, dtype=np.int64).reshape(-1)
        if c.shape != o.shape:
            raise ValidationError("codes and outcome bits must have equal length")
        if c.size and (c.min() < 0 or c.max() >= 3**self.qubits or o.min() < 0 or o.max() >= 2**self.qubits):
            raise ValidationError("basis codes or outcome bits out of range")
        if not 1 <= self.batches <= max(1, len(c)):
            raise ValidationError(f"need 1 <= batches <= samples, got {self.batches} batches for {len(c)} samples")
        object.__setattr__(self, "codes", c)
        object.__setattr__(self, "outcome_bits", o)

    @classmethod
    def from_arrays(cls, bases, outcomes, seed=None, batches: int = 1, choi_dims=None) -> ShadowSet:
        b = np.asarray(bases, dtype=np.int64)
        o = np.asarray(outcomes, dtype=np.int64)
        if b.ndim != 2 or b.shape != o.shape:
            raise ValidationError("bases and outcomes must be (N, q) arrays of equal shape")
        if b.size and (b.min() < 1 or b.max() > 3):
            raise ValidationError("bases must lie in {1, 2, 3}")
        if o.size and not np.all(np.abs(o) == 1):
            raise ValidationError("outcomes must be +1 or -1")
        q = b.shape[1]
        bits = (o < 0).astype(np.int64) @ (1 << np.arange(q - 1, -1, -1, dtype=np.int64))
        return cls(q, _codes(b), bits, seed, batches, choi_dims)

    def __len__(self) -> int:
        return len(self.codes)

    @property
    def bases(self) -> np.ndarray:
        q = self.qubits
        powers = 3 ** np.arange(q - 1, -1, -1, dtype=np.int64)
        return ((self.codes[:, None] // powers[None, :]) % 3 + 1).astype(np.uint8)

    @property
    def outcomes(self) -> np.ndarray:
        return _outcome_signs(self.outcome_bits, self.qubits)

    @property
    def samples(self) -> list[ShadowSample]:
        return [
            ShadowSample(tuple(int(x) for x in b), tuple(int(x) for x in o))
            for b, o in zip(self.bases, self.outcomes)
        ]

    def with_batches(self, k: int) -> ShadowSet:
        return ShadowSet(self.qubits, self.codes, self.outcome_bits, self.seed, k, self.choi_dims)


def batch_count(n_observables: int, delta: float) -> int:
    """``K = ceil(8 ln(M / delta))`` median-of-means batches (at least 1)."""
    if not 0 < delta < 1:
        raise ArgumentError("delta must lie in (0, 1)")
    return max(1, math.ceil(8 * math.log(max(n_observables, 1) / delta)))


def sample_count(
    n_observables: int, degree: int, eps: float, delta: float, constant: float = SHADOW_CONSTANT
) -> tuple[int, int]:
    """``(N, K)`` with ``N = ceil(c 3^d ln(2M/delta) / eps^2)`` rounded up to a multiple of ``K``."""
    if eps <= 0:
        raise ArgumentError("eps must be positive")
    k = batch_count(n_observables, delta)
    n = math.ceil(constant * 3**degree * math.log(2 * max(n_observables, 1) / delta) / eps**2)
    n = max(n, k)
    return -(-n // k) * k, k


def born_table(state: np.ndarray) -> np.ndarray:
    """Outcome distribution for every basis: shape ``(3**q, 2**q)``, basis code in base 3 (X=0), wire 0 first."""
    q = check_density(state)
    t = np.asarray(state, dtype=complex).reshape([2] * (2 * q))
    # contract wire by wire; axes end up as (c_0, o_0, c_1, o_1, ...)
    for i in range(q):
        # current layout: processed (c, o) pairs for wires < i, then ket wires i.., bra wires i..
        ket = 2 * i
        bra = 2 * i + (q - i)
        t = np.tensordot(_KERNEL, t, axes=([2, 3], [ket, bra]))
        # tensordot puts (c, o) first; move them behind the processed pairs
        t = np.moveaxis(t, [0, 1], [ket, ket + 1])
    probs = np.real(t).reshape([3, 2] * q)
    perm = list(range(0, 2 * q, 2)) + list(range(1, 2 * q, 2))
    probs = probs.transpose(perm).reshape(3**q, 2**q)
    return np.clip(probs, 0, None)


def _basis_distribution(state: np.ndarray, basis: Sequence[int]) -> np.ndarray:
    q = len(basis)
    t = np.asarray(state, dtype=complex).reshape([2] * (2 * q))
    for i, c in enumerate(basis):
        r = ROTATIONS[c - 1]
        t = np.moveaxis(np.tensordot(r, t, axes=([1], [i])), 0, i)
        t = np.moveaxis(np.tensordot(r.conj(), t, axes=([1], [q + i])), 0, q + i)
    d = np.real(np.diagonal(t.reshape(1 << q, 1 << q)))
    return np.clip(d, 0, None)


def _codes(bases: np.ndarray) -> np.ndarray:
    q = bases.shape[1]
    weights = 3 ** np.arange(q - 1, -1, -1, dtype=np.int64)
    return (bases.astype(np.int64) - 1) @ weights


def _outcome_signs(idx: np.ndarray, q: int) -> np.ndarray:
    shifts = np.arange(q - 1, -1, -1)
    bits = (idx[:, None] >> shifts[None, :]) & 1
    return (1 - 2 * bits).astype(np.int8)


def _sample_block(state, joint, q: int, size: int, seed: int, block: int):
    """One block of i.i.d. samples.

    With the joint (basis, outcome) table the block is drawn as multinomial
    cell counts placed in uniformly random order, which has the same law as
    independent categorical draws.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))
    if joint is not None:
        counts = rng.multinomial(size, joint)
        cell = rng.permutation(np.repeat(np.arange(len(joint), dtype=np.int64), counts))
        return cell >> q, cell & ((1 << q) - 1)
    codes = rng.integers(0, 3**q, size=size, dtype=np.int64)
    u = rng.random(size)
    idx = np.empty(size, dtype=np.int64)
    powers = 3 ** np.arange(q - 1, -1, -1, dtype=np.int64)
    for c in np.unique(codes):
        rows = np.nonzero(codes == c)[0]
        cdf = np.cumsum(_basis_distribution(state, (c // powers) % 3 + 1))
        # scale by the total so rounding in the last entry never pushes u past it
        idx[rows] = np.searchsorted(cdf, u[rows] * cdf[-1], side="right")
    np.minimum(idx, (1 << q) - 1, out=idx)
    return codes, idx


def collect_shadows(
    state: np.ndarray,
    n_samples: int,
    seed: int,
    *,
    batches: int = 1,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
    choi_dims: tuple[int, int] | None = None,
) -> ShadowSet:
    """Measure ``n_samples`` copies of ``state`` in uniformly random Pauli bases."""
    q = check_density(state)
    check_capacity(q, "shadow state")
    if n_samples < 1:
        raise ArgumentError("n_samples must be positive")
    if block_size < 1:
        raise ArgumentError("block_size must be positive")
    if seed is None:
        raise ArgumentError("a seed is required")
    # uniform basis choice times the Born rule, flattened over (basis code, outcome bits)
    joint = None
    if q <= FULL_TABLE_MAX_QUBITS:
        joint = born_table(state).reshape(-1)
        joint = joint / joint.sum()
    sizes = [min(block_size, n_samples - s) for s in range(0, n_samples, block_size)]

    def run(j: int):
        return _sample_block(state, joint, q, sizes[j], int(seed), j)

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(j) for j in range(len(sizes))]
    codes = np.concatenate([p[0] for p in parts])
    bits = np.concatenate([p[1] for p in parts])
    return ShadowSet(q, codes, bits, int(seed), min(batches, n_samples), choi_dims)


def _as_string(o, q: int) -> PauliString:
    s = parse_label(o) if isinstance(o, str) else tuple(int(x) for x in o)
    if len(s) != q or any(x not in (0, 1, 2, 3) for x in s):
        raise ArgumentError(f"observable {o!r} is not a Pauli string on {q} qubits")
    return s


def _batch_index(n: int, k: int) -> np.ndarray:
    return (np.arange(n, dtype=np.int64) * k) // n


HISTOGRAM_MAX_CELLS = 1 << 24


def _histogram(shadows: ShadowSet, k: int) -> np.ndarray:
    """Counts per (batch, basis code, outcome bits), shape ``(k, 3^q, 2^q)``."""
    q = shadows.qubits
    cells = (3**q) * (1 << q)
    batch = _batch_index(len(shadows), k)
    flat = (batch * 3**q + shadows.codes) * (1 << q) + shadows.outcome_bits
    return np.bincount(flat, minlength=k * cells).reshape(k, 3**q, 1 << q).astype(float)


_SIGN = np.array([1.0, -1.0])


def _support_sums_from_histogram(hist: np.ndarray, q: int, supp: tuple[int, ...]) -> np.ndarray:
    """Per batch and per support basis code, the summed outcome sign products: ``(k, 3^w)``."""
    k = hist.shape[0]
    t = hist.reshape([k] + [3] * q + [2] * q)
    drop = [1 + w for w in range(q) if w not in supp] + [1 + q + w for w in range(q) if w not in supp]
    t = t.sum(axis=tuple(drop))
    w = len(supp)
    # remaining axes: batch, w basis axes, w outcome axes; contract outcomes with signs
    for _ in range(w):
        t = np.tensordot(t, _SIGN, axes=([t.ndim - 1], [0]))
    return t.reshape(k, 3**w)


def _support_sums_direct(shadows: ShadowSet, k: int, supp: tuple[int, ...]) -> np.ndarray:
    q = shadows.qubits
    w = len(supp)
    cols = list(supp)
    bases = shadows.bases[:, cols]
    codes = _codes(bases)
    shifts = np.array([q - 1 - c for c in cols])
    parity = ((shadows.outcome_bits[:, None] >> shifts[None, :]) & 1).sum(axis=1) & 1
    signs = 1.0 - 2.0 * parity
    batch = _batch_index(len(shadows), k)
    return np.bincount(batch * 3**w + codes, weights=signs, minlength=k * 3**w).reshape(k, 3**w)


def estimate_pauli_batch(
    shadows: ShadowSet,
    observables: Iterable[PauliString | str],
    max_degree: int,
    *,
    batches: int | None = None,
) -> dict[PauliString, float]:
    """Median-of-means estimates of ``Tr(B_s rho)`` for every observable of weight ``<= max_degree``.

    The single-sample value for ``s`` is ``prod_{i in supp s} 3 o_i [basis_i = s_i]``.
    """
    q = shadows.qubits
    obs = [_as_string(o, q) for o in observables]
    for s in obs:
        if sum(1 for x in s if x) > max_degree:
            raise PreconditionError(f"observable {''.join(LETTERS[x] for x in s)} exceeds degree {max_degree}")
    k = shadows.batches if batches is None else batches
    n = len(shadows)
    if not 1 <= k <= n:
        raise ArgumentError(f"need 1 <= batches <= {n}")
    counts = np.bincount(_batch_index(n, k), minlength=k).astype(float)
    by_support: dict[tuple[int, ...], list[PauliString]] = defaultdict(list)
    for s in obs:
        by_support[support(s)].append(s)
    hist = _histogram(shadows, k) if k * 6**q <= HISTOGRAM_MAX_CELLS else None
    out: dict[PauliString, float] = {}
    for supp, group in by_support.items():
        w = len(supp)
        if w == 0:
            for s in group:
                out[s] = 1.0
            continue
        if hist is not None:
            sums = _support_sums_from_histogram(hist, q, supp)
        else:
            sums = _support_sums_direct(shadows, k, supp)
        medians = np.median(sums * (3.0**w) / counts[:, None], axis=0)
        for s in group:
            code = 0
            for wire in supp:
                code = 3 * code + (s[wire] - 1)
            out[s] = float(medians[code])
    return out


def single_sample_estimates(shadows: ShadowSet, s: PauliString | str) -> np.ndarray:
    """Per-sample unbiased values ``prod_i 3 o_i [basis_i = s_i]`` over the support of ``s``."""
    s = _as_string(s, shadows.qubits)
    cols = list(support(s))
    if not cols:
        return np.ones(len(shadows))
    match = np.all(shadows.bases[:, cols] == np.array([s[c] for c in cols]), axis=1)
    signs = np.prod(shadows.outcomes[:, cols], axis=1, dtype=np.int64)
    return np.where(match, 3.0 ** len(cols) * signs, 0.0)


# two-copy purity kernel on one wire, patterns indexed 2 * (basis - 1) + (outcome bit)
_PURITY_KERNEL = np.array(
    [[5.0 if a == b else (-4.0 if a // 2 == b // 2 else 0.5) for b in range(6)] for a in range(6)]
)
PATTERN_MAX_QUBITS = 8


def estimate_purity(shadows: ShadowSet | None = None, *, state: np.ndarray | None = None, exact: bool = False) -> float:
    """Unbiased U-statistic estimate of ``Tr(rho^2)`` over all sample pairs.

    The pair kernel is ``prod_wires k`` with ``k = 5`` (same basis and outcome),
    ``-4`` (same basis, opposite outcome) or ``1/2`` (different bases). With
    ``exact=True`` the purity of ``state`` is returned directly.
    """
    if exact:
        if state is None:
            raise ArgumentError("exact mode needs the dense state")
        check_density(state)
        return float(np.real(np.trace(state @ state)))
    if shadows is None:
        raise ArgumentError("sampled mode needs a ShadowSet")
    n = len(shadows)
    if n < 2:
        raise PreconditionError("purity estimation needs at least 2 samples")
    q = shadows.qubits
    if q <= PATTERN_MAX_QUBITS:
        counts = _histogram(shadows, 1).reshape([3] * q + [2] * q)
        # interleave to per-wire patterns (basis, bit) -> 2 * basis + bit
        perm = [a for w in range(q) for a in (w, q + w)]
        t = counts.transpose(perm).reshape([6] * q) if q else counts.reshape(())
        flat = t.reshape(-1).copy()
        for i in range(q):
            t = np.moveaxis(np.tensordot(_PURITY_KERNEL, t, axes=([1], [i])), 0, i)
        total = float(np.dot(flat, np.reshape(t, -1)))
    else:
        pattern = 2 * (shadows.bases.astype(np.int64) - 1) + (shadows.outcomes < 0)
        total = _pairwise_total(pattern)
    total -= n * 5.0**q  # remove the self pairs
    return total / (n * (n - 1))


def _pairwise_total(pattern: np.ndarray, chunk: int = 512) -> float:
    n = len(pattern)
    total = 0.0
    for start in range(0, n, chunk):
        a = pattern[start : start + chunk]
        vals = _PURITY_KERNEL[a[:, None, :], pattern[None, :, :]]
        total += float(np.prod(vals, axis=2).sum())
    return total


def write_shadows(shadows: ShadowSet, path: str | Path) -> None:
    """JSON lines: a header with the seed, then ``{"b": "XZY", "o": "+-+"}`` per sample."""
    header = {
        "format": FORMAT,
        "version": 1,
        "qubits": shadows.qubits,
        "seed": shadows.seed,
        "batches": shadows.batches,
        "n_samples": len(shadows),
    }
    if shadows.choi_dims is not None:
        header["choi_dims"] = list(shadows.choi_dims)
    lines = [json.dumps(header)]
    for b, o in zip(shadows.bases, shadows.outcomes):
        lines.append(
            json.dumps({"b": "".join(LETTERS[x] for x in b), "o": "".join("+" if x > 0 else "-" for x in o)})
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_shadows(path: str | Path) -> ShadowSet:
    try:
        lines = Path(path).read_text().splitlines()
    except FileNotFoundError as exc:
        raise ValidationError(f"shadow file not found: {path}") from exc
    try:
        header = json.loads(lines[0])
        if header.get("format") != FORMAT:
            raise ValidationError("missing shadow header line")
        q = int(header["qubits"])
        bases, outcomes = [], []
        for line in lines[1:]:
            if not line.strip():
                continue
            rec = json.loads(line)
            if set(rec) != {"b", "o"} or len(rec["b"]) != q or len(rec["o"]) != q:
                raise ValidationError(f"malformed shadow record: {line}")
            bases.append(["XYZ".index(c) + 1 for c in rec["b"]])
            outcomes.append([{"+": 1, "-": -1}[c] for c in rec["o"]])
        dims = header.get("choi_dims")
        return ShadowSet.from_arrays(
            np.array(bases, dtype=np.int64).reshape(-1, q),
            np.array(outcomes, dtype=np.int64).reshape(-1, q),
            header.get("seed"),
            int(header.get("batches", 1)),
            tuple(dims) if dims else None,
        )
    except ValidationError:
        raise
    except (IndexError, KeyError, ValueError) as exc:
        raise ValidationError(f"malformed shadow file: {exc}") from exc
