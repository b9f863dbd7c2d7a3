"""Pauli strings, Pauli expansions and degree truncation.

A Pauli string is a tuple over ``{0, 1, 2, 3}`` (I, X, Y, Z), one letter per
wire, wire 0 first. Expansions are sparse ``{string: coefficient}`` maps with
the normalized convention ``A = sum_s c_s B_s`` and
``c_s = 2**-q Tr(B_s^dagger A)``.
"""

from __future__ import annotations

import csv
import io
import itertools
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field

import numpy as np

from .config import check_capacity
from .errors import ArgumentError
from .linalg import num_qubits

DROP_TOL = 1e-12

PauliString = tuple[int, ...]

SINGLE = (
    np.array([[1, 0], [0, 1]], dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
LETTERS = "IXYZ"


def label(s: PauliString) -> str:
    return "".join(LETTERS[x] for x in s)


def parse_label(text: str) -> PauliString:
    try:
        return tuple(LETTERS.index(c) for c in text.strip().upper())
    except ValueError:
        raise ArgumentError(f"not a Pauli label: {text!r}") from None


def weight(s: PauliString) -> int:
    return sum(1 for x in s if x)


def support(s: PauliString) -> tuple[int, ...]:
    return tuple(i for i, x in enumerate(s) if x)


def single_site(q: int, wire: int, letter: int) -> PauliString:
    s = [0] * q
    s[wire] = letter
    return tuple(s)


def low_weight_strings(q: int, max_weight: int) -> Iterator[PauliString]:
    """All strings of weight ``<= max_weight``, ordered by weight then support then letters."""
    for w in range(min(max_weight, q) + 1):
        for supp in itertools.combinations(range(q), w):
            for letters in itertools.product((1, 2, 3), repeat=w):
                s = [0] * q
                for i, x in zip(supp, letters):
                    s[i] = x
                yield tuple(s)


def count_low_weight(q: int, max_weight: int) -> int:
    from math import comb

    return sum(comb(q, w) * 3**w for w in range(min(max_weight, q) + 1))


def pauli_matrix(s: PauliString) -> np.ndarray:
    check_capacity(len(s))
    out = np.ones((1, 1), dtype=complex)
    for x in s:
        out = np.kron(out, SINGLE[x])
    return out


def _xz(s: PauliString) -> tuple[int, int]:
    q = len(s)
    x = z = 0
    for i, letter in enumerate(s):
        bit = 1 << (q - 1 - i)
        if letter in (1, 2):
            x |= bit
        if letter in (2, 3):
            z |= bit
    return x, z


def _popcount(v: np.ndarray | int):
    if isinstance(v, (int, np.integer)):
        return bin(int(v)).count("1")
    out = np.zeros_like(v)
    v = v.copy()
    while np.any(v):
        out += v & 1
        v >>= 1
    return out


def _fwht(a: np.ndarray, axis: int) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along ``axis`` (length a power of two)."""
    a = np.moveaxis(a, axis, -1).copy()
    n = a.shape[-1]
    h = 1
    while h < n:
        a = a.reshape(a.shape[:-1] + (n // (2 * h), 2, h))
        lo = a[..., 0, :].copy()
        hi = a[..., 1, :]
        a[..., 0, :] = lo + hi
        a[..., 1, :] = lo - hi
        a = a.reshape(a.shape[:-3] + (n,))
        h *= 2
    return np.moveaxis(a, -1, axis)


@dataclass(frozen=True)
class PauliExpansion:
    qubits: int
    coeffs: Mapping[PauliString, complex] = field(default_factory=dict)

    def __post_init__(self):
        for key in self.coeffs:
            if len(key) != self.qubits:
                raise ArgumentError(f"string {key} does not have length {self.qubits}")

    def __len__(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, s: PauliString) -> complex:
        return self.coeffs.get(tuple(s), 0.0)

    @property
    def degree(self) -> int:
        # the zero expansion has degree 0 by convention
        return max((weight(s) for s in self.coeffs), default=0)

    def l2_norm_sq(self) -> float:
        """Squared normalized Schatten-2 norm via Parseval."""
        return float(sum(abs(c) ** 2 for c in self.coeffs.values()))

    def l2_norm(self) -> float:
        return float(np.sqrt(self.l2_norm_sq()))

    def labels(self) -> dict[str, complex]:
        return {label(s): c for s, c in self.coeffs.items()}

    def __add__(self, other: PauliExpansion) -> PauliExpansion:
        if other.qubits != self.qubits:
            raise ArgumentError("qubit counts differ")
        out = dict(self.coeffs)
        for s, c in other.coeffs.items():
            out[s] = out.get(s, 0) + c
        return PauliExpansion(self.qubits, {s: c for s, c in out.items() if abs(c) > DROP_TOL})

    def __sub__(self, other: PauliExpansion) -> PauliExpansion:
        return self + other.scale(-1)

    def scale(self, factor: complex) -> PauliExpansion:
        return PauliExpansion(self.qubits, {s: factor * c for s, c in self.coeffs.items()})

    @classmethod
    def from_labels(cls, terms: Mapping[str, complex]) -> PauliExpansion:
        parsed = {parse_label(k): complex(v) for k, v in terms.items()}
        lengths = {len(k) for k in parsed}
        if len(lengths) > 1:
            raise ArgumentError("labels have different lengths")
        q = lengths.pop() if lengths else 0
        return cls(q, parsed)


def expand(a: np.ndarray, tol: float = DROP_TOL) -> PauliExpansion:
    """Pauli coefficients of ``a`` via a Walsh-Hadamard transform, O(4^q q)."""
    q = num_qubits(a)
    n = 1 << q
    b = np.arange(n)
    x = b[:, None]
    # w[x, b] = A[b ^ x, b]; the transform over b yields Tr(Z^z X^x A) for every z
    w = a[b[None, :] ^ x, b[None, :]]
    t = _fwht(w, axis=1)
    phase = (-1j) ** (_popcount(x & b[None, :]) % 4)
    dense = t * phase / n
    keep = np.argwhere(np.abs(dense) > tol)
    if not len(keep):
        return PauliExpansion(q, {})
    letters = _letters_for(keep[:, 0], keep[:, 1], q)
    vals = dense[keep[:, 0], keep[:, 1]]
    return PauliExpansion(q, dict(zip(map(tuple, letters.tolist()), vals.tolist())))


def _letters_for(x: np.ndarray, z: np.ndarray, q: int) -> np.ndarray:
    out = np.zeros((len(x), q), dtype=np.int8)
    for i in range(q):
        bit = q - 1 - i
        xb = (x >> bit) & 1
        zb = (z >> bit) & 1
        out[:, i] = np.where(xb == 1, np.where(zb == 1, 2, 1), np.where(zb == 1, 3, 0))
    return out


def synthesize(p: PauliExpansion) -> np.ndarray:
    """Dense operator ``sum_s c_s B_s``."""
    q = p.qubits
    check_capacity(q)
    n = 1 << q
    out = np.zeros((n, n), dtype=complex)
    if not p.coeffs:
        return out
    b = np.arange(n)
    if len(p.coeffs) > n:
        # dense route: inverse transform of the full (x, z) coefficient table
        letters = np.array(list(p.coeffs), dtype=np.int64).reshape(-1, q)
        weights = 1 << np.arange(q - 1, -1, -1, dtype=np.int64)
        xs = ((letters == 1) | (letters == 2)).astype(np.int64) @ weights
        zs = ((letters == 2) | (letters == 3)).astype(np.int64) @ weights
        vals = np.fromiter(p.coeffs.values(), dtype=complex, count=len(p.coeffs))
        table = np.zeros((n, n), dtype=complex)
        np.add.at(table, (xs, zs), vals * 1j ** (_popcount(xs & zs) % 4))
        w = _fwht(table, axis=1)
        out[b[None, :] ^ b[:, None], b[None, :]] = w
        return out
    for s, c in p.coeffs.items():
        x, z = _xz(s)
        signs = 1 - 2 * (_popcount(b & z) & 1)
        out[b ^ x, b] += c * 1j ** (_popcount(x & z) % 4) * signs
    return out


def truncate_degree(p: PauliExpansion, d: int) -> PauliExpansion:
    if d < 0:
        raise ArgumentError("degree must be non-negative")
    return PauliExpansion(p.qubits, {s: c for s, c in p.coeffs.items() if weight(s) <= d})


def high_part(p: PauliExpansion, d: int) -> PauliExpansion:
    return PauliExpansion(p.qubits, {s: c for s, c in p.coeffs.items() if weight(s) > d})


def restrict_away_from(p: PauliExpansion, wires: Iterable[int]) -> PauliExpansion:
    """Keep only terms whose support avoids ``wires`` (normalized partial trace, re-padded)."""
    wires = set(wires)
    return PauliExpansion(
        p.qubits,
        {s: c for s, c in p.coeffs.items() if not any(s[w] for w in wires)},
    )


def spectrum_rows(p: PauliExpansion) -> list[tuple[str, int, float, float]]:
    rows = [(label(s), weight(s), float(np.real(c)), float(np.imag(c))) for s, c in p.coeffs.items()]
    rows.sort(key=lambda r: (r[1], r[0].translate(str.maketrans("IXYZ", "0123"))))
    return rows


def spectrum_csv(p: PauliExpansion) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sigma_string", "weight", "re", "im"])
    for row in spectrum_rows(p):
        writer.writerow([row[0], row[1], repr(row[2]), repr(row[3])])
    return buf.getvalue()
