"""Layered single-qubit + CZ circuits, their channels and Choi objects."""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import check_capacity
from .errors import ArgumentError, ValidationError
from .linalg import apply_on_wires, check_density, partial_trace, permute_wires

UNITARY_TOL = 1e-10

X_GATE = np.array([[0, 1], [1, 0]], dtype=complex)


@dataclass(frozen=True)
class SingleLayer:
    gates: Mapping[int, np.ndarray] = field(default_factory=dict)
    kind = "single"


@dataclass(frozen=True)
class CzLayer:
    sets: tuple[tuple[int, ...], ...] = ()
    kind = "cz"


Layer = SingleLayer | CzLayer


@dataclass(frozen=True)
class Qac0Circuit:
    n: int
    a: int = 0
    layers: tuple[Layer, ...] = ()
    ancilla: np.ndarray | None = None  # None means |0^a>

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        self.validate()

    @property
    def wires(self) -> int:
        return self.n + self.a

    @property
    def depth(self) -> int:
        return sum(1 for layer in self.layers if isinstance(layer, CzLayer))

    def ancilla_state(self) -> np.ndarray:
        if self.ancilla is None:
            v = np.zeros(1 << self.a, dtype=complex)
            v[0] = 1
            return v
        return np.asarray(self.ancilla, dtype=complex)

    def validate(self) -> None:
        if self.n < 0 or self.a < 0:
            raise ValidationError("wire counts must be non-negative")
        check_capacity(self.wires, "circuit")
        if self.ancilla is not None:
            psi = np.asarray(self.ancilla, dtype=complex)
            if psi.shape != (1 << self.a,):
                raise ValidationError(f"ancilla state needs {1 << self.a} amplitudes")
            if abs(np.linalg.norm(psi) - 1) > 1e-9:
                raise ValidationError("ancilla state is not normalized")
        for idx, layer in enumerate(self.layers):
            if isinstance(layer, SingleLayer):
                for wire, gate in layer.gates.items():
                    self._check_wire(wire, idx)
                    g = np.asarray(gate, dtype=complex)
                    if g.shape != (2, 2):
                        raise ValidationError(f"layer {idx}: gate on wire {wire} is not 2x2")
                    if np.abs(g.conj().T @ g - np.eye(2)).max() > UNITARY_TOL:
                        raise ValidationError(f"layer {idx}: gate on wire {wire} is not unitary")
            elif isinstance(layer, CzLayer):
                seen: set[int] = set()
                for s in layer.sets:
                    if not s:
                        raise ValidationError(f"layer {idx}: empty CZ set")
                    for wire in s:
                        self._check_wire(wire, idx)
                    if seen & set(s) or len(set(s)) != len(s):
                        raise ValidationError(f"layer {idx}: CZ sets overlap")
                    seen |= set(s)
            else:
                raise ValidationError(f"layer {idx}: unknown layer type {type(layer).__name__}")

    def _check_wire(self, wire: int, idx: int) -> None:
        if not 0 <= wire < self.wires:
            raise ValidationError(f"layer {idx}: wire {wire} out of range")


@dataclass(frozen=True)
class ChannelSpec:
    circuit: Qac0Circuit
    output_wires: tuple[int, ...] = ()

    def __post_init__(self):
        out = tuple(self.output_wires) if self.output_wires else tuple(range(self.circuit.n))
        object.__setattr__(self, "output_wires", out)
        if len(set(out)) != len(out):
            raise ValidationError("output wires must be distinct")
        for w in out:
            if not 0 <= w < self.circuit.wires:
                raise ValidationError(f"output wire {w} out of range")

    @classmethod
    def first(cls, circuit: Qac0Circuit, m: int) -> ChannelSpec:
        return cls(circuit, tuple(range(m)))

    @property
    def n(self) -> int:
        return self.circuit.n

    @property
    def m(self) -> int:
        return len(self.output_wires)


@dataclass(frozen=True)
class ChoiObject:
    representation: np.ndarray
    state: np.ndarray
    n: int
    m: int


def cz_diagonal(k: int) -> np.ndarray:
    if k < 1:
        raise ArgumentError("CZ needs at least one wire")
    d = np.ones(1 << k, dtype=complex)
    d[-1] = -1
    return d


def cz_gate(k: int) -> np.ndarray:
    """``I - 2|1..1><1..1|`` on ``k`` wires."""
    return np.diag(cz_diagonal(k))


def cz_layer_diagonal(sets: Sequence[Sequence[int]], q: int) -> np.ndarray:
    idx = np.arange(1 << q)
    d = np.ones(1 << q, dtype=complex)
    for s in sets:
        mask = 0
        for w in s:
            mask |= 1 << (q - 1 - w)
        d[(idx & mask) == mask] *= -1
    return d


def apply_layer(layer: Layer, mat: np.ndarray, q: int) -> np.ndarray:
    """Left-multiply ``mat`` by the layer unitary on ``q`` wires."""
    if isinstance(layer, CzLayer):
        return cz_layer_diagonal(layer.sets, q)[:, None] * mat
    for wire, gate in sorted(layer.gates.items()):
        mat = apply_on_wires(np.asarray(gate, dtype=complex), [wire], mat)
    return mat


def layer_unitary(layer: Layer, q: int) -> np.ndarray:
    return apply_layer(layer, np.eye(1 << q, dtype=complex), q)


def build_unitary(c: Qac0Circuit) -> np.ndarray:
    """``U = L_d M_d ... M_1 L_0`` with the first listed layer applied first."""
    q = c.wires
    u = np.eye(1 << q, dtype=complex)
    for layer in c.layers:
        u = apply_layer(layer, u, q)
    return u


def _isometry(c: Qac0Circuit) -> np.ndarray:
    """Columns ``U (|x> (x) |psi>)`` for every input basis state ``x``."""
    u = build_unitary(c)
    psi = c.ancilla_state()
    return u.reshape(1 << c.wires, 1 << c.n, 1 << c.a) @ psi


def apply_channel(spec: ChannelSpec, rho: np.ndarray) -> np.ndarray:
    c = spec.circuit
    if check_density(rho) != c.n:
        raise ValidationError(f"input must act on {c.n} qubits")
    v = _isometry(c)
    out = v @ rho @ v.conj().T
    return _select_outputs(out, spec)


def _select_outputs(op: np.ndarray, spec: ChannelSpec) -> np.ndarray:
    wires = spec.circuit.wires
    traced = [w for w in range(wires) if w not in spec.output_wires]
    reduced = partial_trace(op, traced)
    kept = sorted(spec.output_wires)
    return permute_wires(reduced, [kept.index(w) for w in spec.output_wires])


def choi(spec: ChannelSpec) -> ChoiObject:
    """Choi representation ``(I (x) Phi)(|EPR><EPR|)`` with unnormalized EPR, input register first."""
    c = spec.circuit
    n, m = c.n, spec.m
    check_capacity(n + m, "Choi representation")
    v = _isometry(c)
    # omega[x, j] = <j|U|x, psi>: the purified Choi vector on (input, all wires)
    omega = v.T.reshape([1 << n] + [2] * c.wires)
    rest = [w for w in range(c.wires) if w not in spec.output_wires]
    omega = omega.transpose([0] + [1 + w for w in spec.output_wires] + [1 + w for w in rest])
    omega = omega.reshape(1 << (n + m), -1)
    rep = omega @ omega.conj().T
    return ChoiObject(representation=rep, state=rep / (1 << n), n=n, m=m)


def hard_instance(x: Sequence[int] | str) -> Qac0Circuit:
    """Depth-1 circuit implementing ``I - 2|x><x|``: X on the zeros of ``x``, full CZ, X again."""
    bits = [int(b) for b in x]
    if not bits or any(b not in (0, 1) for b in bits):
        raise ArgumentError("x must be a non-empty bitstring")
    n = len(bits)
    flips = {i: X_GATE for i, b in enumerate(bits) if b == 0}
    cz = CzLayer((tuple(range(n)),))
    if not flips:
        return Qac0Circuit(n, 0, (cz,))
    return Qac0Circuit(n, 0, (SingleLayer(flips), cz, SingleLayer(flips)))


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValidationError(f"complex entries are [re, im] pairs, got {v!r}")
        return complex(float(v[0]), float(v[1]))
    return complex(v)


_CIRCUIT_KEYS = {"n", "a", "ancilla", "layers", "output_wires"}


def circuit_from_dict(doc: Mapping) -> ChannelSpec:
    unknown = set(doc) - _CIRCUIT_KEYS
    if unknown:
        raise ValidationError(f"unknown circuit keys: {sorted(unknown)}")
    try:
        n = int(doc["n"])
        a = int(doc.get("a", 0))
        anc = doc.get("ancilla", "zeros")
        ancilla = None if anc in (None, "zeros") else np.array([_complex(v) for v in anc])
        layers: list[Layer] = []
        for entry in doc.get("layers", []):
            kind = entry.get("type")
            if kind == "single":
                gates = {}
                for wire, flat in entry.get("gates", {}).items():
                    vals = [_complex(v) for v in flat]
                    if len(vals) != 4:
                        raise ValidationError(f"gate on wire {wire} needs 4 entries")
                    gates[int(wire)] = np.array(vals).reshape(2, 2)
                layers.append(SingleLayer(gates))
            elif kind == "cz":
                layers.append(CzLayer(tuple(tuple(int(w) for w in s) for s in entry.get("sets", []))))
            else:
                raise ValidationError(f"unknown layer type {kind!r}")
        circuit = Qac0Circuit(n, a, tuple(layers), ancilla)
        out = tuple(int(w) for w in doc.get("output_wires", ()))
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValidationError(f"malformed circuit document: {exc}") from exc
    return ChannelSpec(circuit, out)


def circuit_to_dict(spec: ChannelSpec) -> dict:
    c = spec.circuit
    layers = []
    for layer in c.layers:
        if isinstance(layer, SingleLayer):
            gates = {
                str(w): [[float(z.real), float(z.imag)] for z in np.asarray(g).ravel()]
                for w, g in sorted(layer.gates.items())
            }
            layers.append({"type": "single", "gates": gates})
        else:
            layers.append({"type": "cz", "sets": [list(s) for s in layer.sets]})
    anc = "zeros" if c.ancilla is None else [[float(z.real), float(z.imag)] for z in c.ancilla]
    return {"n": c.n, "a": c.a, "ancilla": anc, "layers": layers, "output_wires": list(spec.output_wires)}


def load_circuit(path: str | Path) -> ChannelSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ValidationError(f"circuit file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"circuit file is not valid JSON: {exc}") from exc
    return circuit_from_dict(doc)


def save_circuit(spec: ChannelSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(circuit_to_dict(spec), indent=2))


def random_circuit(n: int, depth: int, seed=None, a: int = 0, max_gate: int | None = None) -> Qac0Circuit:
    """Random alternating circuit: Haar single-qubit layers around random CZ partitions."""
    from .randomops import random_unitary

    rng = np.random.default_rng(seed)
    q = n + a
    max_gate = q if max_gate is None else max_gate
    layers: list[Layer] = [SingleLayer({w: random_unitary(2, rng) for w in range(q)})]
    for _ in range(depth):
        perm = rng.permutation(q)
        sets = []
        i = 0
        while i < q:
            size = int(rng.integers(1, max_gate + 1))
            chunk = tuple(sorted(int(w) for w in perm[i : i + size]))
            if len(chunk) >= 2 or rng.random() < 0.5:
                sets.append(chunk)
            i += size
        layers.append(CzLayer(tuple(sets)))
        layers.append(SingleLayer({w: random_unitary(2, rng) for w in range(q)}))
    return Qac0Circuit(n, a, tuple(layers))
