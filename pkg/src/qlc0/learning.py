"""Low-degree agnostic learning of channels from Choi-state shadows, and tolerant testing.

The learner estimates every Pauli coefficient of the Choi representation up
to degree ``D``. An estimate ``o`` of ``Tr(B_s rho)`` on the Choi state turns
into the coefficient ``alpha_s = o 2^-m`` of ``J = 2^n rho``. Requiring each
expectation to be accurate to ``2^m eps / sqrt(M)`` (``M`` observables) makes
the whole truncated representation accurate to ``eps`` in the normalized
Schatten-2 norm by Parseval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import ChannelSpec, CzLayer, Qac0Circuit, SingleLayer, choi
from .config import check_capacity
from .errors import ArgumentError, InfeasibleError
from .pauli import PauliExpansion, count_low_weight, expand, low_weight_strings, truncate_degree
from .shadows import SHADOW_CONSTANT, ShadowSet, batch_count, collect_shadows, estimate_pauli_batch, estimate_purity, sample_count

DEFAULT_MAX_SAMPLES = 50_000_000
TESTER_GAP_DIVISOR = 7  # sqrt(eps') = (eps2 - eps1) / 7 keeps both sandwich sides clear of the threshold


@dataclass
class LowDegreeHypothesis:
    expansion: PauliExpansion
    D: int
    eps: float
    delta: float
    samples_used: int
    n: int
    m: int
    batches: int = 1
    observable_eps: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        assert self.expansion.degree <= self.D

    def l2_distance(self, other: PauliExpansion) -> float:
        return (self.expansion - other).l2_norm()

    def as_dict(self) -> dict:
        from .pauli import label

        coeffs = [
            {"sigma": label(s), "re": float(np.real(c)), "im": float(np.imag(c))}
            for s, c in sorted(self.expansion.coeffs.items(), key=lambda kv: (sum(1 for x in kv[0] if x), kv[0]))
        ]
        return {
            "D": self.D,
            "eps": self.eps,
            "delta": self.delta,
            "samples_used": self.samples_used,
            "batches": self.batches,
            "observable_eps": self.observable_eps,
            "n": self.n,
            "m": self.m,
            "seed": self.seed,
            "coeffs": coeffs,
        }


def observable_accuracy(eps: float, m: int, n_observables: int, schedule: str = "parseval", D: int = 1, q: int = 1) -> float:
    """Per-expectation accuracy needed for an ``eps``-accurate hypothesis.

    ``parseval``: ``2^m eps / sqrt(M)``. ``conservative``: ``eps^2 / (D q^D)``,
    far stricter and only usable for tiny instances.
    """
    if schedule == "parseval":
        return 2**m * eps / math.sqrt(n_observables)
    if schedule == "conservative":
        return eps**2 / (D * q**D)
    raise ArgumentError(f"unknown accuracy schedule {schedule!r}")


def _check_params(D: int, q: int, eps: float, delta: float) -> None:
    if not 1 <= D <= q:
        raise ArgumentError(f"D must lie in [1, {q}], got {D}")
    if not 0 < eps < 1 or not 0 < delta < 1:
        raise ArgumentError("eps and delta must lie in (0, 1)")


def channel_learn(
    source: ChannelSpec | ShadowSet,
    D: int,
    eps: float,
    delta: float,
    *,
    seed: int = 0,
    n_samples: int | None = None,
    constant: float = SHADOW_CONSTANT,
    schedule: str = "parseval",
    workers: int = 1,
    m: int | None = None,
) -> LowDegreeHypothesis:
    """Learn ``L = sum_{|s| <= D} alpha_s B_s`` with ``||L - J^{<=D}||_2 <= eps`` w.p. ``1 - delta``.

    ``source`` is either a channel (its Choi state is simulated exactly and
    measured) or shadows already collected from a Choi state; in the latter
    case ``(n, m)`` come from ``source.choi_dims`` or the ``m`` argument.
    """
    if isinstance(source, ShadowSet):
        q = source.qubits
        if source.choi_dims is not None:
            n, m = source.choi_dims
        elif m is not None:
            n = q - m
        else:
            raise ArgumentError("shadows need choi_dims or an explicit m")
    else:
        n, m = source.n, source.m
        q = n + m
    check_capacity(q, "Choi state")
    _check_params(D, q, eps, delta)
    observables = list(low_weight_strings(q, D))
    n_obs = len(observables)
    eps_o = observable_accuracy(eps, m, n_obs, schedule, D, q)
    if isinstance(source, ShadowSet):
        shadows = source
        k = min(batch_count(n_obs, delta), len(shadows))
    else:
        if n_samples is None:
            n_samples, k = sample_count(n_obs, D, eps_o, delta, constant)
        else:
            k = min(batch_count(n_obs, delta), n_samples)
        state = choi(source).state
        shadows = collect_shadows(state, n_samples, seed, batches=k, workers=workers, choi_dims=(n, m))
    est = estimate_pauli_batch(shadows, observables, D, batches=k)
    scale = 2.0**-m
    coeffs = {s: complex(v * scale) for s, v in est.items() if v != 0}
    return LowDegreeHypothesis(
        expansion=PauliExpansion(q, coeffs),
        D=D,
        eps=eps,
        delta=delta,
        samples_used=len(shadows),
        n=n,
        m=m,
        batches=k,
        observable_eps=eps_o,
        seed=shadows.seed,
    )


def choi_expansion(spec: ChannelSpec) -> PauliExpansion:
    return expand(choi(spec).representation)


@dataclass
class DegreeSchedule:
    D: int
    raw: float
    kappa: float
    eps_condition_met: bool  # eps >= exp(-n^(2^(-d-2)) / m)
    eps_floor: float

    def as_dict(self) -> dict:
        return {
            "D": self.D,
            "raw": self.raw,
            "kappa": self.kappa,
            "eps_condition_met": self.eps_condition_met,
            "eps_floor": self.eps_floor,
        }


def degree_schedule_report(
    n: int, m: int, a: int, depth: int, eps: float, variant: str = "two_power", kappa: float = 1.0
) -> DegreeSchedule:
    """``ceil(kappa (n+a)^(1-2^-d) m^(2^-d + 1) log2(1/eps)^2)`` clamped to ``[1, n+m]``."""
    if variant != "two_power":
        raise ArgumentError(f"unsupported schedule variant {variant!r}")
    if min(n, m, depth) < 1 or a < 0:
        raise ArgumentError("n, m and depth must be positive, a non-negative")
    if not 0 < eps < 1:
        raise ArgumentError("eps must lie in (0, 1)")
    if kappa <= 0:
        raise ArgumentError("kappa must be positive")
    e = 2.0**-depth
    raw = kappa * (n + a) ** (1 - e) * m ** (e + 1) * math.log2(1 / eps) ** 2
    floor = math.exp(-(n ** (2.0 ** (-depth - 2))) / m)
    return DegreeSchedule(
        D=int(min(max(math.ceil(raw), 1), n + m)),
        raw=raw,
        kappa=kappa,
        eps_condition_met=eps >= floor,
        eps_floor=floor,
    )


def degree_schedule(n: int, m: int, a: int, depth: int, eps: float, variant: str = "two_power", kappa: float = 1.0) -> int:
    return degree_schedule_report(n, m, a, depth, eps, variant, kappa).D


@dataclass
class TolerantVerdict:
    verdict: str  # "close" or "far"
    measured_distance_estimate: float
    threshold: float
    v: float
    l2_of_L: float
    learner_eps: float
    lower: float
    upper: float
    samples_used: int
    purity_mode: str
    true_distance: float | None = None
    hypothesis: LowDegreeHypothesis | None = field(default=None, repr=False)

    def __post_init__(self):
        assert self.verdict in ("close", "far")

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "measured_distance_estimate": self.measured_distance_estimate,
            "threshold": self.threshold,
            "v": self.v,
            "l2_of_L": self.l2_of_L,
            "learner_eps": self.learner_eps,
            "lower": self.lower,
            "upper": self.upper,
            "samples_used": self.samples_used,
            "purity_mode": self.purity_mode,
            "true_distance": self.true_distance,
        }


def choi_norm_from_purity(purity: float, n: int, m: int) -> float:
    """``||J||_2 = sqrt(2^(n-m) Tr(rho^2))``."""
    return math.sqrt(max(purity, 0.0) * 2.0 ** (n - m))


def tolerant_test(
    spec: ChannelSpec,
    D: int,
    eps1: float,
    eps2: float,
    delta: float,
    purity_mode: str = "exact",
    *,
    seed: int = 0,
    max_samples: int = DEFAULT_MAX_SAMPLES,
    constant: float = SHADOW_CONSTANT,
    workers: int = 1,
    oracle: bool = True,
) -> TolerantVerdict:
    """Decide whether the Choi representation is within ``eps1`` of, or ``eps2`` away from, degree ``<= D`` operators.

    The best degree-``D`` approximation is the truncation, so the distance is
    ``sqrt(||J||^2 - ||J^{<=D}||^2)``; it is estimated as ``sqrt(v^2 - ||L||^2)``
    with ``L`` learned to accuracy ``eps' = ((eps2 - eps1) / 7)^2`` and ``v``
    an estimate of ``||J||_2``.
    """
    if not 0 < eps1 < eps2 < 1:
        raise ArgumentError("need 0 < eps1 < eps2 < 1")
    if purity_mode not in ("exact", "sampled"):
        raise ArgumentError(f"unknown purity mode {purity_mode!r}")
    n, m = spec.n, spec.m
    q = n + m
    _check_params(D, q, 0.5, delta)
    ch = choi(spec)
    gap = eps2 - eps1
    eps_learn = (gap / TESTER_GAP_DIVISOR) ** 2
    if purity_mode == "exact":
        v = choi_norm_from_purity(estimate_purity(state=ch.state, exact=True), n, m)
        # keep |sqrt(v^2 - ||L||^2) - distance| under 2 sqrt(eps') even when ||J||_2 > 1
        eps_learn /= max(1.0, v)
    n_obs = count_low_weight(q, D)
    eps_o = observable_accuracy(eps_learn, m, n_obs)
    required, _ = sample_count(n_obs, D, eps_o, delta, constant)
    if required > max_samples:
        raise InfeasibleError(
            f"gap {gap:.3g} needs {required} samples, above the limit {max_samples}", required_samples=required
        )
    hyp = channel_learn(spec, D, eps_learn, delta, seed=seed, constant=constant, workers=workers)
    if purity_mode == "sampled":
        shadows = collect_shadows(ch.state, hyp.samples_used, seed + 1, workers=workers)
        v = choi_norm_from_purity(estimate_purity(shadows), n, m)
    l2 = hyp.expansion.l2_norm()
    est = math.sqrt(max(0.0, v * v - l2 * l2))
    threshold = (eps1 + eps2) / 2
    root = math.sqrt(eps_learn)
    true = None
    if oracle:
        j = expand(ch.representation)
        true = (j - truncate_degree(j, D)).l2_norm()
    return TolerantVerdict(
        verdict="far" if est > threshold else "close",
        measured_distance_estimate=est,
        threshold=threshold,
        v=v,
        l2_of_L=l2,
        learner_eps=eps_learn,
        lower=est - 2 * root,
        upper=est + 3 * root,
        samples_used=hyp.samples_used,
        purity_mode=purity_mode,
        true_distance=true,
        hypothesis=hyp,
    )


_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def depolarizing_channel(p: float) -> ChannelSpec:
    """``rho -> p rho + (1 - p) I/2`` on one qubit as a circuit with two prepared ancillas.

    The ancillas hold ``sum_k sqrt(w_k) |k>`` and select ``X^a1 Z^a2`` through a
    CNOT (Hadamard-conjugated CZ) and a CZ. Its Choi representation is
    ``I/2 + (p/2)(XX - YY + ZZ)``, at distance ``p sqrt(3)/2`` from degree 1.
    """
    if not 0 <= p <= 1:
        raise ArgumentError("p must lie in [0, 1]")
    lam = 1 - p
    w = np.array([1 - 3 * lam / 4, lam / 4, lam / 4, lam / 4])
    layers = (
        SingleLayer({0: _H}),
        CzLayer(((0, 1),)),
        SingleLayer({0: _H}),
        CzLayer(((0, 2),)),
    )
    return ChannelSpec(Qac0Circuit(1, 2, layers, np.sqrt(w).astype(complex)), (0,))

