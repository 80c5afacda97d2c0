"""Monte-Carlo trainability experiments and their closed-form counterparts."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .data import SyntheticSpec, generate_class_image
from .encoding import build_sampling, encode
from .errors import ConfigError, RotiqError
from .model import ModelConfig, build_circuit
from .pauli import predicted_moments
from .sim import Circuit, run, shift_rule_occurrences, z_expectations

# fitted log2-variance slope per qubit below which a curve counts as exponentially decaying
DECAY_SLOPE = -0.2
# purity decay slower than 2^-n passes when its fitted log2 slope is >= -1 - this
PURITY_SLOPE_TOL = 0.05
# closed-form moments need the full semisimple basis; keep the radial register small
PREDICTION_NRAD_CAP = 5
_SAMPLE_CHUNK = 256

ParamSampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class AssignmentRule:
    """Maps a total qubit count ``n`` to a radial register size.

    ``fixed`` keeps ``n_rad = k``; ``prop`` uses ``round(ratio * n)``; ``log``
    uses ``floor(c * log2 n)``.  Results are clamped to ``[1, n - 1]``.
    """
    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("fixed", "prop", "log"):
            raise ConfigError(f"unknown assignment rule {self.kind!r}")
        if self.value <= 0:
            raise ConfigError("assignment rule parameter must be positive")
        if self.kind == "fixed" and int(self.value) != self.value:
            raise ConfigError("fixed rule needs an integer radial size")

    @classmethod
    def parse(cls, text: str) -> "AssignmentRule":
        kind, sep, value = text.partition(":")
        if not sep:
            raise ConfigError(f"rule {text!r} is not of the form kind:value")
        try:
            return cls(kind.strip().lower(), float(value))
        except ValueError:
            raise ConfigError(f"rule parameter {value!r} is not a number") from None

    def __str__(self) -> str:
        v = int(self.value) if self.value == int(self.value) else self.value
        return f"{self.kind}:{v}"

    def n_rad(self, n: int) -> int:
        if self.kind == "fixed":
            raw = int(self.value)
        elif self.kind == "prop":
            raw = int(math.floor(self.value * n + 0.5))
        else:
            raw = int(math.floor(self.value * math.log2(n)))
        return min(max(raw, 1), n - 1)


@dataclass(frozen=True)
class BPScanConfig:
    qubits: tuple[int, ...]
    rule: AssignmentRule
    layers: int = 32
    samples: int = 1000
    seed: int = 0
    input_state: str = "image"  # "image", "zero" or "plus"

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(n) for n in self.qubits))
        if isinstance(self.rule, str):
            object.__setattr__(self, "rule", AssignmentRule.parse(self.rule))
        if not self.qubits:
            raise ConfigError("scan needs at least one qubit count")
        if min(self.qubits) < 2:
            raise ConfigError("every qubit count must be at least 2")
        for n in self.qubits:
            r = self.rule.n_rad(n)
            if not 1 <= r < n:
                raise ConfigError(f"rule {self.rule} gives n_rad={r} for n={n}")
        if self.layers < 1:
            raise ConfigError("layers must be at least 1")
        if self.samples < 2:
            raise ConfigError("variance needs at least two samples")
        if self.input_state not in ("image", "zero", "plus"):
            raise ConfigError(f"unknown input state {self.input_state!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["qubits"] = list(self.qubits)
        d["rule"] = str(self.rule)
        return d


@dataclass(frozen=True)
class VarianceRow:
    n: int
    n_rad: int
    mean: float
    variance: float
    mean_se: float
    variance_se: float
    predicted_variance: float
    samples: int


@dataclass
class VarianceReport:
    rows: list[VarianceRow] = field(default_factory=list)

    @property
    def slope(self) -> float:
        """Least-squares slope of ``log2(variance)`` against ``n``."""
        return log2_slope([r.n for r in self.rows], [r.variance for r in self.rows])

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "n_rad", "mean", "variance", "mean_se", "variance_se",
                        "predicted_variance", "samples"])
            for r in self.rows:
                w.writerow([r.n, r.n_rad, _g(r.mean), _g(r.variance), _g(r.mean_se),
                            _g(r.variance_se), _g(r.predicted_variance), r.samples])


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    samples: int


def _g(x: float) -> str:
    return format(float(x), ".17g")


def log2_slope(ns: Sequence[float], values: Sequence[float]) -> float:
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(ns) < 2:
        raise RotiqError("a slope needs at least two points")
    if np.any(values <= 0):
        return -math.inf
    return float(np.polyfit(ns, np.log2(values), 1)[0])


def sample_moments(values: np.ndarray) -> MomentEstimate:
    """Mean and unbiased variance with their standard errors.

    The variance error uses the fourth central moment, so it stays honest for
    the heavy-tailed or bounded distributions circuit outputs produce.
    """
    x = np.asarray(values, dtype=float).ravel()
    s = len(x)
    if s < 2:
        raise RotiqError("variance needs at least two samples")
    mean = float(x.mean())
    var = float(x.var(ddof=1))
    m4 = float(np.mean((x - mean) ** 4))
    var_se = math.sqrt(max(m4 - var ** 2 * (s - 3) / (s - 1), 0.0) / s)
    return MomentEstimate(mean, math.sqrt(var / s), var, var_se, s)


def uniform_angles(rng: np.random.Generator, n_params: int) -> np.ndarray:
    return rng.uniform(0.0, 2 * np.pi, size=n_params)


def _param_batch(n_params: int, samples: int, seed: int, tag: int,
                 sampler: ParamSampler) -> np.ndarray:
    # one substream per sample keeps results independent of chunking
    return np.stack([sampler(np.random.default_rng([seed, tag, i]), n_params)
                     for i in range(samples)])


def reference_image(seed: int = 0, size: int = 32):
    """Class-1 synthetic image used as the default scan input."""
    spec = SyntheticSpec(width=size, height=size, seed=seed)
    rng = np.random.default_rng([seed, 0])
    return generate_class_image(1, spec, rng.uniform(0.0, 2 * np.pi), rng)


def input_state(kind: str, n_rad: int, n_orb: int, seed: int = 0) -> np.ndarray:
    n = n_rad + n_orb
    if kind == "zero":
        psi = np.zeros(1 << n, dtype=complex)
        psi[0] = 1.0
        return psi
    if kind == "plus":
        return np.full(1 << n, (1 << n) ** -0.5, dtype=complex)
    if kind == "image":
        image = reference_image(seed)
        return encode(image, build_sampling(n_rad, n_orb, image.width, image.height))
    raise ConfigError(f"unknown input state {kind!r}")


def loss_gradient_samples(circuit: Circuit, state: np.ndarray, params: np.ndarray,
                          slot: int, y: int = 1) -> np.ndarray:
    """``d(-<Z_y>)/d theta_slot`` for each row of ``params``."""
    occ = np.flatnonzero(circuit.slots == slot)
    if occ.size == 0:
        raise RotiqError(f"slot {slot} is not used by the circuit")
    out = np.empty(len(params))
    for lo in range(0, len(params), _SAMPLE_CHUNK):
        chunk = params[lo:lo + _SAMPLE_CHUNK]
        per = shift_rule_occurrences(circuit, state, chunk,
                                     lambda s: z_expectations(s, [y - 1])[..., 0], occurrences=occ)
        out[lo:lo + _SAMPLE_CHUNK] = -per.sum(axis=0)
    return out


def gradient_variance_scan(config: BPScanConfig, sampler: ParamSampler = uniform_angles,
                           progress: Callable[[VarianceRow], None] | None = None) -> VarianceReport:
    """Spread of the middle-slot loss derivative over random parameters, per qubit count.

    The closed-form prediction covers the loss, not its derivative, so
    ``predicted_variance`` is left as NaN in these rows.
    """
    report = VarianceReport()
    for n in config.qubits:
        n_rad = config.rule.n_rad(n)
        model = ModelConfig(n_rad, n - n_rad, config.layers, seed=config.seed)
        circuit = build_circuit(model)
        state = input_state(config.input_state, n_rad, n - n_rad, config.seed)
        params = _param_batch(model.n_params, config.samples, config.seed, n, sampler)
        grads = loss_gradient_samples(circuit, state, params, model.n_params // 2)
        est = sample_moments(grads)
        row = VarianceRow(n, n_rad, est.mean, est.variance, est.mean_se, est.variance_se,
                          math.nan, config.samples)
        report.rows.append(row)
        if progress is not None:
            progress(row)
    return report


def loss_samples(config: ModelConfig, state: np.ndarray, y: int, samples: int, seed: int,
                 sampler: ParamSampler = uniform_angles) -> np.ndarray:
    circuit = build_circuit(config)
    params = _param_batch(config.n_params, samples, seed, 0, sampler)
    out = np.empty(samples)
    for lo in range(0, samples, _SAMPLE_CHUNK):
        final = run(circuit, state, params[lo:lo + _SAMPLE_CHUNK])
        out[lo:lo + _SAMPLE_CHUNK] = -z_expectations(final, [y - 1])[..., 0]
    return out


def estimate_loss_moments(config: ModelConfig, state: np.ndarray, y: int, samples: int,
                          seed: int, sampler: ParamSampler = uniform_angles) -> MomentEstimate:
    """Monte-Carlo mean and variance of ``-<Z_y>`` over random parameters."""
    if samples < 2:
        raise RotiqError("moment estimation needs at least two samples")
    if not 1 <= y <= config.n_qubits:
        raise RotiqError(f"class {y} outside 1..{config.n_qubits}")
    return sample_moments(loss_samples(config, state, y, samples, seed, sampler))


@dataclass(frozen=True)
class FormulaRow:
    label: str
    n: int
    n_rad: int
    n_orb: int
    semisimple_purity: float
    predicted_variance: float
    printed_form_variance: float  # 2^{n-1} / 4^{n_rad-1} * purity, the uncorrected prefactor
    purity_bounded: bool


@dataclass
class FormulaReport:
    rows: list[FormulaRow] = field(default_factory=list)

    def slope(self, label: str | None = None) -> float:
        rows = [r for r in self.rows if label is None or r.label == label]
        return log2_slope([r.n for r in rows], [r.predicted_variance for r in rows])

    def decays_exponentially(self, label: str | None = None) -> bool:
        return self.slope(label) < DECAY_SLOPE

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["label", "n", "n_rad", "n_orb", "semisimple_purity", "predicted_variance",
                        "printed_form_variance", "purity_bounded"])
            for r in self.rows:
                w.writerow([r.label, r.n, r.n_rad, r.n_orb, _g(r.semisimple_purity),
                            _g(r.predicted_variance), _g(r.printed_form_variance),
                            str(r.purity_bounded).lower()])


def variance_formula_report(sizes: Iterable[tuple[int, int]],
                            family: dict[str, Callable[[int, int], np.ndarray]]) -> FormulaReport:
    """Closed-form loss variance for each input family over ``(n_rad, n_orb)`` sizes."""
    report = FormulaReport()
    for label, make in family.items():
        for n_rad, n_orb in sizes:
            if n_rad > PREDICTION_NRAD_CAP:
                raise RotiqError(f"n_rad={n_rad} exceeds the closed-form cap {PREDICTION_NRAD_CAP}")
            n = n_rad + n_orb
            pred = predicted_moments(make(n_rad, n_orb), 1, n_rad, n_orb)
            ps = pred.semisimple_purity
            printed = 2.0 ** (n - 1) / 4.0 ** (n_rad - 1) * ps
            report.rows.append(FormulaRow(label, n, n_rad, n_orb, ps, pred.variance, printed,
                                          ps <= 1 + 1e-9))
    return report


def bound_check_purity(points: FormulaReport | Sequence[tuple[int, float]],
                       label: str | None = None) -> bool:
    """True when semisimple purity decays no faster than ``2^-n`` across the points."""
    if isinstance(points, FormulaReport):
        pairs = [(r.n, r.semisimple_purity) for r in points.rows if label is None or r.label == label]
    else:
        pairs = [(int(n), float(p)) for n, p in points]
    if len(pairs) < 3:
        raise RotiqError("purity decay needs at least three points")
    ns, ps = zip(*pairs)
    return log2_slope(ns, ps) >= -1.0 - PURITY_SLOPE_TOL

