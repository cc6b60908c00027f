"""Randomness contract, privacy budgets, and the Laplace / Gaussian mechanisms.

All randomness flows through explicitly passed ``numpy.random.Generator``
objects backed by the counter-based Philox bit generator.  Independent
streams are derived from a master seed and an integer path with
:func:`derive_rng`, so parallel sweeps stay reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


def make_rng(seed: int) -> np.random.Generator:
    """Philox-backed generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Independent stream for ``(seed, path...)``; the documented split function."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def split_rng(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    """``count`` child streams of ``rng`` (consumes no draws from it)."""
    return [np.random.Generator(np.random.Philox(s)) for s in rng.bit_generator.seed_seq.spawn(count)]


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not (self.epsilon > 0) or math.isinf(self.epsilon):
            raise ParameterError(f"epsilon must be a positive finite number, got {self.epsilon}")
        if not (0 <= self.delta < 1):
            raise ParameterError(f"delta must lie in [0, 1), got {self.delta}")

    def scaled(self, factor: float) -> "PrivacyBudget":
        return PrivacyBudget(self.epsilon * factor, self.delta * factor)


@dataclass
class BudgetLedger:
    """Basic sequential composition: spends add up and may not exceed the total."""

    total: PrivacyBudget
    entries: list[tuple[str, PrivacyBudget]] = field(default_factory=list)
    tol: float = 1e-12

    @property
    def spent_epsilon(self) -> float:
        return math.fsum(b.epsilon for _, b in self.entries)

    @property
    def spent_delta(self) -> float:
        return math.fsum(b.delta for _, b in self.entries)

    def spend(self, label: str, budget: PrivacyBudget) -> PrivacyBudget:
        eps = self.spent_epsilon + budget.epsilon
        dlt = self.spent_delta + budget.delta
        if eps > self.total.epsilon * (1 + self.tol) or dlt > self.total.delta * (1 + self.tol) + self.tol:
            raise ParameterError(
                f"spending {budget} for {label!r} exceeds declared budget {self.total} "
                f"(already spent eps={self.spent_epsilon:g}, delta={self.spent_delta:g})"
            )
        self.entries.append((label, budget))
        return budget


def _open_uniform(rng: np.random.Generator, size):
    # Uniform on the open interval (0, 1) with 53-bit resolution.
    return (rng.integers(0, 1 << 53, size=size, dtype=np.int64) + 0.5) / float(1 << 53)


def sample_laplace(scale: float, rng: np.random.Generator, size=None):
    """Laplace(0, scale) draws by inverse CDF, one open-interval uniform per draw."""
    if not (scale > 0):
        raise ParameterError(f"Laplace scale must be positive, got {scale}")
    u = _open_uniform(rng, size)
    x = np.where(u < 0.5, scale * np.log(2.0 * u), -scale * np.log(2.0 - 2.0 * u))
    return float(x) if size is None else x


def gaussian_sigma(sensitivity: float, budget: PrivacyBudget) -> float:
    """Noise scale ``(S / eps) * sqrt(2 ln(1.25 / delta))`` of the classical Gaussian mechanism."""
    if not (sensitivity > 0):
        raise ParameterError(f"sensitivity must be positive, got {sensitivity}")
    if budget.delta <= 0:
        raise ParameterError("the Gaussian mechanism requires delta > 0")
    return sensitivity / budget.epsilon * math.sqrt(2.0 * math.log(1.25 / budget.delta))


def gaussian_mechanism(x, sensitivity: float, budget: PrivacyBudget, rng: np.random.Generator) -> np.ndarray:
    """Release ``x + N`` with i.i.d. Gaussian noise calibrated to L2 ``sensitivity``."""
    x = np.asarray(x, dtype=np.float64)
    sigma = gaussian_sigma(sensitivity, budget)
    return x + sigma * rng.standard_normal(x.shape)
