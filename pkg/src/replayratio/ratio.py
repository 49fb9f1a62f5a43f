"""Learning-step ratios, the update scheduler and the coupled learning-rate grid."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd

BASE_LR = 5e-5
K_VALUES = (-2, -1, 0, 1, 2)


@dataclass(frozen=True)
class LearnRatio:
    """``updates`` learning updates per ``per_steps`` environment steps.

    ``LearnRatio(4, 1)`` is written 4:1 (four updates every step) and
    ``LearnRatio(1, 4)`` is 1:4 (one update every fourth step). Stored in
    lowest terms.
    """

    updates: int
    per_steps: int = 1

    def __post_init__(self):
        u, s = int(self.updates), int(self.per_steps)
        if u <= 0 or s <= 0:
            raise ValueError(f"ratio terms must be positive, got {u}:{s}")
        g = gcd(u, s)
        object.__setattr__(self, "updates", u // g)
        object.__setattr__(self, "per_steps", s // g)

    @classmethod
    def parse(cls, text: str) -> "LearnRatio":
        parts = str(text).strip().split(":")
        if len(parts) != 2:
            raise ValueError(f"ratio must look like 'u:s', got {text!r}")
        try:
            u, s = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"ratio must look like 'u:s' with integers, got {text!r}") from None
        return cls(u, s)

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.updates, self.per_steps)

    @property
    def value(self) -> float:
        return self.updates / self.per_steps

    def __str__(self) -> str:
        return f"{self.updates}:{self.per_steps}"


def as_ratio(r) -> LearnRatio:
    return r if isinstance(r, LearnRatio) else LearnRatio.parse(r)


def lr_grid(ratio, k_values=K_VALUES) -> list[float]:
    """Five learning rates ``(5e-5 / rho) * 2**k``, ascending in k.

    The centre scales inversely with updates per env step so that the total
    optimizer movement per env step stays roughly fixed across ratios.
    """
    r = as_ratio(ratio)
    return [BASE_LR * r.per_steps / r.updates * 2.0 ** k for k in sorted(k_values)]


def lr_for(ratio, k: int) -> float:
    r = as_ratio(ratio)
    return BASE_LR * r.per_steps / r.updates * 2.0 ** k


def updates_for_step(ratio, accumulator=Fraction(0)) -> tuple[int, Fraction]:
    """Advance the fractional update accumulator by one env step.

    Exact rational arithmetic: any window of ``per_steps`` consecutive calls
    yields exactly ``updates`` updates.
    """
    r = as_ratio(ratio)
    acc = Fraction(accumulator)
    if not 0 <= acc < 1:
        raise ValueError("accumulator must lie in [0, 1)")
    acc += r.fraction
    count = acc.numerator // acc.denominator
    return count, acc - count
