"""Completely asymmetric stable laws and the explicit limit-law constants.

Sampling uses the Chambers-Mallows-Stuck construction in the
Samorodnitsky-Taqqu parameterization, matching characteristic functions

    E exp(it S_kappa) = exp[-|t|^kappa (1 - i sgn(t) tan(pi kappa / 2))],
    E exp(it C_8)     = exp[-8 (|t| + i t (2/pi) log|t|)],

i.e. S_kappa(1, 1, 0) for index kappa in (0,1) and S_1(8, 1, 0) for the
index-1 case (which needs the logarithmic location correction when scaled).
Stable parameterizations are the classic silent-bug source, so the numeric
characteristic-function bridge is kept as a permanent regression test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "StableSpec",
    "ConstantsBundle",
    "sample_stable_ca",
    "sample_cauchy8_ca",
    "constants",
    "t_pm",
    "stable_laplace",
]


@dataclass(frozen=True)
class StableSpec:
    """Parameters of a completely asymmetric stable law (skew fixed at +1)."""

    index: float
    scale: float
    skew: float = 1.0
    shift: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 < self.index <= 1.0):
            raise ValueError("index must lie in (0, 1]")
        if self.skew != 1.0:
            raise ValueError("only skew +1 is supported")
        if not (self.scale > 0.0):
            raise ValueError("scale must be positive")


@dataclass(frozen=True)
class ConstantsBundle:
    """Closed-form constants attached to one value of kappa.

    lam = 4(1+kappa), alpha_kappa = 1/(4+2 kappa), c5 = 2 (lam/kappa)^delta1.
    psi, c2, c22 are only defined for kappa in (0,1) (psi also at kappa in
    [1,2)) and are None outside their domain.
    """

    kappa: float
    lam: float
    alpha_kappa: float
    psi: Optional[float]
    c2: Optional[float]
    c4: Optional[float]
    c22: Optional[float]
    delta1: float
    c5: float


def sample_stable_ca(
    kappa: float, rng: np.random.Generator, size: Optional[int] = None
):
    """Draw from the positive completely asymmetric stable law of index
    kappa in (0,1), unit scale, zero shift."""
    if not (0.0 < kappa < 1.0):
        raise ValueError("kappa must lie in (0, 1)")
    n = 1 if size is None else int(size)
    u = math.pi * (rng.random(n) - 0.5)
    w = rng.standard_exponential(n)
    # CMS with skew 1: theta0 = pi/2, prefactor cos(pi kappa/2)^(-1/kappa)
    pref = math.cos(0.5 * math.pi * kappa) ** (-1.0 / kappa)
    s = (
        pref
        * np.sin(kappa * (u + 0.5 * math.pi))
        / np.cos(u) ** (1.0 / kappa)
        * (np.cos(u - kappa * (u + 0.5 * math.pi)) / w) ** ((1.0 - kappa) / kappa)
    )
    return float(s[0]) if size is None else s


def sample_cauchy8_ca(rng: np.random.Generator, size: Optional[int] = None):
    """Draw from the completely asymmetric Cauchy law of parameter 8.

    The unit draw is scaled by 8 and shifted by (16/pi) log 8, the index-1
    logarithmic location correction, so the characteristic function is
    exp[-8(|t| + i t (2/pi) log|t|)] exactly.
    """
    n = 1 if size is None else int(size)
    u = math.pi * (rng.random(n) - 0.5)
    w = rng.standard_exponential(n)
    half_pi = 0.5 * math.pi
    x1 = (2.0 / math.pi) * (
        (half_pi + u) * np.tan(u) - np.log(half_pi * w * np.cos(u) / (half_pi + u))
    )
    c = 8.0 * x1 + (16.0 / math.pi) * math.log(8.0)
    return float(c[0]) if size is None else c


def constants(kappa: float, delta1: float = 0.05) -> ConstantsBundle:
    """Evaluate the closed-form constants at one kappa.

    c2 and c22 exist only for kappa in (0,1); psi additionally up to
    kappa < 2. Restricted entries are None outside their domain.
    """
    if not (kappa > 0.0) or not math.isfinite(kappa):
        raise ValueError("kappa must be positive and finite")
    if not (delta1 > 0.0):
        raise ValueError("delta1 must be positive")
    lam = 4.0 * (1.0 + kappa)
    alpha_kappa = 1.0 / (4.0 + 2.0 * kappa)
    c5 = 2.0 * (lam / kappa) ** delta1

    psi: Optional[float] = None
    if kappa < 2.0:
        psi = (
            math.pi
            * kappa
            / (4.0 * math.gamma(kappa) ** 2 * math.sin(0.5 * math.pi * kappa))
        ) ** (1.0 / kappa)

    c2 = c4 = c22 = None
    if kappa < 1.0:
        c22 = (
            (1.0 - kappa)
            * kappa ** (kappa / (1.0 - kappa))
            * math.cos(0.5 * math.pi * kappa) ** (-1.0 / (1.0 - kappa))
        )
        c2 = 8.0 * psi * c22 ** ((1.0 - kappa) / kappa)
        c4 = 8.0 * psi * (lam / kappa) ** (1.0 / kappa)
    elif kappa == 1.0:
        c4 = 8.0 * psi * lam  # (lam/kappa)^(1/kappa) at kappa = 1

    return ConstantsBundle(
        kappa=kappa,
        lam=lam,
        alpha_kappa=alpha_kappa,
        psi=psi,
        c2=c2,
        c4=c4,
        c22=c22,
        delta1=delta1,
        c5=c5,
    )


def t_pm(bundle: ConstantsBundle, r: float, sign: int) -> float:
    """Bracket times t_(+-)(r) = kappa (1 +- c5 r^(-delta1)) r / lambda."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if not (r > 0.0):
        raise ValueError("r must be positive")
    t = bundle.kappa * (1.0 + sign * bundle.c5 * r**-bundle.delta1) * r / bundle.lam
    if t <= 0.0:
        raise ValueError(
            "t_minus is nonpositive: r^delta1 must exceed c5 for this bracket"
        )
    return float(t)


def stable_laplace(kappa: float, t: float) -> float:
    """E exp(-t S_kappa) = exp[-t^kappa / cos(pi kappa / 2)] for t >= 0."""
    if not (0.0 < kappa < 1.0):
        raise ValueError("kappa must lie in (0, 1)")
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        return 1.0
    return math.exp(-(t**kappa) / math.cos(0.5 * math.pi * kappa))
