"""The bounded toy process ``X_t = X_{t-1} + N_t / (t+1)``.

The noise has conditional mean ``-X_{t-1}`` and conditional variance at most
``X_{t-1} / t``. We realise it as ``N = -x + xi`` with ``xi = +-c`` equiprobable,
where ``c = min{sqrt(x/s), s x, 1 - x}`` and ``s`` is the new step index. The
three clamps give the variance bound, ``x >= 0`` and ``x <= 1`` respectively.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

DEFAULT_X0 = 0.1


@dataclass(frozen=True)
class ToyState:
    x: float
    t: int = 0

    def __post_init__(self):
        if not 0.0 <= self.x <= 1.0:
            raise ValueError(f"toy state must lie in [0, 1], got {self.x}")
        if self.t < 0:
            raise ValueError("step index must be non-negative")


def noise_scale(x: float, s: int) -> float:
    """Half-width ``c`` of the two-point noise when stepping to index ``s``."""
    return min(math.sqrt(x / s), s * x, 1.0 - x)


def apply_noise(x: float, t: int, sign: float) -> tuple[float, float]:
    """Deterministic step from index ``t`` with ``xi = sign * c``; returns ``(x', N)``."""
    s = t + 1
    c = noise_scale(x, s)
    noise = -x + sign * c
    x_new = x + noise / (s + 1)
    return min(max(x_new, 0.0), 1.0), noise


def toy_step(state: ToyState, rng: np.random.Generator) -> tuple[ToyState, float]:
    sign = 1.0 if rng.random() < 0.5 else -1.0
    x_new, noise = apply_noise(state.x, state.t, sign)
    return ToyState(x_new, state.t + 1), noise


def toy_bound(t: int, delta: float) -> float:
    """``10 log(1/delta) / t``."""
    if t < 1:
        raise ValueError("t must be at least 1")
    return 10.0 * math.log(1.0 / delta) / t


@numba.njit(cache=True, nogil=True)
def _toy_path(x0, signs):
    T = signs.shape[0]
    path = np.empty(T + 1)
    path[0] = x0
    x = x0
    for t in range(T):
        s = t + 1
        c = min(math.sqrt(x / s), s * x, 1.0 - x)
        x = x + (-x + signs[t] * c) / (s + 1)
        x = min(max(x, 0.0), 1.0)
        path[t + 1] = x
    return path


def simulate(x0: float, horizon: int, rng: np.random.Generator) -> np.ndarray:
    """Path ``X_0, ..., X_T`` driven by ``horizon`` fair signs from ``rng``."""
    signs = np.where(rng.random(horizon) < 0.5, 1.0, -1.0)
    return _toy_path(float(x0), signs)


def simulate_reference(x0: float, signs) -> np.ndarray:
    """Pure-Python path for the same signs; used to cross-check the compiled kernel."""
    state = ToyState(float(x0))
    out = [state.x]
    for sign in signs:
        x_new, _ = apply_noise(state.x, state.t, float(sign))
        state = ToyState(x_new, state.t + 1)
        out.append(state.x)
    return np.array(out)
