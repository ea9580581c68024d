"""Moore-Spiegel oscillator integrated with classical RK4."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _accel

R_DEFAULT = 10.0
GAMMA_DEFAULT = 3.6


class DivergenceError(ArithmeticError):
    def __init__(self, step):
        super().__init__(f"trajectory became non-finite at step {step}")
        self.step = step


@dataclass(frozen=True)
class MooreSpiegelState:
    x: float
    y: float
    z: float
    R: float = R_DEFAULT
    gamma: float = GAMMA_DEFAULT

    def __post_init__(self):
        if not np.all(np.isfinite([self.x, self.y, self.z, self.R, self.gamma])):
            raise ValueError("state and parameters must be finite")

    def as_array(self):
        return np.array([self.x, self.y, self.z])


def derivatives(state: MooreSpiegelState):
    x, y, z, R, G = state.x, state.y, state.z, state.R, state.gamma
    return y, -y + R * x - G * (x + z) - R * x * z * z, x


def _check_dt(dt):
    if not 0.0 < dt <= 0.05:
        raise ValueError("dt must lie in (0, 0.05]")


def ms_trajectory(state0: MooreSpiegelState, dt: float, steps: int) -> np.ndarray:
    """States at steps 0..steps as an array of shape (steps + 1, 3)."""
    _check_dt(dt)
    out, bad = _accel.ms_trajectory(state0.x, state0.y, state0.z, state0.R, state0.gamma,
                                    float(dt), int(steps))
    if bad >= 0:
        raise DivergenceError(bad)
    return out


def ms_step(state: MooreSpiegelState, dt: float) -> MooreSpiegelState:
    x, y, z = ms_trajectory(state, dt, 1)[-1]
    return MooreSpiegelState(float(x), float(y), float(z), state.R, state.gamma)


def ms_ensemble(states, R, gamma, dt, steps) -> np.ndarray:
    """Advance many states (n, 3) by ``steps`` RK4 steps each."""
    _check_dt(dt)
    out = _accel.ms_ensemble(np.ascontiguousarray(states, dtype=float), float(R), float(gamma),
                             float(dt), int(steps))
    bad = ~np.all(np.isfinite(out), axis=1)
    if np.any(bad):
        raise DivergenceError(int(steps))
    return out
