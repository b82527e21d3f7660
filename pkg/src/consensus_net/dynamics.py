"""Disturbance signals and the two closed-loop vector fields.

The simulator always integrates physical per-agent coordinates
``(x, y, delta_hat)``: positions, velocities and the controller's internal
integral states.  Transformed coordinates (velocity offsets, estimate
errors) are derived in the analysis layer, never integrated, so the true
disturbance stays out of the controller path.

Matched loop (disturbance enters the velocity equation):

    x'  = y
    y'  = u + d(t),   u = -gamma1*L x - gamma2*y - gamma3*delta_hat
    dh' = gamma1*L x + gamma4*y

Unmatched loop (disturbance enters the position equation):

    x'  = y + d(t)
    y'  = u,          u = -k_x*L x - k_d*yt - (alpha1*x + nu*yt)
    dh' = -(alpha1*x + nu*yt) / k_s,   yt = y - k_s*delta_hat

In the unmatched loop the integral feedthrough in u equals k_s * dh', so the
scaled state k_s*delta_hat carries the integral action and the closed loop is
invariant to k_s up to that relabeling; the velocity offset yt then obeys
yt' = -k_x*L x - k_d*yt with no disturbance term at all, which is what makes
the weighted-average velocity decay at exactly rate k_d.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .gains import MatchedGains, UnmatchedGains
from .graph import LaplacianData

#: the vanishing disturbance terms share the denominator (12 + t)
HYPERBOLIC_OFFSET = 12.0


@dataclass(frozen=True)
class Segment:
    """One piece of a piecewise disturbance: active from ``t_start`` until the
    next segment starts.

    Value at time t:  base + (c_h + c_e * exp(-r*t)) / (12 + t)  per agent,
    where the scalar vanishing terms are broadcast to every agent.
    """

    t_start: float
    base: np.ndarray
    hyperbolic_coeff: float = 0.0
    exp_coeff: float = 0.0
    exp_rate: float = 0.0

    def __post_init__(self):
        base = np.array(self.base, dtype=float)
        if base.ndim != 1:
            raise ValidationError(f"segment base: expected a vector, got shape {base.shape}")
        base.setflags(write=False)
        object.__setattr__(self, "base", base)

    def value(self, t: float) -> np.ndarray:
        scalar = (self.hyperbolic_coeff + self.exp_coeff * np.exp(-self.exp_rate * t)) \
            / (HYPERBOLIC_OFFSET + t)
        return self.base + scalar


@dataclass(frozen=True)
class DisturbanceProfile:
    """Ordered disturbance segments; evaluation is right-continuous at the
    switch times."""

    segments: tuple

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValidationError("disturbance: needs at least one segment")
        if segs[0].t_start != 0.0:
            raise ValidationError(f"segments[0].t_start: must be 0, got {segs[0].t_start}")
        n = segs[0].base.shape[0]
        for k, seg in enumerate(segs):
            if seg.base.shape[0] != n:
                raise ValidationError(f"segments[{k}].base: expected length {n}, got {seg.base.shape[0]}")
            if k > 0 and not seg.t_start > segs[k - 1].t_start:
                raise ValidationError(f"segments[{k}].t_start: start times must strictly increase")
        object.__setattr__(self, "segments", segs)

    @property
    def n_agents(self) -> int:
        return self.segments[0].base.shape[0]

    @property
    def switch_times(self) -> tuple:
        return tuple(seg.t_start for seg in self.segments[1:])

    @classmethod
    def constant(cls, d) -> "DisturbanceProfile":
        return cls((Segment(0.0, np.asarray(d, dtype=float)),))

    def segment_index(self, t: float, side: str = "right") -> int:
        """Index of the segment active at t; ``side='left'`` gives the
        segment just before a switch time instead."""
        idx = 0
        for k, seg in enumerate(self.segments):
            if side == "right":
                if t >= seg.t_start:
                    idx = k
            else:
                if t > seg.t_start:
                    idx = k
        return idx


def eval_disturbance(profile: DisturbanceProfile, t: float, side: str = "right") -> np.ndarray:
    """Disturbance vector at time t (right-continuous at switches)."""
    if t < 0:
        raise ValidationError(f"t: must be >= 0, got {t}")
    return profile.segments[profile.segment_index(t, side)].value(t)


def profile_to_json(profile: DisturbanceProfile) -> dict:
    return {
        "segments": [
            {
                "t_start": seg.t_start,
                "base": [float(x) for x in seg.base],
                "hyperbolic_coeff": seg.hyperbolic_coeff,
                "exp_coeff": seg.exp_coeff,
                "exp_rate": seg.exp_rate,
            }
            for seg in profile.segments
        ]
    }


def profile_from_json(doc: dict) -> DisturbanceProfile:
    if not isinstance(doc, dict) or "segments" not in doc:
        raise ValidationError("disturbance: expected an object with a 'segments' list")
    segs = []
    for k, s in enumerate(doc["segments"]):
        try:
            segs.append(Segment(
                t_start=float(s["t_start"]),
                base=np.asarray(s["base"], dtype=float),
                hyperbolic_coeff=float(s.get("hyperbolic_coeff", 0.0)),
                exp_coeff=float(s.get("exp_coeff", 0.0)),
                exp_rate=float(s.get("exp_rate", 0.0)),
            ))
        except (KeyError, TypeError, ValueError):
            raise ValidationError(f"disturbance.segments[{k}]: needs 't_start' and a numeric 'base' vector") from None
    return DisturbanceProfile(tuple(segs))


@dataclass
class SimState:
    """Per-agent stacked state at one time instant."""

    x: np.ndarray
    y: np.ndarray
    delta_hat: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.delta_hat = np.asarray(self.delta_hat, dtype=float)
        n = self.x.shape[0]
        if self.y.shape[0] != n or self.delta_hat.shape[0] != n:
            raise ValidationError("SimState: x, y, delta_hat must have equal length")

    @property
    def n_agents(self) -> int:
        return self.x.shape[0]

    def pack(self) -> np.ndarray:
        return np.concatenate([self.x, self.y, self.delta_hat])

    @classmethod
    def unpack(cls, z: np.ndarray, t: float = 0.0) -> "SimState":
        n = z.shape[0] // 3
        return cls(z[:n].copy(), z[n:2 * n].copy(), z[2 * n:].copy(), t)


def _check_dims(state: SimState, lap: LaplacianData):
    if state.n_agents != lap.n_agents:
        raise ValidationError(
            f"state has {state.n_agents} agents but Laplacian is {lap.n_agents}x{lap.n_agents}")


def matched_control(state: SimState, g: MatchedGains, lap: LaplacianData) -> np.ndarray:
    """u = -gamma1*L x - gamma2*y - gamma3*delta_hat."""
    _check_dims(state, lap)
    return -g.gamma1 * (lap.L @ state.x) - g.gamma2 * state.y - g.gamma3 * state.delta_hat


def matched_field(state: SimState, g: MatchedGains, lap: LaplacianData,
                  p: DisturbanceProfile) -> SimState:
    """Time derivative of the matched closed loop at the state's time."""
    _check_dims(state, lap)
    lx = lap.L @ state.x
    d = eval_disturbance(p, state.t)
    u = -g.gamma1 * lx - g.gamma2 * state.y - g.gamma3 * state.delta_hat
    return SimState(
        x=state.y.copy(),
        y=u + d,
        delta_hat=g.gamma1 * lx + g.gamma4 * state.y,
        t=state.t,
    )


def unmatched_control(state: SimState, g: UnmatchedGains, lap: LaplacianData) -> np.ndarray:
    """u = -k_x*L x - k_d*yt - (alpha1*x + nu*yt) with yt = y - k_s*delta_hat."""
    _check_dims(state, lap)
    yt = state.y - g.k_s * state.delta_hat
    return -g.k_x * (lap.L @ state.x) - g.k_d * yt - (g.alpha1 * state.x + g.nu * yt)


def unmatched_field(state: SimState, g: UnmatchedGains, lap: LaplacianData,
                    p: DisturbanceProfile) -> SimState:
    """Time derivative of the unmatched closed loop at the state's time."""
    _check_dims(state, lap)
    yt = state.y - g.k_s * state.delta_hat
    drive = g.alpha1 * state.x + g.nu * yt
    u = -g.k_x * (lap.L @ state.x) - g.k_d * yt - drive
    d = eval_disturbance(p, state.t)
    return SimState(
        x=state.y + d,
        y=u,
        delta_hat=-drive / g.k_s,
        t=state.t,
    )


@dataclass(frozen=True)
class MatchedLoop:
    """Matched closed loop bundled for the integrator."""

    gains: MatchedGains
    lap: LaplacianData
    profile: DisturbanceProfile

    mode = "matched"

    def __post_init__(self):
        if self.profile.n_agents != self.lap.n_agents:
            raise ValidationError(
                f"disturbance has {self.profile.n_agents} agents but graph has {self.lap.n_agents}")

    @property
    def n_agents(self) -> int:
        return self.lap.n_agents

    def field(self, t: float, z: np.ndarray) -> np.ndarray:
        state = SimState.unpack(z, t)
        return matched_field(state, self.gains, self.lap, self.profile).pack()


@dataclass(frozen=True)
class UnmatchedLoop:
    """Unmatched closed loop bundled for the integrator."""

    gains: UnmatchedGains
    lap: LaplacianData
    profile: DisturbanceProfile

    mode = "unmatched"

    def __post_init__(self):
        if self.profile.n_agents != self.lap.n_agents:
            raise ValidationError(
                f"disturbance has {self.profile.n_agents} agents but graph has {self.lap.n_agents}")

    @property
    def n_agents(self) -> int:
        return self.lap.n_agents

    def field(self, t: float, z: np.ndarray) -> np.ndarray:
        state = SimState.unpack(z, t)
        return unmatched_field(state, self.gains, self.lap, self.profile).pack()
