"""Deterministic, reward-free simulated tasks.

Ball-In-Cup
    The cup is a kinematic point driven by velocity commands; the ball is a
    point mass on an inextensible string that only acts when taut.  State is
    ``[ball - cup (3), ball velocity (3)]``.

Redundant Arm
    A planar 20-link chain with first-order joint dynamics
    ``q' = q + gain * torque * dt``.  State is ``[q (20), end-effector x, y]``.
    Episodes stop on joint limits, self-collision and (walls variant only)
    wall contact.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, ShapeError, UsageError

ENV_NAMES = ("ball_in_cup", "redundant_arm", "redundant_arm_no_walls")
TERMINATION_REASONS = ("none", "wall_collision", "self_collision", "joint_limit")

GRAVITY = 9.81
STRING_LENGTH = 0.3
BALL_MASS = 0.05
CUP_SPEED = 1.0
BIC_VELOCITY_BOUND = 8.0

N_LINKS = 20
LINK_LENGTH = 0.05
JOINT_GAIN = 1.0
JOINT_LIMIT = np.pi / 2

# (x0, y0, x1, y1).  Two long walls flank the zero pose, which lies on
# [0, 1] x {0}, and two short ones guard the region behind the base.
WALLS = np.array([
    [0.30, 0.70, 1.00, 0.70],
    [0.30, -0.70, 1.00, -0.70],
    [-0.60, 0.30, -0.20, 0.30],
    [-0.60, -0.30, -0.20, -0.30],
])


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    horizon: int
    action_low: np.ndarray
    action_high: np.ndarray
    outcome_dims: tuple
    dt: float
    state_low: np.ndarray
    state_high: np.ndarray
    walls: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))

    @property
    def diameter(self):
        """Euclidean diameter of the nominal state box."""
        return float(np.linalg.norm(self.state_high - self.state_low))

    def to_dict(self):
        return {
            "name": self.name,
            "state_dim": self.state_dim,
            "action_dim": self.action_dim,
            "horizon": self.horizon,
            "action_low": self.action_low.tolist(),
            "action_high": self.action_high.tolist(),
            "outcome_dims": list(self.outcome_dims),
            "dt": self.dt,
            "walls": self.walls.tolist(),
        }


@dataclass(frozen=True)
class EnvState:
    values: np.ndarray
    step_index: int = 0
    termination: str = "none"

    @property
    def terminated(self):
        return self.termination != "none"


@dataclass(frozen=True)
class BehaviorDescriptor:
    values: np.ndarray


def make_spec(name):
    if name == "ball_in_cup":
        vb = BIC_VELOCITY_BOUND
        return EnvSpec(
            name=name, state_dim=6, action_dim=3, horizon=300,
            action_low=np.full(3, -CUP_SPEED), action_high=np.full(3, CUP_SPEED),
            outcome_dims=(0, 1, 2), dt=0.02,
            state_low=np.array([-STRING_LENGTH] * 3 + [-vb] * 3),
            state_high=np.array([STRING_LENGTH] * 3 + [vb] * 3),
        )
    if name in ("redundant_arm", "redundant_arm_no_walls"):
        reach = N_LINKS * LINK_LENGTH
        return EnvSpec(
            name=name, state_dim=N_LINKS + 2, action_dim=N_LINKS, horizon=250,
            action_low=np.full(N_LINKS, -1.0), action_high=np.full(N_LINKS, 1.0),
            outcome_dims=(N_LINKS, N_LINKS + 1), dt=0.02,
            state_low=np.array([-JOINT_LIMIT] * N_LINKS + [-reach, -reach]),
            state_high=np.array([JOINT_LIMIT] * N_LINKS + [reach, reach]),
            walls=WALLS.copy() if name == "redundant_arm" else np.zeros((0, 4)),
        )
    raise ConfigError(f"unknown environment {name!r}; choose from {ENV_NAMES}")


def joint_positions(q):
    """Planar forward kinematics: (n_links + 1, 2) joint coordinates, base at the origin."""
    angles = np.cumsum(q)
    steps = LINK_LENGTH * np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    return np.vstack([np.zeros((1, 2)), np.cumsum(steps, axis=0)])


def end_effector(q):
    return joint_positions(q)[-1]


def reset(spec):
    if spec.name == "ball_in_cup":
        values = np.array([0.0, 0.0, -STRING_LENGTH, 0.0, 0.0, 0.0])
    else:
        q = np.zeros(N_LINKS)
        values = np.concatenate([q, end_effector(q)])
    return EnvState(values, 0, "none")


def _step_ball(values, action, dt):
    rel, vel = values[:3], values[3:]
    vel = vel + np.array([0.0, 0.0, -GRAVITY * dt])
    rel = rel + (vel - action) * dt
    dist = np.sqrt(rel @ rel)
    if dist > STRING_LENGTH:
        n = rel / dist
        rel = n * STRING_LENGTH
        radial = n @ (vel - action)
        if radial > 0.0:
            vel = vel - radial * n
    return np.concatenate([rel, vel])


def _step_arm(values, action, dt):
    q = values[:N_LINKS] + JOINT_GAIN * action * dt
    return np.concatenate([q, end_effector(q)])


def step(spec, state, action):
    action = np.asarray(action, dtype=np.float64)
    if action.shape != (spec.action_dim,):
        raise ShapeError(f"action must have shape ({spec.action_dim},), got {action.shape}")
    if state.terminated:
        raise UsageError(f"cannot step a terminated state ({state.termination})")
    if state.step_index >= spec.horizon:
        raise UsageError("horizon exhausted")
    action = np.clip(action, spec.action_low, spec.action_high)
    if spec.name == "ball_in_cup":
        values = _step_ball(state.values, action, spec.dt)
    else:
        values = _step_arm(state.values, action, spec.dt)
    nxt = EnvState(values, state.step_index + 1, "none")
    return replace(nxt, termination=check_termination(spec, nxt))


# cross products below this count as collinear; coordinates are O(1), so
# rounding noise on nearly straight arms stays orders of magnitude smaller
ORIENT_TOL = 1e-12


def _orient(ax, ay, bx, by, cx, cy):
    cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return np.where(np.abs(cross) <= ORIENT_TOL, 0.0, np.sign(cross))


def _on_segment(ax, ay, bx, by, cx, cy):
    # c collinear with ab: is it inside the bounding box of ab
    return ((np.minimum(ax, bx) <= cx) & (cx <= np.maximum(ax, bx))
            & (np.minimum(ay, by) <= cy) & (cy <= np.maximum(ay, by)))


def segments_intersect(p1, p2, p3, p4):
    """Vectorized closed-segment intersection test for segments p1p2 and p3p4.

    Arguments are ``(..., 2)`` arrays; touching and collinear overlap count.
    """
    p1, p2, p3, p4 = (np.asarray(p, dtype=np.float64) for p in (p1, p2, p3, p4))
    ax, ay, bx, by = p1[..., 0], p1[..., 1], p2[..., 0], p2[..., 1]
    cx, cy, dx, dy = p3[..., 0], p3[..., 1], p4[..., 0], p4[..., 1]
    o1 = _orient(ax, ay, bx, by, cx, cy)
    o2 = _orient(ax, ay, bx, by, dx, dy)
    o3 = _orient(cx, cy, dx, dy, ax, ay)
    o4 = _orient(cx, cy, dx, dy, bx, by)
    general = (o1 != o2) & (o3 != o4)
    touch = (((o1 == 0) & _on_segment(ax, ay, bx, by, cx, cy))
             | ((o2 == 0) & _on_segment(ax, ay, bx, by, dx, dy))
             | ((o3 == 0) & _on_segment(cx, cy, dx, dy, ax, ay))
             | ((o4 == 0) & _on_segment(cx, cy, dx, dy, bx, by)))
    return general | touch


_I, _J = np.triu_indices(N_LINKS, k=2)


def check_termination(spec, state):
    if spec.name == "ball_in_cup":
        return "none"
    q = state.values[:N_LINKS]
    pts = joint_positions(q)
    starts, ends = pts[:-1], pts[1:]
    if len(spec.walls):
        w0 = np.repeat(spec.walls[:, :2], N_LINKS, axis=0)
        w1 = np.repeat(spec.walls[:, 2:], N_LINKS, axis=0)
        s0 = np.tile(starts, (len(spec.walls), 1))
        s1 = np.tile(ends, (len(spec.walls), 1))
        if segments_intersect(s0, s1, w0, w1).any():
            return "wall_collision"
    if segments_intersect(starts[_I], ends[_I], starts[_J], ends[_J]).any():
        return "self_collision"
    if np.any(np.abs(q) > JOINT_LIMIT):
        return "joint_limit"
    return "none"


def observer(spec, trajectory):
    """Behavior descriptor of a trajectory: the outcome dims of its final state."""
    if len(trajectory) == 0:
        raise UsageError("empty trajectory")
    last = trajectory[-1]
    values = last.values if isinstance(last, EnvState) else np.asarray(last)
    return BehaviorDescriptor(np.asarray(values)[list(spec.outcome_dims)].copy())
