"""
The two simulated tasks
=======================

Ball-In-Cup: a cup moved by velocity commands with a ball on a 0.3 m string.
Redundant Arm: 20 planar links, joint velocities proportional to the
commanded torques, with or without four wall segments.
"""
import numpy as np

from bootstrap_bench import envs

bic = envs.make_spec("ball_in_cup")
arm = envs.make_spec("redundant_arm")
print(bic.state_dim, bic.action_dim, bic.horizon)
print(arm.state_dim, arm.action_dim, arm.horizon)

# the ball hangs below the cup; with the string slack it falls freely
s = envs.reset(bic)
print(s.values)
s = envs.EnvState(np.array([0, 0, -0.1, 0, 0, 0.0]), 0, "none")
s = envs.step(bic, s, np.zeros(3))
print("z velocity after one step:", s.values[5])  # -9.81 * 0.02

# swinging the cup back and forth never stretches the string
s = envs.reset(bic)
for t in range(300):
    s = envs.step(bic, s, np.array([np.sign(np.sin(t / 8)), 0.0, 0.0]))
print("|ball - cup| =", np.linalg.norm(s.values[:3]))

# the arm starts straight along x; zero torque leaves it in place
a = envs.reset(arm)
print("end effector:", a.values[20:])
print(np.array_equal(envs.step(arm, a, np.zeros(20)).values, a.values))

# turning the base joint sweeps the straight arm into the upper wall
action = np.zeros(20)
action[0] = 1.0
while not a.terminated:
    a = envs.step(arm, a, action)
print(a.step_index, a.termination, a.values[20:])

# the walls, as (x0, y0, x1, y1) segments
print(arm.walls)

# a pose folded back on itself
q = np.zeros(20)
q[1:4] = 2.0
folded = envs.EnvState(np.concatenate([q, envs.end_effector(q)]), 0, "none")
print(envs.check_termination(arm, folded))

# behavior descriptors are the outcome dims of the final state
print(envs.observer(arm, [folded]).values)
