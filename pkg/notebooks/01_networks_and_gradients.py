"""
Networks, Gaussian heads and gradients
======================================

The same small numpy MLP drives the random policies and every member of the
dynamics ensemble.  This script builds one, checks its gradients against
finite differences and runs a few optimizer steps.
"""
import math

import numpy as np

from bootstrap_bench import nn

# a policy-sized network: 6 inputs, two hidden layers of 10, 3 outputs
params = nn.mlp_init([6, 10, 10, 3], "tanh", seed=0)
print([w.shape for w in params.weights])
print(nn.mlp_forward(params, np.ones(6)))

# Gaussian negative log-likelihood of a unit-variance prediction
pred = nn.GaussianOutput(np.zeros(1), np.zeros(1))
print(nn.gaussian_nll(pred, np.array([0.0])), 0.5 * math.log(2 * math.pi))
print(nn.gaussian_nll(pred, np.array([1.0])))

# the head emits 2*d numbers; log-variances are softly clamped to [-10, 4]
raw = np.array([[0.0, 0.0, -50.0, 50.0]])
print(nn.gaussian_head(raw).log_variance)

# analytic gradients against central differences
net = nn.mlp_init([3, 5, 4], "tanh", seed=1)
x = np.random.default_rng(0).normal(size=(8, 3))
t = np.random.default_rng(1).normal(size=(8, 2))
loss, grads = nn.backward(net, x, t, loss="gaussian_nll")
h = 1e-5
w = net.weights[0]
k = (2, 1)
plus, minus = w.copy(), w.copy()
plus[k] += h
minus[k] -= h
fd = (nn.backward(net.with_arrays([plus] + net.arrays()[1:]), x, t, "gaussian_nll")[0]
      - nn.backward(net.with_arrays([minus] + net.arrays()[1:]), x, t, "gaussian_nll")[0]) / (2 * h)
print("analytic", grads.weights[0][k], "finite difference", fd)

# Adam on f(w) = w^2
p = nn.MlpParams((1, 1), [np.array([[1.0]])], [np.zeros(1)])
state = nn.AdamState.zeros_like(p)
for _ in range(200):
    g = p.with_arrays([2 * p.weights[0], np.zeros(1)])
    p, state = nn.optimizer_step(p, g, state, lr=0.1)
print("w after 200 steps:", p.weights[0][0, 0])
