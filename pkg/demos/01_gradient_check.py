"""
Checking backprop against finite differences
=============================================

The Q-network is a plain numpy MLP with hand-written backward pass.
Before trusting it inside a learning loop we compare it to central
differences on a few random networks.
"""

import numpy as np

from replayratio.nncore import NetworkSpec, backward, forward, init_network

rng = np.random.default_rng(0)

# %%
# A network with two hidden relu layers. Parameters live in one flat
# float64 vector; ``weights`` and ``biases`` are views into it.
spec = NetworkSpec(input_dim=6, hidden_layers=((8, "relu"), (5, "relu")), output_dim=4)
net = init_network(spec, seed=1)
print(spec.layer_dims, "->", spec.n_params, "parameters")

# %%
# backward() returns d/dθ of sum(upstream * forward(x)).
x = rng.normal(size=(3, spec.input_dim))
upstream = rng.normal(size=(3, spec.output_dim))
analytic = backward(net, x, upstream).flat


def loss():
    return np.sum(upstream * forward(net, x))


h = 1e-5
numeric = np.empty_like(analytic)
for i in range(net.flat.size):
    old = net.flat[i]
    net.flat[i] = old + h
    up = loss()
    net.flat[i] = old - h
    down = loss()
    net.flat[i] = old
    numeric[i] = (up - down) / (2 * h)

rel = np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
print("max relative error:", rel.max())
