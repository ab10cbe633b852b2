"""The reverse-mode autodiff engine underneath the model.

Tensors record their parents and a backward closure; backward() walks the
graph in reverse topological order, touches each node exactly once, and
accumulates gradients into leaf parameters.  grad_check compares every
coordinate against central finite differences.
"""

import numpy as np

from vtground.tensor import (Tensor, grad_check, no_grad, parameter,
                             softmax_rows)

# A small expression: scalar loss of a softmax-attention-like composite.
rng = np.random.default_rng(0)
W = parameter(rng.normal(size=(4, 4)))
x = Tensor(rng.normal(size=(3, 4)))

def loss():
    attn = softmax_rows(x.matmul(W))
    return (attn.matmul(x.T) * rng_mix).sum()

rng_mix = rng.normal(size=(3, 3))
out = loss()
visits = out.backward()
print(f"loss = {float(out.data):+.4f}")
print(f"backward visited {visits} graph nodes (each exactly once)")
print("dloss/dW row 0:", np.round(W.grad[0], 4))

# The same gradient, independently, from finite differences.
error = grad_check(loss, {"W": W}, h=1e-5)
print(f"max relative error vs central differences: {error:.2e}")

# no_grad skips graph construction entirely, e.g. on the query path.
with no_grad():
    silent = loss()
print(f"under no_grad the result has no graph: "
      f"{silent._parents == () and silent._backward_fn is None}")

# A second backward on the same graph is rejected rather than silently
# accumulating twice.
try:
    out.backward()
except Exception as e:
    print(f"second backward raises: {type(e).__name__}: {e}")
