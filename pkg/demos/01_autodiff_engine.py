"""Tour of the float64 tape engine: build a graph, differentiate it,
verify the gradients against finite differences, then fit a tiny
regression with the optimizer used by the training loop.
"""

import numpy as np

from eiformer.compute import (AdamState, Parameter, Tape, Tensor, abs_val,
                              adam_step, add, backward, grad_check, matmul,
                              mean_all, mul, sub, zero_grads)

rng = np.random.default_rng(0)

# --- gradients fall out of the tape -----------------------------------
w = Parameter("w", rng.normal(size=(3, 2)))
x = Tensor(rng.normal(size=(5, 3)))
with Tape() as tape:
    y = matmul(x, w.tensor)
    loss = mean_all(mul(y, y))
    backward(loss, tape)
print("loss:", float(loss.data))
print("dloss/dw:\n", w.tensor.grad)

# analytic gradient of mean(y*y) is 2 x^T y / y.size
expected = 2.0 * x.data.T @ (x.data @ w.data) / y.data.size
print("matches closed form:", np.allclose(w.tensor.grad, expected, atol=1e-12))

# --- the same check, automated over every coordinate ------------------
zero_grads([w])
worst = grad_check(lambda: mean_all(mul(matmul(x, w.tensor),
                                        matmul(x, w.tensor))), [w])
print(f"finite-difference check, worst relative error: {worst:.2e}")

# --- fit y = a*x + b with the optimizer -------------------------------
a_true, b_true = 2.5, -0.7
xs = Tensor(rng.normal(size=(64, 1)))
ys = Tensor(a_true * xs.data + b_true + 0.05 * rng.normal(size=(64, 1)))

a = Parameter("a", np.zeros((1, 1)))
b = Parameter("b", np.zeros(1))
params = [a, b]
state = AdamState(lr=0.05)
for step in range(400):
    zero_grads(params)
    with Tape() as tape:
        pred = add(matmul(xs, a.tensor), b.tensor)
        loss = mean_all(abs_val(sub(pred, ys)))
        backward(loss, tape)
    adam_step(params, state)

print(f"fitted a={float(a.data[0, 0]):.3f} (true {a_true}), "
      f"b={float(b.data[0]):.3f} (true {b_true}), "
      f"final MAE {float(loss.data):.4f}")
