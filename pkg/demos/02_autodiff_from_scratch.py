"""The reverse-mode core in isolation.

Differentiates a tiny attention computation, verifies the tape against
central finite differences, and runs the Adam update with its linear
learning-rate decay.
Run:  python demos/02_autodiff_from_scratch.py
"""

import numpy as np

from pursuitlab import autodiff as ad
from pursuitlab.autodiff import Tensor

rng = np.random.default_rng(1)

# --- build a computation, walk it backwards ---------------------------------
x = Tensor(np.array([[1.0, -2.0, 0.5]]), requires_grad=True)
y = ad.total_sum(ad.mul(ad.elu(x), ad.elu(x)))
ad.backward(y)
print("d/dx sum(elu(x)^2) at [1, -2, 0.5]:", y.item(), "grad:", x.grad)

# --- gradient checking is one call ------------------------------------------
params = {"w": rng.normal(size=(4, 4)), "b": rng.normal(size=4)}


def attention_like(leaves):
    q = ad.matmul(Tensor(rng0), leaves["w"])
    scores = ad.softmax_rows(ad.mul(ad.matmul(q, ad.transpose(q)), Tensor(0.5)))
    out = ad.add(ad.matmul(scores, q), leaves["b"])
    return ad.mse(out, Tensor(np.zeros((3, 4))))


rng0 = rng.normal(size=(3, 4))
err = ad.grad_check(attention_like, params, h=1e-6)
print(f"max relative error vs central differences: {err:.2e}")

# --- Adam with the linear schedule ------------------------------------------
theta = {"w": np.array([4.0])}
state = ad.adam_init(theta)
total = 2000
for step in range(total):
    grad = {"w": 2.0 * theta["w"]}  # minimize w^2
    ad.adam_step(theta, grad, state, lr=ad.lr_linear(step, total, peak=0.05))
print("after 2000 Adam steps on w^2, w =", theta["w"][0])
print("schedule endpoints:", ad.lr_linear(0, total), "->", ad.lr_linear(total, total))

# --- checkpoints round-trip bit-exactly -------------------------------------
ad.save_checkpoint("/tmp/demo.ckpt", params, meta={"note": "demo"})
loaded, meta = ad.load_checkpoint("/tmp/demo.ckpt")
print("checkpoint round-trip exact:", all(np.array_equal(loaded[k], params[k]) for k in params))
