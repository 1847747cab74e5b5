"""Randers Finsler function and its fundamental tensor at one point.

Walks through L = alpha + beta on the coupled weak-field scenario, compares
the jet Hessian with the closed form, and shows how the tensor depends on
the direction of the velocity.
"""

import numpy as np

from fingeo import randers as rd
from fingeo.scenario import load_scenario

np.set_printoptions(precision=5, suppress=True)

scn = load_scenario("coupled_weakfield")
bg = scn.background
x = np.array([0.2, -0.3, 0.1, 0.4])
y = np.array([1.4, 0.3, -0.2, 0.1])

fe = rd.finsler_eval(bg, (x, y))
print(f"alpha = {fe.alpha:.6f}  beta = {fe.beta:.6f}  L = {fe.L:.6f}")
print("g (y-Hessian of L^2/2):\n", fe.g)

# the closed form with weight L/alpha reproduces the Hessian
gt, b = bg.metric(x), bg.e * bg.potential(x)
closed = rd.closed_metric(bg.m, gt, fe.ell, b, fe.L, fe.alpha, prefactor=1.0)
print("closed form gap:", np.abs(closed - fe.g).max())

# Euler relation and Lorentzian signature
print("y.g.y - L^2 =", y @ fe.g @ y - fe.L ** 2, " signature ok:", fe.signature_ok)

# unlike a Riemannian metric, g changes with the direction of y
for y2 in ([1.4, -0.3, 0.2, -0.1], [2.0, 0.0, 0.0, 0.0]):
    g2 = rd.fundamental_tensor_hessian(bg, (x, np.array(y2)))
    print(f"y = {y2}: |g(y) - g(y')| = {np.abs(g2 - fe.g).max():.4f}")

print("Cartan tensor norm:", np.abs(fe.cartan).max())
