"""Symbolic right-hand side -div(K_H grad u) for u = R^2 - |x|^2."""
import sympy as sp

x1, x2, k, R = sp.symbols("x1 x2 k R", real=True)
d = k**2 + x1**2 + x2**2
K = sp.Matrix([[k**2 + x2**2, -x1 * x2], [-x1 * x2, k**2 + x1**2]]) / d
u = R**2 - x1**2 - x2**2
g = sp.Matrix([sp.diff(u, x1), sp.diff(u, x2)])
flux = K * g
rhs = sp.simplify(-(sp.diff(flux[0], x1) + sp.diff(flux[1], x2)))
if __name__ == "__main__":
    print(rhs)
