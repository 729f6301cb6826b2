"""Method-of-fundamental-solutions oracle for the regular part on an ellipse.

h(., y) is harmonic in the ellipse with boundary values (1/2pi) ln(1/|x - y|).
It is represented as c0 + sum_j c_j ln|x - s_j| with sources s_j on a
confocal-free enlarged ellipse, fitted by least squares on dense boundary
collocation (numpy lstsq only)."""
import numpy as np


def mfs_regular_part(T, x, y, n_src=400, n_col=1600, lift=1.3):
    t_c = 2 * np.pi * np.arange(n_col) / n_col
    t_s = 2 * np.pi * (np.arange(n_src) + 0.5) / n_src
    circ = lambda t, r: r * np.stack([np.cos(t), np.sin(t)], axis=1) @ T.T
    bnd, src = circ(t_c, 1.0), circ(t_s, lift)
    A = np.column_stack([np.ones(n_col), np.log(np.linalg.norm(bnd[:, None] - src[None], axis=2))])
    b = np.log(1.0 / np.linalg.norm(bnd - y, axis=1)) / (2 * np.pi)
    coef = np.linalg.lstsq(A, b, rcond=1e-14)[0]
    resid = np.max(np.abs(A @ coef - b))
    x = np.atleast_2d(x)
    val = coef[0] + np.log(np.linalg.norm(x[:, None] - src[None], axis=2)) @ coef[1:]
    return val, resid


if __name__ == "__main__":
    c, s = np.cos(0.4), np.sin(0.4)
    T = np.diag([1 / 0.7, 1.0]) @ np.array([[c, s], [-s, c]])
    y = np.array([0.2, -0.1])
    x = np.array([[0.0, 0.0], [0.5, 0.3], [-0.6, 0.2]])
    val, res = mfs_regular_part(T, x, y)
    print(res, [repr(v) for v in val])
