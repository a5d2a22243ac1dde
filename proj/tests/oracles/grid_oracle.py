"""Direct-summation values frozen into tests/test_grid.cpp."""
import numpy as np


def poincare_bump(n=65, R=0.5):
    """Ratio sum(f^2 w h^2) / (R^2 * sum over faces touching B_R of w (df/h)^2 h^2), w = 1."""
    x = np.linspace(-1.0, 1.0, n)
    h = x[1] - x[0]
    X, Y = np.meshgrid(x, x, indexing="ij")
    r = np.hypot(X, Y)
    f = np.maximum(1.0 - r / R, 0.0)
    inside = r <= R * (1 + 1e-12)
    mass = np.sum(f[inside] ** 2) * h * h
    grad = 0.0
    for axis in (0, 1):
        df = np.diff(f, axis=axis)
        touch = np.logical_or(np.take(inside, range(n - 1), axis=axis), np.take(inside, range(1, n), axis=axis))
        grad += np.sum(df[touch] ** 2)
    return mass / (R * R * grad)


if __name__ == "__main__":
    print("poincare bump ratio n=65 R=0.5: %.17g" % poincare_bump())
