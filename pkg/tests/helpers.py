import numpy as np


def central_diff(f, x, rel_step=1e-6):
    """Central differences with a step relative to each coordinate."""
    x = np.asarray(x, float)
    g = np.zeros_like(x)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        up, dn = x.copy(), x.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (f(up) - f(dn)) / (up[i] - dn[i])
    return g


def rel_err(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = np.linalg.norm(b)
    if scale == 0:
        return float(np.linalg.norm(a))
    return float(np.linalg.norm(a - b) / scale)


def interior_point(rng, n, lo=20.0, hi=150.0, margin=2.0, period=100):
    """Random windows away from the box edges and from the overlap kink
    w_v + w_j + 1 = period."""
    while True:
        w = rng.uniform(lo + margin, hi - margin, n)
        s = w[:, None] + w[None, :] + 1
        if np.all(np.abs(s - period) > 0.5):
            return w


# verdict lines from the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list = []
