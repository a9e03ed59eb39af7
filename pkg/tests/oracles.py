"""Independent reference implementations used as test oracles.

Nothing here imports the package under test. Cheap oracles are called
directly from the tests; the expensive ones were run once and their results
are frozen as constants in the tests (run this module to regenerate them).
"""

import math

import mpmath

mpmath.mp.dps = 40


def green_mp(D, d, t):
    """Free-space 3D point-source kernel in arbitrary precision."""
    D, d, t = mpmath.mpf(D), mpmath.mpf(d), mpmath.mpf(t)
    return (4 * mpmath.pi * D * t) ** mpmath.mpf(-1.5) * mpmath.exp(-d * d / (4 * D * t))


def mackey_glass_fine(length, dt=0.01, tau=17.0, beta=0.2, gamma=0.1, power=10.0,
                      history=None, transient=1000.0):
    """Scalar RK4 with linear interpolation of the delayed term.

    ``history`` is a callable of the step index in ``[-tau/dt, 0]``; it
    defaults to the constant 1.2.
    """
    lag = int(round(tau / dt))
    hist = [1.2 if history is None else history(k) for k in range(-lag, 1)]
    x = list(hist)
    skip = int(round(transient / dt))
    stride = int(round(1.0 / dt))
    n_steps = skip + stride * (length - 1)

    def f(xt, xd):
        return beta * xd / (1.0 + xd**power) - gamma * xt

    for i in range(lag, lag + n_steps):
        d0, d1 = x[i - lag], x[i - lag + 1]
        dh = 0.5 * (d0 + d1)
        xi = x[i]
        k1 = f(xi, d0)
        k2 = f(xi + 0.5 * dt * k1, dh)
        k3 = f(xi + 0.5 * dt * k2, dh)
        k4 = f(xi + dt * k3, d1)
        x.append(xi + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0)
    out = x[lag:]
    return [out[skip + stride * k] for k in range(length)]


def ridge_mp(X, y, lam):
    """Normal-equations ridge solve in arbitrary precision."""
    A = mpmath.matrix(X)
    b = mpmath.matrix([[v] for v in y])
    G = A.T * A + mpmath.mpf(lam) * mpmath.eye(A.cols)
    return [float(v) for v in mpmath.lu_solve(G, A.T * b)]


def matern52_mp(a, b, ls, s2):
    r2 = sum(((mpmath.mpf(x) - mpmath.mpf(y)) / mpmath.mpf(l)) ** 2 for x, y, l in zip(a, b, ls))
    r = mpmath.sqrt(5 * r2)
    return mpmath.mpf(s2) * (1 + r + r * r / 3) * mpmath.exp(-r)


def gp_posterior_mp(X, y, ls, s2, noise, xs):
    """Dense GP posterior (mean, std) on standardized targets, arbitrary precision.

    ``y`` is standardized with its sample mean and (population) std, matching
    the usual convention; the returned moments are de-standardized.
    """
    n = len(X)
    mu_y = mpmath.fsum(y) / n
    sd_y = mpmath.sqrt(mpmath.fsum((v - mu_y) ** 2 for v in y) / n)
    z = [(mpmath.mpf(v) - mu_y) / sd_y for v in y]
    K = mpmath.matrix(n, n)
    for i in range(n):
        for j in range(n):
            K[i, j] = matern52_mp(X[i], X[j], ls, s2)
        K[i, i] += mpmath.mpf(noise)
    alpha = mpmath.lu_solve(K, mpmath.matrix(z))
    out = []
    for x in xs:
        k = mpmath.matrix([matern52_mp(x, X[i], ls, s2) for i in range(n)])
        mean = mpmath.fsum(k[i] * alpha[i] for i in range(n))
        v = mpmath.lu_solve(K, k)
        var = mpmath.mpf(s2) - mpmath.fsum(k[i] * v[i] for i in range(n))
        out.append((float(mu_y + sd_y * mean), float(sd_y * mpmath.sqrt(max(var, 0)))))
    return out


def nrmse_plain(y, yhat):
    m = math.fsum(y) / len(y)
    num = math.fsum((a - b) ** 2 for a, b in zip(y, yhat))
    den = math.fsum((a - m) ** 2 for a in y)
    return math.sqrt(num / den)


if __name__ == "__main__":
    D, d = 1.02e-11, 5.12e-6
    t_peak = mpmath.mpf(d) ** 2 / (6 * mpmath.mpf(D))
    print("h(t_peak) =", mpmath.nstr(green_mp(D, d, t_peak), 17))
    series = mackey_glass_fine(2000)
    mean = math.fsum(series) / len(series)
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in series) / len(series))
    print("MG fine-step mean/std =", repr(mean), repr(std))
