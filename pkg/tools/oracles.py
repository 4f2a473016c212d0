"""Reference values for the test suite, computed independently with mpmath.

Nothing here imports the package. Run ``python tools/oracles.py`` to print the
values frozen in ``tests/oracle_values.py``.
"""

import mpmath as mp

mp.mp.dps = 40


def beta_bernoulli_risk(n, squared=False, a=1, b=1):
    """E L(ppd_n, p_theta) by quadrature over theta of a finite sum over k."""
    def integrand(t):
        s = 0
        for k in range(n + 1):
            gap = 2 * abs(mp.mpf(a + k) / (a + b + n) - t)
            s += mp.binomial(n, k) * t**k * (1 - t) ** (n - k) * (gap**2 if squared else gap)
        return s * t ** (a - 1) * (1 - t) ** (b - 1) / mp.beta(a, b)
    pts = [0] + sorted({mp.mpf(a + k) / (a + b + n) for k in range(n + 1)}) + [1]
    return mp.quad(integrand, pts)


def mle_risk(n):
    """L1 risk of p_{k/n} under a uniform prior."""
    def integrand(t):
        return sum(mp.binomial(n, k) * t**k * (1 - t) ** (n - k) * 2 * abs(mp.mpf(k) / n - t)
                   for k in range(n + 1))
    return mp.quad(integrand, [mp.mpf(k) / n for k in range(n + 1)])


def normal_pdf(x, m, v):
    return mp.exp(-(x - m) ** 2 / (2 * v)) / mp.sqrt(2 * mp.pi * v)


def normal_l1(m1, v1, m2, v2):
    f = lambda x: normal_pdf(x, m1, v1) - normal_pdf(x, m2, v2)  # noqa: E731
    # crossings solve a quadratic in x
    a = 1 / (2 * v2) - 1 / (2 * v1)
    b = m1 / v1 - m2 / v2
    c = m2**2 / (2 * v2) - m1**2 / (2 * v1) + mp.log(mp.sqrt(v2 / v1))
    if a == 0:
        roots = [-c / b]
    else:
        disc = b * b - 4 * a * c
        roots = sorted([(-b - mp.sqrt(disc)) / (2 * a), (-b + mp.sqrt(disc)) / (2 * a)])
    pts = [-mp.inf] + roots + [mp.inf]
    return sum(abs(mp.quad(f, [lo, hi])) for lo, hi in zip(pts, pts[1:]))


def normal_ppd_quad(x, sigma, m, v):
    return mp.quad(lambda t: normal_pdf(x, t, sigma**2) * normal_pdf(t, m, v), [-mp.inf, m, mp.inf])


def gamma_poisson_ppd_quad(x, shape, rate):
    dens = lambda t: rate**shape * t ** (shape - 1) * mp.exp(-rate * t) / mp.gamma(shape)  # noqa: E731
    return mp.quad(lambda t: mp.exp(-t) * t**x / mp.factorial(x) * dens(t), [0, 1, mp.inf])


def beta_bernoulli_ppd_quad(a, b, k, n):
    post = lambda t: t ** (a + k - 1) * (1 - t) ** (b + n - k - 1)  # noqa: E731
    return mp.quad(lambda t: t * post(t), [0, 1]) / mp.quad(post, [0, 1])


def dirichlet_ppd_quad(alpha, counts, j):
    """P(next = j) for a 3-category Dirichlet posterior, by 2-D quadrature on the simplex."""
    a = [alpha[i] + counts[i] for i in range(3)]
    dens = lambda p1, p2: p1 ** (a[0] - 1) * p2 ** (a[1] - 1) * (1 - p1 - p2) ** (a[2] - 1)  # noqa: E731
    coord = [lambda p1, p2: p1, lambda p1, p2: p2, lambda p1, p2: 1 - p1 - p2][j]
    num = mp.quad(lambda p1: mp.quad(lambda p2: coord(p1, p2) * dens(p1, p2), [0, 1 - p1]), [0, 1])
    den = mp.quad(lambda p1: mp.quad(lambda p2: dens(p1, p2), [0, 1 - p1]), [0, 1])
    return num / den


def main():
    out = {}
    out["BB_L1_RISK"] = {n: beta_bernoulli_risk(n) for n in (0, 1, 2, 4, 16)}
    out["BB_SQ_L1_RISK"] = {n: beta_bernoulli_risk(n, squared=True) for n in (0, 1, 4, 16)}
    out["BB_L1_RISK_A2_B3"] = {n: beta_bernoulli_risk(n, a=2, b=3) for n in (0, 3)}
    out["MLE_L1_RISK"] = {n: mle_risk(n) for n in (4, 16)}
    out["NORMAL_L1"] = {
        (0, 1, 1, 1): normal_l1(0, 1, 1, 1),
        (0, 1, 0, 4): normal_l1(0, 1, 0, 4),
        (0.3, 1.5, -0.2, 0.7): normal_l1(0.3, 1.5, -0.2, 0.7),
    }
    out["NORMAL_PPD"] = {(x, 1.5, 0.4, 2.0): normal_ppd_quad(x, 1.5, 0.4, 2.0) for x in (-2, 0, 1.3)}
    out["GAMMA_POISSON_PPD"] = {(x, 2.5, 1.5): gamma_poisson_ppd_quad(x, 2.5, 1.5) for x in (0, 1, 4, 9)}
    out["BETA_BERNOULLI_PPD"] = {(0.7, 2.3, 3, 10): beta_bernoulli_ppd_quad(0.7, 2.3, 3, 10)}
    out["DIRICHLET_PPD"] = {((0.8, 1.5, 2.0), (2, 0, 1), j): dirichlet_ppd_quad((0.8, 1.5, 2.0), (2, 0, 1), j)
                            for j in range(3)}
    for name, table in out.items():
        print(f"{name} = {{")
        for key, value in table.items():
            print(f"    {key!r}: {mp.nstr(value, 17)},")
        print("}")


if __name__ == "__main__":
    main()
