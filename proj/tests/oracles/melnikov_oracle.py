"""Reference values for the Melnikov harmonics.

I_0 uses the closed-form angular average of the two-centre potential
(complete elliptic integral); I_k uses Laplace coefficients
(hypergeometric form) on a shifted contour.  Run with python3; prints C++
constants.
"""
import mpmath as mp

mp.mp.dps = 40


def avg_inv_dist(r, a):
    # (1/2pi) int dphi / |r e1 - a e(phi)|
    return 2 / mp.pi * mp.ellipk(4 * a * r / (r + a) ** 2) / (r + a)


def I0(G, mu):
    G = mp.mpf(G)
    mu = mp.mpf(mu)

    def f(tau):
        # dU ~ r^-3 is a difference of O(1/r) terms: carry extra digits far out
        extra = int(3 * mp.log10(2 + tau ** 2)) + 10
        with mp.workdps(mp.mp.dps + extra):
            r = G ** 2 / 2 * (1 + tau ** 2)
            du = (1 - mu) * avg_inv_dist(r, mu) + mu * avg_inv_dist(r, 1 - mu) - 1 / r
            v = du * G ** 3 / 2 * (1 + tau ** 2)
        return +v

    return 2 * mp.quad(f, [0, 1, 10, 100, mp.inf])


def laplace(k, alpha):
    ck = mp.binomial(2 * k, k) / mp.mpf(4) ** k
    return ck * alpha ** k * mp.hyp2f1(mp.mpf(1) / 2, k + mp.mpf(1) / 2, k + 1, alpha ** 2)


def harmonic_A(k, r, mu):
    return (1 - mu) / r * laplace(k, mu / r) + mu / r * (-1) ** k * laplace(k, (1 - mu) / r)


def m_k(k, G, mu, shrink=mp.mpf("1.6")):
    G = mp.mpf(G)
    mu = mp.mpf(mu)
    eps = shrink * (1 - mu) / G ** 2
    b = 1 - eps
    d = G ** 3 / 2

    def f(xi):
        tau = mp.mpc(xi, -b)
        r = G ** 2 / 2 * (1 + tau ** 2)
        z = ((1 + 1j * tau) / (1 - 1j * tau)) ** k
        ex = -1j * k * d * (tau + tau ** 3 / 3) + 2 * k * d / 3
        return harmonic_A(k, r, mu) * z * mp.exp(ex) * d * (1 + tau ** 2)

    xm = mp.sqrt(80 / (k * d * b)) + 1
    pts = mp.linspace(0, xm, 40)
    return 2 * mp.re(mp.quad(f, pts))


if __name__ == "__main__":
    for G, mu in [(5, "0.5"), (3, "0.3"), (16, "0.5")]:
        print(f"I0 G={G} mu={mu}: {mp.nstr(I0(G, mp.mpf(mu)), 20)}")
    h = mp.mpf("1e-12")
    dI = (I0(8 + h, mp.mpf("0.5")) - I0(8 - h, mp.mpf("0.5"))) / (2 * h)
    print(f"dI0/dG G=8 mu=0.5: {mp.nstr(dI, 20)}")
    for k, G, mu in [(1, "2.5", "0.3"), (2, "2.5", "0.3"), (1, 3, "0.3"), (2, 5, "0.5"), (2, 12, "0.5")]:
        print(f"m{k} G={G} mu={mu}: {mp.nstr(m_k(k, mp.mpf(G), mp.mpf(mu)), 20)}")
    # transversal splitting slope (G/2)(1 - 4/G^3) |d2L/dtheta2| at theta = 0,
    # d2L = -2 sum k^2 I_k, I_k = m_k e^{-k G^3/3}
    for G, mu in [(3, "0.3"), ("3.5", "0.3")]:
        G = mp.mpf(G)
        d2 = -2 * sum(k ** 2 * m_k(k, G, mp.mpf(mu)) * mp.exp(-k * G ** 3 / 3) for k in (1, 2, 3))
        slope = G / 2 * (1 - 4 / G ** 3) * abs(d2)
        print(f"splitting slope G={G} mu={mu}: {mp.nstr(slope, 20)}")
