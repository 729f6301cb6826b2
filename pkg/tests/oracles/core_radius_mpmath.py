"""Root of delta^{2/(p-1)} s^{-2/(p-1)} phi'(1) = a / ln(s/R) in s (mpmath findroot)."""
import mpmath as mp

mp.mp.dps = 30
SLOPE = {2: mp.mpf("-7.89707101310907006")}


def core_radius(delta, a, R, p=2):
    e = mp.mpf(2) / (p - 1)
    f = lambda s: delta**e * s ** (-e) * SLOPE[p] - a / mp.log(s / R)
    # single sign change between delta and R/e for small delta
    return mp.findroot(f, (delta, R / mp.e), solver="illinois", tol=mp.mpf(10) ** -28)


if __name__ == "__main__":
    for eps in ("1e-2", "1e-3", "1e-4"):
        eps = mp.mpf(eps)
        delta = eps / mp.sqrt(abs(mp.log(eps)))
        a = mp.mpf(1)
        print(mp.nstr(eps, 3), mp.nstr(delta, 20), mp.nstr(core_radius(delta, a, 3), 20))
