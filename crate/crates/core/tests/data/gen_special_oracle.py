"""Regenerate special_oracle.csv: 50-digit reference values for the scaled
Bessel functions, the Bessel ratio and its complement, and L_{1/2}.

    python3 gen_special_oracle.py > special_oracle.csv
"""
import mpmath as mp

mp.mp.dps = 50

fixed = [0, 1e-8, 1e-4, 0.01, 0.1, 0.5, 1, 2, 2.5, 5, 7.75, 10, 15, 19.9, 19.999999,
         20, 20.000001, 20.1, 25, 30, 50, 100, 200, 500, 700, 713, 1000, 2000, 5000,
         1e4, 1e5, 1e6, 1e7, 1e8]
logspaced = [10 ** (-3 + 7 * k / 79) for k in range(80)]
xs = sorted(set(float(x) for x in fixed + logspaced))

print("x,i0e,i1e,r0,laguerre_half_neg_x,one_minus_r0")
for x in xs:
    X = mp.mpf(x)
    i0 = mp.besseli(0, X)
    i1 = mp.besseli(1, X)
    e = mp.exp(-X)
    h = X / 2
    lag = mp.exp(-h) * ((1 + X) * mp.besseli(0, h) + X * mp.besseli(1, h))
    print(",".join([repr(x)] + [mp.nstr(v, 20) for v in (i0 * e, i1 * e, i1 / i0, lag, 1 - i1 / i0)]))
