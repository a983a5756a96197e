"""Quick end-to-end check of the tpdo extension module."""

import cmath
import math
from fractions import Fraction

import tpdo


def close(a, b, tol):
    assert abs(a - b) < tol, (a, b)


def main():
    # difference calculus
    cube = lambda p: float(p[0] ** 3)
    close(tpdo.forward_difference(cube, [3], [2]), 6.0, 1e-12)
    close(tpdo.taylor_remainder(cube, [0], [3], 4), 0.0, 1e-12)
    r = abs(tpdo.taylor_remainder(cube, [0], [3], 2))
    assert r <= tpdo.remainder_bound(cube, [0], [3], 2) + 1e-12
    assert tpdo.falling_factorial([5], [2]) == Fraction(20)
    assert tpdo.nested_sum([6, -3], [2, 1]) == Fraction(15) * Fraction(-3)

    # theta_hat vanishes at nonzero integers
    close(tpdo.theta_hat(0.0), 1.0, 1e-8)
    close(tpdo.theta_hat(3.0), 0.0, 1e-8)

    # quantization and the L2 bound of a multiplier
    grid = tpdo.TorusGrid(1, 32)
    window = tpdo.FrequencyWindow(1, 16)
    sigma = tpdo.Symbol.preset("bracket m=-1", 1)
    report = sigma.l2_bound(grid, window)
    close(report["norm"], 1.0, 1e-10)
    assert report["holds"]
    f = tpdo.GridFunction.from_function(grid, lambda x: cmath.exp(3j * x[0]))
    g = sigma.apply(f, window)
    close(g.values[5], f.values[5] / math.sqrt(10.0), 1e-12)

    # extension restricts to the lattice
    ext = sigma.extend(radius=12)
    assert ext.restriction_error(tpdo.TorusGrid(1, 16), tpdo.FrequencyWindow(1, 8)) < 1e-8
    between = ext.eval([0.0], [2.5])
    assert 1 / math.sqrt(1 + 3.0**2) < between.real < 1 / math.sqrt(1 + 2.0**2)

    # periodised Gaussian spectrum
    spec = tpdo.periodised_spectrum("gaussian s=1 r=8", tpdo.TorusGrid(1, 64), tpdo.FrequencyWindow(1, 4, symmetric=True))
    for k, v in zip(range(-4, 5), spec):
        close(v, math.exp(-k * k / 2) / math.sqrt(2 * math.pi), 1e-6)

    # compositions improve with order at outer frequencies
    a = tpdo.Amplitude.preset("trig b=1 axy=0.3 sxy=0.2", 1)
    p = tpdo.Symbol.preset("cos-bracket m=-1 a=0.5 b=1", 1)
    tp = tpdo.compose_tp(a, p, tpdo.TorusGrid(1, 32), tpdo.FrequencyWindow(1, 8))
    assert tp["monotone"], tp

    # transport by a node-aligned shift
    grid = tpdo.TorusGrid(1, 64)
    u0 = tpdo.GridFunction.from_function(grid, lambda x: complex(math.cos(x[0]) + 0.5 * math.sin(3 * x[0])))
    out = tpdo.solve(tpdo.Multiplier.preset("linear v=1", 1), u0, 8 * grid.spacing, 1 / 64)
    shifted = tpdo.GridFunction(grid, u0.values[-8:] + u0.values[:-8])
    assert out["snapshots"][-1].max_abs_diff(shifted) < 1e-10
    assert max(abs(n - u0.l2_norm()) for n in out["norms"]) < 1e-12

    try:
        tpdo.Symbol.preset("no-such-preset", 1)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown preset accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
