"""Smoke test for the Python bindings.

Uses an installed ``mirror_torus`` if present, otherwise loads the shared
library from ``target/release`` (build it with
``cargo build --release -p mirror-torus-py --features extension-module``).
"""

import cmath
import importlib.machinery
import importlib.util
import json
import math
import pathlib
import sys


def load():
    try:
        import mirror_torus

        return mirror_torus
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parent.parent
    for profile in ("release", "debug"):
        for name in ("libmirror_torus_py.so", "libmirror_torus_py.dylib", "mirror_torus_py.dll"):
            path = root / "target" / profile / name
            if path.exists():
                loader = importlib.machinery.ExtensionFileLoader("mirror_torus", str(path))
                spec = importlib.util.spec_from_loader("mirror_torus", loader)
                module = importlib.util.module_from_spec(spec)
                loader.exec_module(module)
                return module
    sys.exit("mirror_torus extension not found; build crates/py first")


def theta_2i(c):
    return sum(math.exp(-2 * math.pi * (m + c) ** 2) for m in range(-40, 41))


def main():
    mt = load()

    v = mt.theta_eval(0.5, 0.0, 2j)
    assert abs(v - theta_2i(0.5)) < 1e-12, v

    # quasi-periodicity in z -> z + tau
    tau, z = 0.1 + 1.2j, 0.3 - 0.1j
    lhs = mt.theta_eval(0.25, 0.1, tau, z + tau)
    rhs = cmath.exp(-1j * math.pi * tau - 2j * math.pi * (z + 0.1)) * mt.theta_eval(0.25, 0.1, tau, z)
    assert abs(lhs - rhs) < 1e-10

    objs = [mt.LineBundle(1j, d) for d in range(3)]
    one = [[[1]]]
    derived = mt.compose(objs[0], objs[1], objs[2], one, one)
    fukaya = mt.m2(objs[0], objs[1], objs[2], one, one)
    for k, c in enumerate((0.0, 0.5)):
        assert abs(derived[k][0][0] - theta_2i(c)) < 1e-10
        assert abs(fukaya[k][0][0] - theta_2i(c)) < 1e-10

    tau = 0.2 + 0.9j
    jordan = [[0, 1], [0, 0]]
    o1 = mt.LineBundle(tau, -1, "1/3", 0.1)
    o2 = mt.LineBundle(tau, 1, "-1/4", "1/2", jordan)
    o3 = mt.LineBundle(tau, 3, 0.37, -0.2)
    a = [[[0.3 + 0.2j], [1.0]], [[-0.5j], [0.25]]]
    b = [[[1.0, 0.5j]] for _ in range(2)]
    assert o1.hom_dimensions(o2) == (4, 4)
    assert mt.functoriality_residual(o1, o2, o3, a, b) < 1e-8

    sheaf = mt.TorsionSheaf(tau, "1/3", 0.2, jordan)
    assert sheaf.length == 2
    assert mt.functoriality_residual(o1, o2, sheaf, a, [[[1, 0], [0.5, 1j]]]) < 1e-8

    report = json.loads(mt.verify("assoc", seed=3, count=5))
    assert report["pass"] and len(report["cases"]) == 10

    try:
        mt.theta_eval(0, 0, -1j)
    except mt.MirrorTorusError as e:
        assert "Im(tau) must be positive" in str(e)
    else:
        raise AssertionError("lower half plane accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
