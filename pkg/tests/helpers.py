"""Shared test utilities: a random expression generator and FD oracles."""

from pathlib import Path

import numpy as np

from cdrsim import expr as ex

# unary wrappers that keep values and derivatives moderate on |z| <= 2
_WRAPS = (
    "sin({})", "cos({})", "tanh({})", "erf({})", "exp(tanh({}))",
    "sqrt(1 + ({})^2)", "log(2 + sin({}))", "({})^2", "-({})",
)
_BINOPS = ("+", "-", "*")


def random_source(rng, depth=3):
    """Infix source for a random well-conditioned expression in z and a."""
    if depth == 0 or rng.random() < 0.25:
        choice = rng.integers(3)
        if choice == 0:
            return "z"
        if choice == 1:
            return "a"
        return f"{rng.uniform(0.5, 2.0):.3f}"
    kind = rng.integers(3)
    if kind == 0:
        return _WRAPS[rng.integers(len(_WRAPS))].format(random_source(rng, depth - 1))
    if kind == 1:
        op = _BINOPS[rng.integers(len(_BINOPS))]
        return f"({random_source(rng, depth - 1)}) {op} ({random_source(rng, depth - 1)})"
    return f"({random_source(rng, depth - 1)}) / (2 + cos({random_source(rng, depth - 1)}))"


def central_difference(e, bindings, var="z", h=1e-6):
    up = dict(bindings)
    dn = dict(bindings)
    up[var] = bindings[var] + h
    dn[var] = bindings[var] - h
    return (ex.evaluate(e, up) - ex.evaluate(e, dn)) / (2 * h)


def derivative_samples(n, seed=0):
    """(expr, bindings, symbolic, fd) for n random samples."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        e = ex.parse(random_source(rng), ("z",), ("a",))
        b = {"z": float(rng.uniform(-2, 2)), "a": float(rng.uniform(0.5, 1.5))}
        sym = ex.evaluate(ex.differentiate(e, "z"), b)
        out.append((e, b, sym, central_difference(e, b)))
    return out


SPECS = Path(__file__).resolve().parent.parent / "specs"
FIG1_SPEC = SPECS / "fig1_example2.json"
FIG2_SPEC = SPECS / "fig2_example4.json"
