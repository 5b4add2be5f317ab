"""Order-independent, exactly rounded floating-point accumulation.

Every row sum in this package is *correctly rounded*: the returned double
is the exact real-number sum of the addends, rounded once. Since the exact
sum does not depend on the order in which addends arrive, a row's result
is bit-for-bit identical no matter how its entries are grouped between
diagonal/off-diagonal blocks, ranks, or threads. This is the mechanism
behind the engine's bitwise reproducibility guarantee.

The running state is a Shewchuk expansion: a list of non-overlapping
partials whose exact sum equals the exact sum of everything accumulated so
far. ``math.fsum`` over the partials yields the correctly rounded total.
"""

from math import fsum

__all__ = ["grow", "extend", "expansion", "rounded"]


def grow(partials: list[float], value: float) -> None:
    """Add a single addend to an expansion, in place."""
    x = value
    i = 0
    for y in partials:
        if abs(x) < abs(y):
            x, y = y, x
        hi = x + y
        lo = y - (hi - x)
        if lo:
            partials[i] = lo
            i += 1
        x = hi
    partials[i:] = [x]


def extend(partials: list[float], values) -> list[float]:
    """Accumulate a sequence of floats into an expansion, in place.

    Hot path for the multiply kernels; ``values`` should be a plain list
    of Python floats (``ndarray.tolist()``), not a numpy array.
    """
    for x in values:
        i = 0
        for y in partials:
            if abs(x) < abs(y):
                x, y = y, x
            hi = x + y
            lo = y - (hi - x)
            if lo:
                partials[i] = lo
                i += 1
            x = hi
        partials[i:] = [x]
    return partials


def expansion(values) -> list[float]:
    """Fresh expansion holding the exact sum of ``values``."""
    return extend([], values)


def rounded(partials: list[float]) -> float:
    """Correctly rounded double value of an expansion."""
    return fsum(partials)
