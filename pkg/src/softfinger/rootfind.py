"""Bracketing scalar root finder used by every equilibrium solve."""

from .errors import ConvergenceError


def bisect(f, lo, hi, xtol=1e-12, max_iter=200):
    """Find a sign change of ``f`` in ``[lo, hi]`` by bisection.

    ``f(lo)`` and ``f(hi)`` must bracket a root (opposite signs, or one of
    them exactly zero). Iterates until the bracket is narrower than ``xtol``
    and returns the midpoint.
    """
    flo = f(lo)
    if flo == 0.0:
        return lo
    fhi = f(hi)
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ValueError(f"root not bracketed: f({lo})={flo}, f({hi})={fhi}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= xtol or mid == lo or mid == hi:
            return mid
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    raise ConvergenceError(f"bisection did not reach xtol={xtol}", residual=hi - lo)
