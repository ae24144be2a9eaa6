from fractions import Fraction
from numbers import Rational

RationalLike = int | str | Fraction | float


def as_fraction(x: RationalLike) -> Fraction:
    """
    Convert a human-written rational ("3/8", "0.25", 2, ...) to a Fraction.

    Floats are converted exactly (binary value), so prefer strings.
    """
    if isinstance(x, bool):
        raise TypeError('Expected a rational, got a bool')
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    if not isinstance(x, str):
        raise TypeError(f'Expected a rational, got {type(x).__name__}')
    x = x.strip()
    if not x:
        raise ValueError('Empty rational')
    return Fraction(x)


def fraction_str(x: Fraction | int) -> str:
    """Canonical JSON representation of a rational ("p/q" or "p")"""
    return str(Fraction(x))

