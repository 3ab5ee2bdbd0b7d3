"""Exact scalars: rationals (``fractions.Fraction``) and Gaussian rationals.

Gaussian rationals enter when complex numerical data (Stokes factors read off
from traced networks) is handed to the exact algebra modules.  Floats are
converted with :func:`rationalize`, which is exact on the binary value.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

from camnet.errors import InputError


class GaussQ:
    """Element ``re + im*i`` of Q(i) with exact Fraction parts."""

    __slots__ = ("re", "im")

    def __init__(self, re_part=0, im_part=0):
        self.re = Fraction(re_part)
        self.im = Fraction(im_part)

    @staticmethod
    def _lift(other) -> "GaussQ | None":
        if isinstance(other, GaussQ):
            return other
        if isinstance(other, (int, Fraction)):
            return GaussQ(other, 0)
        return None

    def __add__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return GaussQ(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return GaussQ(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return GaussQ(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        num = self * GaussQ(o.re, -o.im)
        return GaussQ(num.re / den, num.im / den)

    def __rtruediv__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o / self

    def __neg__(self):
        return GaussQ(-self.re, -self.im)

    def __pos__(self):
        return self

    def __eq__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def conjugate(self) -> "GaussQ":
        return GaussQ(self.re, -self.im)

    def __repr__(self):
        return f"GaussQ({format_scalar(self)!r})"


Scalar = Union[int, Fraction, GaussQ]


def parse_rational(text: str) -> Fraction:
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"not an exact rational: {text!r}") from exc


def parse_scalar(text) -> Scalar:
    """Parse ``"p/q"``, ``"r/si"`` or ``"p/q+r/si"`` into Fraction or GaussQ."""
    if isinstance(text, (int, Fraction, GaussQ)):
        return text
    s = str(text).replace(" ", "")
    if not s:
        raise InputError("empty scalar string")
    if not s.endswith("i"):
        return parse_rational(s)
    body = s[:-1]
    # split the imaginary part off at the last sign that is not a leading sign
    cut = max(body.rfind("+", 1), body.rfind("-", 1))
    if cut <= 0:
        re_txt, im_txt = "0", body
    else:
        re_txt, im_txt = body[:cut], body[cut:]
    if im_txt in ("", "+"):
        im_txt = "1"
    elif im_txt == "-":
        im_txt = "-1"
    value = GaussQ(parse_rational(re_txt), parse_rational(im_txt))
    return value.re if value.im == 0 else value


def format_scalar(x) -> str:
    """Inverse of :func:`parse_scalar`; integers print without a denominator."""
    if isinstance(x, GaussQ):
        if x.im == 0:
            return str(x.re)
        im = x.im
        sign = "-" if im < 0 else "+"
        im_txt = str(abs(im))
        if x.re == 0:
            return f"{'-' if im < 0 else ''}{im_txt}i"
        return f"{x.re}{sign}{im_txt}i"
    return str(Fraction(x))


def rationalize(z: complex | float) -> Scalar:
    """Exact conversion of a double (or complex double) to Q or Q(i)."""
    z = complex(z)
    re_part = Fraction(z.real)
    if z.imag == 0:
        return re_part
    return GaussQ(re_part, Fraction(z.imag))


def to_complex(x) -> complex:
    if isinstance(x, GaussQ):
        return complex(x)
    return complex(float(x))


def is_zero(x) -> bool:
    return not x
