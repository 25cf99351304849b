"""Physical constants and dimension-checked quantities.

Dimensions are 7-tuples of integer exponents over the SI base units
(m, kg, s, A, K, mol, cd). Angles are dimensionless.
"""
from __future__ import annotations

import math
import re
from decimal import Decimal, localcontext
from dataclasses import asdict, dataclass
from typing import Union

from .errors import DimensionError, UnitError

__all__ = [
    "Constants",
    "CONSTANTS",
    "Quantity",
    "parse_quantity",
    "format_quantity",
    "to_si",
    "as_si",
    "UNITS",
    "DIMENSIONLESS",
    "LENGTH",
    "MASS",
    "TIME",
    "TEMPERATURE",
    "FREQUENCY",
    "VELOCITY",
    "ACCELERATION",
    "FORCE",
    "STIFFNESS",
    "MAGNETIC_FIELD",
    "FIELD_GRADIENT",
    "DIPOLE",
    "VOLUME",
    "ANGLE",
]


@dataclass(frozen=True)
class Constants:
    """CODATA-2018 values in SI units."""

    G: float = 6.67430e-11
    hbar: float = 6.62607015e-34 / (2.0 * math.pi)
    c: float = 299792458.0
    eps0: float = 8.8541878128e-12
    muB: float = 9.2740100783e-24
    kB: float = 1.380649e-23
    e_charge: float = 1.602176634e-19
    # NV electron spin
    g_e: float = 2.003

    def as_dict(self) -> dict:
        return asdict(self)


CONSTANTS = Constants()

Dims = tuple  # tuple[int, int, int, int, int, int, int]

_BASE_SYMBOLS = ("m", "kg", "s", "A", "K", "mol", "cd")


def _d(m=0, kg=0, s=0, A=0, K=0, mol=0, cd=0) -> Dims:
    return (m, kg, s, A, K, mol, cd)


DIMENSIONLESS = _d()
ANGLE = DIMENSIONLESS
LENGTH = _d(m=1)
MASS = _d(kg=1)
TIME = _d(s=1)
TEMPERATURE = _d(K=1)
FREQUENCY = _d(s=-1)
VELOCITY = _d(m=1, s=-1)
ACCELERATION = _d(m=1, s=-2)
FORCE = _d(m=1, kg=1, s=-2)
STIFFNESS = _d(kg=1, s=-2)
ENERGY = _d(m=2, kg=1, s=-2)
CHARGE = _d(s=1, A=1)
DIPOLE = _d(m=1, s=1, A=1)
MAGNETIC_FIELD = _d(kg=1, s=-2, A=-1)
FIELD_GRADIENT = _d(m=-1, kg=1, s=-2, A=-1)
VOLUME = _d(m=3)


def _add(a: Dims, b: Dims, sign: int = 1) -> Dims:
    return tuple(x + sign * y for x, y in zip(a, b))


def _scale(a: Dims, k: int) -> Dims:
    return tuple(k * x for x in a)


_PREFIX = {"k": 3, "M": 6, "G": 9, "c": -2, "m": -3, "u": -6, "μ": -6,
           "n": -9, "p": -12, "f": -15, "a": -18, "z": -21}


def _prefixed(base: str, exp10: int, dims: Dims, prefixes: str) -> dict:
    out = {base: (Decimal(1).scaleb(exp10), dims)}
    for p in prefixes:
        out[p + base] = (Decimal(1).scaleb(exp10 + _PREFIX[p]), dims)
    return out


# name -> (SI scale factor, dims); decimal scales keep "100 um" == 1e-4 exactly
UNITS: dict[str, tuple[Decimal, Dims]] = {}
UNITS.update(_prefixed("m", 0, LENGTH, "kcmuμnpf"))
UNITS.update(_prefixed("g", -3, MASS, "kmuμnpf"))
UNITS.update(_prefixed("s", 0, TIME, "muμnp"))
UNITS.update(_prefixed("Hz", 0, FREQUENCY, "kMG"))
UNITS.update(_prefixed("T", 0, MAGNETIC_FIELD, "mu"))
UNITS.update(_prefixed("K", 0, TEMPERATURE, "mun"))
UNITS.update(_prefixed("N", 0, FORCE, "munpfaz"))
UNITS.update(_prefixed("J", 0, ENERGY, ""))
UNITS.update(_prefixed("C", 0, CHARGE, ""))
UNITS.update(_prefixed("A", 0, _d(A=1), "m"))
UNITS.update(_prefixed("V", 0, _d(m=2, kg=1, s=-3, A=-1), "m"))
UNITS.update(_prefixed("F", 0, _d(m=-2, kg=-1, s=4, A=2), ""))
UNITS.update(_prefixed("Pa", 0, _d(m=-1, kg=1, s=-2), ""))
UNITS.update(_prefixed("rad", 0, ANGLE, "muμ"))
UNITS.update({
    "eV": (Decimal("1.602176634e-19"), ENERGY),
    "e": (Decimal("1.602176634e-19"), CHARGE),
    "mbar": (Decimal(100), _d(m=-1, kg=1, s=-2)),
    "deg": (Decimal(math.pi / 180.0), ANGLE),
    "mol": (Decimal(1), _d(mol=1)),
    "cd": (Decimal(1), _d(cd=1)),
    "1": (Decimal(1), DIMENSIONLESS),
})
# Gauss is absent on purpose: "G" would be ambiguous next to the giga prefix.


@dataclass(frozen=True)
class Quantity:
    """A real value in SI base units together with its dimension exponents."""

    value: float
    dims: Dims = DIMENSIONLESS

    def __post_init__(self):
        if len(self.dims) != 7:
            raise DimensionError(f"dims must have 7 exponents, got {self.dims!r}")
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "dims", tuple(int(x) for x in self.dims))

    def _check(self, other: "Quantity", op: str) -> None:
        if self.dims != other.dims:
            raise DimensionError(
                f"cannot {op} {_unit_string(self.dims)!r} and {_unit_string(other.dims)!r}")

    @staticmethod
    def _lift(x) -> "Quantity":
        return x if isinstance(x, Quantity) else Quantity(float(x))

    def __add__(self, other):
        other = self._lift(other)
        self._check(other, "add")
        return Quantity(self.value + other.value, self.dims)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._lift(other)
        self._check(other, "subtract")
        return Quantity(self.value - other.value, self.dims)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __neg__(self):
        return Quantity(-self.value, self.dims)

    def __mul__(self, other):
        other = self._lift(other)
        return Quantity(self.value * other.value, _add(self.dims, other.dims))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        return Quantity(self.value / other.value, _add(self.dims, other.dims, -1))

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __pow__(self, k: int):
        if int(k) != k:
            raise DimensionError("only integer powers of quantities are supported")
        return Quantity(self.value ** int(k), _scale(self.dims, int(k)))

    def __lt__(self, other):
        other = self._lift(other)
        self._check(other, "compare")
        return self.value < other.value

    def __le__(self, other):
        other = self._lift(other)
        self._check(other, "compare")
        return self.value <= other.value

    def __gt__(self, other):
        return self._lift(other) < self

    def __ge__(self, other):
        return self._lift(other) <= self

    def __float__(self):
        if self.dims != DIMENSIONLESS:
            raise DimensionError(f"{self} is not dimensionless")
        return self.value

    def __str__(self):
        return format_quantity(self)


_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_FACTOR = re.compile(r"([A-Za-zμ]+|1)(?:\^([+-]?\d+))?$")


def _parse_units(expr: str) -> tuple[Decimal, Dims]:
    expr = expr.replace("·", "*").replace(" ", "")
    if not expr:
        return Decimal(1), DIMENSIONLESS
    tokens = re.split(r"([*/])", expr)
    scale, dims, sign = Decimal(1), DIMENSIONLESS, 1
    for i, tok in enumerate(tokens):
        if i % 2 == 1:
            sign = 1 if tok == "*" else -1
            continue
        m = _FACTOR.match(tok)
        if not m or m.group(1) not in UNITS:
            raise UnitError(f"unknown unit {tok!r} in {expr!r}")
        s, d = UNITS[m.group(1)]
        k = sign * int(m.group(2) or 1)
        scale *= s ** k
        dims = _add(dims, _scale(d, k))
    return scale, dims


def parse_quantity(text: str) -> Quantity:
    """Parse ``"<number> <unit-expression>"`` into an SI-normalised Quantity.

    Unit expressions combine whitelisted names with ``*`` (or ``·``), ``/``
    and integer exponents ``^n``, e.g. ``"1e4 T/m"``, ``"1e-4 e*cm"``,
    ``"9.81 m/s^2"``. A bare number is dimensionless.
    """
    if not isinstance(text, str) or not text.strip():
        raise UnitError("empty quantity string")
    text = text.strip()
    m = _NUMBER.match(text)
    if not m:
        raise UnitError(f"malformed number in {text!r}")
    rest = text[m.end():]
    if rest and not rest[0].isspace() and rest[0] not in "*·/":
        raise UnitError(f"malformed number in {text!r}")
    scale, dims = _parse_units(rest.strip())
    with localcontext() as ctx:
        ctx.prec = 60
        value = float(Decimal(m.group(0)) * scale)
    return Quantity(value, dims)


def _unit_string(dims: Dims) -> str:
    parts = []
    for sym, k in zip(_BASE_SYMBOLS, dims):
        if k == 1:
            parts.append(sym)
        elif k:
            parts.append(f"{sym}^{k}")
    return "*".join(parts)


def format_quantity(q: Quantity, unit: str | None = None) -> str:
    """Format as text that `parse_quantity` reads back exactly.

    Without ``unit`` the canonical base-unit form is used. A named ``unit``
    must be SI-coherent (scale 1) so the round trip stays bit-exact.
    """
    if unit is None:
        u = _unit_string(q.dims)
    else:
        scale, dims = _parse_units(unit)
        if dims != q.dims:
            raise DimensionError(f"{unit!r} does not match {_unit_string(q.dims)!r}")
        if scale != 1:
            raise UnitError(f"display unit {unit!r} is not SI-coherent")
        u = unit
    return f"{q.value!r} {u}".rstrip() if u else repr(q.value)


def to_si(q: Quantity, target_dims: Dims) -> float:
    """Return the SI value of ``q`` after checking it has ``target_dims``."""
    if tuple(q.dims) != tuple(target_dims):
        raise DimensionError(
            f"expected {_unit_string(target_dims) or 'dimensionless'}, "
            f"got {_unit_string(q.dims) or 'dimensionless'}")
    return q.value


Scalar = Union[float, int, Quantity, str]


def as_si(x: Scalar, dims: Dims) -> float:
    """Coerce a public argument to an SI float.

    Quantities and quantity strings are dimension-checked; bare numbers are
    taken to be SI already.
    """
    if isinstance(x, str):
        x = parse_quantity(x)
    if isinstance(x, Quantity):
        return to_si(x, dims)
    return float(x)
