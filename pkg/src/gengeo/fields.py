"""Exact scalar fields on polynomial charts.

A scalar field is a multivariate polynomial in real coordinates with
complex-rational coefficients, stored as a dict from exponent tuples to
coefficients.  Coordinates are real, so conjugation acts on coefficients only.
All ring operations are exact; evaluation stays exact on rational inputs and
downgrades to ``complex`` as soon as a floating-point input appears.

``RationalScalar`` closes the ring under the exact inverses needed by
symplectic constructions (polynomial numerator over polynomial denominator,
quotient-rule derivatives, cross-multiplied equality).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence, Union

RationalLike = Union[int, Fraction]


class FieldError(ValueError):
    """Malformed scalar-field operation (bad variable, failed exact division)."""


class PolynomialSyntaxError(FieldError):
    """String parse failure; carries the offending position."""

    def __init__(self, message: str, text: str, pos: int):
        super().__init__(f"{message} (position {pos} in {text!r})")
        self.message = message
        self.text = text
        self.pos = pos


def _var_key(name: str):
    # canonical variable order: x1, x2, ... by index, then other names, t last
    if name == "t":
        return (2, 0, "")
    if name.startswith("x") and name[1:].isdigit():
        return (0, int(name[1:]), "")
    return (1, 0, name)


def canonical_variables(names: Iterable[str]) -> tuple:
    return tuple(sorted(set(names), key=_var_key))


class CRational:
    """Complex number with exact rational real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", Fraction(re))
        object.__setattr__(self, "im", Fraction(im))

    def __setattr__(self, *a):
        raise AttributeError("CRational is immutable")

    @classmethod
    def coerce(cls, value) -> "CRational":
        if isinstance(value, CRational):
            return value
        if isinstance(value, (int, Fraction)):
            return cls(value)
        if isinstance(value, float):
            return cls(Fraction(value))
        if isinstance(value, complex):
            return cls(Fraction(value.real), Fraction(value.imag))
        raise TypeError(f"cannot interpret {value!r} as a complex rational")

    @property
    def is_zero(self) -> bool:
        return not self.re and not self.im

    def __bool__(self):
        return not self.is_zero

    @classmethod
    def _coerce_or_none(cls, value):
        try:
            return cls.coerce(value)
        except TypeError:
            return None

    def __add__(self, other):
        other = CRational._coerce_or_none(other)
        if other is None:
            return NotImplemented
        return CRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return CRational(-self.re, -self.im)

    def __sub__(self, other):
        other = CRational._coerce_or_none(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = CRational._coerce_or_none(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = CRational._coerce_or_none(other)
        if other is None:
            return NotImplemented
        return CRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = CRational.coerce(other)
        norm = other.re * other.re + other.im * other.im
        if not norm:
            raise ZeroDivisionError("division by zero complex rational")
        return CRational(
            (self.re * other.re + self.im * other.im) / norm,
            (self.im * other.re - self.re * other.im) / norm,
        )

    def __pow__(self, n: int):
        if n < 0:
            return CRational(1) / self ** (-n)
        out = CRational(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def conjugate(self) -> "CRational":
        return CRational(self.re, -self.im)

    def __eq__(self, other):
        try:
            other = CRational.coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def to_complex(self) -> complex:
        return complex(self.re) + 1j * complex(self.im)

    __complex__ = to_complex

    def __str__(self):
        return format_coefficient(self)

    def __repr__(self):
        return f"CRational({self.re!r}, {self.im!r})"


I_UNIT = CRational(0, 1)
_ZERO = CRational(0)


def _frac_str(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def format_coefficient(c: CRational) -> str:
    """Render a coefficient in the scenario grammar (`a`, `a/b`, `i`, `(a)+(b)i`)."""
    if not c.im:
        return _frac_str(c.re)
    if not c.re:
        if c.im == 1:
            return "i"
        if c.im == -1:
            return "-i"
        q = _frac_str(abs(c.im))
        body = f"({q})i" if "/" in q else f"{q}i"
        return f"-{body}" if c.im < 0 else body
    sign = "-" if c.im < 0 else "+"
    return f"({_frac_str(c.re)}){sign}({_frac_str(abs(c.im))})i"


class ScalarField:
    """Immutable polynomial in an ordered tuple of real coordinates."""

    __slots__ = ("variables", "terms", "_hash")

    def __init__(self, variables: Sequence[str], terms: Mapping[tuple, CRational]):
        object.__setattr__(self, "variables", tuple(variables))
        clean = {}
        width = len(self.variables)
        for exps, coef in terms.items():
            coef = CRational.coerce(coef)
            if coef.is_zero:
                continue
            exps = tuple(exps)
            if len(exps) != width:
                raise FieldError(
                    f"exponent tuple {exps} does not match variables {self.variables}"
                )
            clean[exps] = clean[exps] + coef if exps in clean else coef
        object.__setattr__(
            self, "terms", {e: c for e, c in clean.items() if not c.is_zero}
        )
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, *a):
        raise AttributeError("ScalarField is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, variables: Sequence[str]) -> "ScalarField":
        return cls(variables, {})

    @classmethod
    def constant(cls, value, variables: Sequence[str]) -> "ScalarField":
        c = CRational.coerce(value)
        width = len(tuple(variables))
        return cls(variables, {(0,) * width: c})

    @classmethod
    def one(cls, variables: Sequence[str]) -> "ScalarField":
        return cls.constant(1, variables)

    @classmethod
    def coordinate(cls, name: str, variables: Sequence[str]) -> "ScalarField":
        variables = tuple(variables)
        if name not in variables:
            raise FieldError(f"coordinate {name!r} not among variables {variables}")
        exps = tuple(1 if v == name else 0 for v in variables)
        return cls(variables, {exps: CRational(1)})

    # -- bookkeeping -------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def degree_in(self, name: str) -> int:
        if name not in self.variables:
            return 0
        k = self.variables.index(name)
        return max((e[k] for e in self.terms), default=0)

    def constant_term(self) -> CRational:
        return self.terms.get((0,) * len(self.variables), _ZERO)

    def used_variables(self) -> tuple:
        used = set()
        for exps in self.terms:
            for v, e in zip(self.variables, exps):
                if e:
                    used.add(v)
        return canonical_variables(used)

    def embed(self, variables: Sequence[str]) -> "ScalarField":
        """Reindex onto a superset of variables."""
        variables = tuple(variables)
        if variables == self.variables:
            return self
        pos = {}
        for v in self.variables:
            if v not in variables:
                if self.degree_in(v):
                    raise FieldError(f"cannot drop used variable {v!r}")
            else:
                pos[v] = variables.index(v)
        width = len(variables)
        terms = {}
        for exps, coef in self.terms.items():
            new = [0] * width
            for v, e in zip(self.variables, exps):
                if e:
                    new[pos[v]] = e
            key = tuple(new)
            terms[key] = terms[key] + coef if key in terms else coef
        return ScalarField(variables, terms)

    def _canonical(self):
        used = self.used_variables()
        if used == self.variables:
            reduced = self
        else:
            keep = [self.variables.index(v) for v in used]
            terms = {}
            for exps, coef in self.terms.items():
                key = tuple(exps[k] for k in keep)
                terms[key] = terms[key] + coef if key in terms else coef
            reduced = ScalarField(used, terms)
        return (reduced.variables, frozenset(reduced.terms.items()))

    def __eq__(self, other):
        if isinstance(other, RationalScalar):
            return other == self
        if isinstance(other, (int, Fraction, CRational)):
            other = ScalarField.constant(other, self.variables)
        if not isinstance(other, ScalarField):
            return NotImplemented
        return self._canonical() == other._canonical()

    def __hash__(self):
        if self._hash is None:
            object.__setattr__(self, "_hash", hash(self._canonical()))
        return self._hash

    # -- ring operations ---------------------------------------------------

    def _aligned(self, other: "ScalarField"):
        if self.variables == other.variables:
            return self, other
        joint = canonical_variables(self.variables + other.variables)
        return self.embed(joint), other.embed(joint)

    def __add__(self, other):
        if isinstance(other, RationalScalar):
            return NotImplemented
        if isinstance(other, (int, Fraction, CRational)):
            other = ScalarField.constant(other, self.variables)
        if not isinstance(other, ScalarField):
            return NotImplemented
        a, b = self._aligned(other)
        terms = dict(a.terms)
        for exps, coef in b.terms.items():
            terms[exps] = terms[exps] + coef if exps in terms else coef
        return ScalarField(a.variables, terms)

    __radd__ = __add__

    def __neg__(self):
        return ScalarField(self.variables, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, RationalScalar):
            return NotImplemented
        if isinstance(other, (int, Fraction, CRational)):
            other = ScalarField.constant(other, self.variables)
        if not isinstance(other, ScalarField):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, RationalScalar):
            return NotImplemented
        if isinstance(other, (int, Fraction, CRational)):
            c = CRational.coerce(other)
            if c.is_zero:
                return ScalarField.zero(self.variables)
            return ScalarField(
                self.variables, {e: k * c for e, k in self.terms.items()}
            )
        if not isinstance(other, ScalarField):
            return NotImplemented
        a, b = self._aligned(other)
        terms = {}
        for e1, c1 in a.terms.items():
            for e2, c2 in b.terms.items():
                key = tuple(x + y for x, y in zip(e1, e2))
                prod = c1 * c2
                terms[key] = terms[key] + prod if key in terms else prod
        return ScalarField(a.variables, terms)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise FieldError("negative powers are not polynomial")
        out = ScalarField.one(self.variables)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def conjugate(self) -> "ScalarField":
        return ScalarField(
            self.variables, {e: c.conjugate() for e, c in self.terms.items()}
        )

    # -- calculus ----------------------------------------------------------

    def _var_index(self, var) -> int:
        if isinstance(var, int):
            if not 0 <= var < len(self.variables):
                raise FieldError(f"variable index {var} out of range")
            return var
        if var not in self.variables:
            raise FieldError(f"unknown variable {var!r} (have {self.variables})")
        return self.variables.index(var)

    def partial(self, var) -> "ScalarField":
        """Exact partial derivative by variable name or index."""
        k = self._var_index(var)
        terms = {}
        for exps, coef in self.terms.items():
            e = exps[k]
            if not e:
                continue
            key = exps[:k] + (e - 1,) + exps[k + 1 :]
            add = coef * e
            terms[key] = terms[key] + add if key in terms else add
        return ScalarField(self.variables, terms)

    def evaluate(self, point: Sequence):
        """Horner-style evaluation; exact on rational inputs, complex otherwise."""
        point = list(point)
        if len(point) != len(self.variables):
            raise FieldError(
                f"point has {len(point)} entries, expected {len(self.variables)}"
            )
        exact = all(isinstance(p, (int, Fraction, CRational)) for p in point)
        if exact:
            vals = [CRational.coerce(p) for p in point]
            one = CRational(1)
        else:
            vals = [
                p.to_complex() if isinstance(p, CRational) else complex(p)
                for p in point
            ]
            one = 1 + 0j
        return self._horner(list(self.terms.items()), 0, vals, one)

    def _horner(self, items, k, vals, one):
        if not items:
            return one * 0
        if k == len(self.variables):
            # all exponents consumed; items holds a single constant
            total = one * 0
            for _, coef in items:
                total = total + (coef if isinstance(one, CRational) else coef.to_complex())
            return total
        groups = {}
        for exps, coef in items:
            groups.setdefault(exps[k], []).append((exps, coef))
        x = vals[k]
        acc = one * 0
        prev = None
        for e in sorted(groups, reverse=True):
            sub = self._horner(groups[e], k + 1, vals, one)
            if prev is None:
                acc = sub
            else:
                acc = acc * x ** (prev - e) + sub
            prev = e
        if prev:
            acc = acc * x ** prev
        return acc

    def substitute_value(self, name: str, value) -> "ScalarField":
        """Exact substitution of one variable; the variable leaves the tuple."""
        k = self._var_index(name)
        value = CRational.coerce(value)
        rest = self.variables[:k] + self.variables[k + 1 :]
        terms = {}
        for exps, coef in self.terms.items():
            key = exps[:k] + exps[k + 1 :]
            add = coef * value ** exps[k]
            terms[key] = terms[key] + add if key in terms else add
        return ScalarField(rest, terms)

    def substitute_scale(self, scale_var: str = "t") -> "ScalarField":
        """Return f(t*x): each monomial of total degree m picks up t^m."""
        if scale_var in self.variables and self.degree_in(scale_var):
            raise FieldError(
                f"substitute_scale: field already depends on {scale_var!r}"
            )
        new_vars = canonical_variables(self.variables + (scale_var,))
        base = self.embed(new_vars)
        k = new_vars.index(scale_var)
        terms = {}
        for exps, coef in base.terms.items():
            m = sum(exps) - exps[k]
            key = exps[:k] + (exps[k] + m,) + exps[k + 1 :]
            terms[key] = terms[key] + coef if key in terms else coef
        return ScalarField(new_vars, terms)

    def exact_div(self, divisor: "ScalarField") -> "ScalarField":
        """Exact polynomial quotient; raises FieldError when not divisible."""
        if isinstance(divisor, (int, Fraction, CRational)):
            c = CRational.coerce(divisor)
            if c.is_zero:
                raise FieldError("division by zero")
            return self * (CRational(1) / c)
        a, b = self._aligned(divisor)
        if b.is_zero:
            raise FieldError("division by zero polynomial")
        lead_b = _leading(b)
        rem = dict(a.terms)
        quo = {}
        while rem:
            lead_r = max(rem, key=_grlex_key)
            diff = tuple(x - y for x, y in zip(lead_r, lead_b))
            if any(d < 0 for d in diff):
                raise FieldError("polynomial division is not exact")
            c = rem[lead_r] / b.terms[lead_b]
            quo[diff] = quo.get(diff, _ZERO) + c
            for e2, c2 in b.terms.items():
                key = tuple(x + y for x, y in zip(diff, e2))
                val = rem.get(key, _ZERO) - c * c2
                if val.is_zero:
                    rem.pop(key, None)
                else:
                    rem[key] = val
        return ScalarField(a.variables, quo)

    # -- output ------------------------------------------------------------

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: _grlex_key(kv[0]), reverse=True)

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for exps, coef in self.sorted_terms():
            mono = "*".join(
                v if e == 1 else f"{v}^{e}"
                for v, e in zip(self.variables, exps)
                if e
            )
            cs = format_coefficient(coef)
            if mono:
                if cs == "1":
                    body = mono
                elif cs == "-1":
                    body = f"-{mono}"
                else:
                    if "+" in cs[1:] or "-" in cs[1:]:
                        cs = f"({cs})"
                    body = f"{cs}*{mono}"
            else:
                body = cs
            if parts and not body.startswith("-"):
                parts.append(f"+ {body}")
            elif parts:
                parts.append(f"- {body[1:]}")
            else:
                parts.append(body)
        return " ".join(parts)

    def __repr__(self):
        return f"ScalarField({self})"

    def compile_numeric(self) -> Callable[[Sequence[float]], complex]:
        """Closure for fast repeated float evaluation."""
        items = [
            (coef.to_complex(), exps)
            for exps, coef in self.sorted_terms()
        ]

        def ev(point) -> complex:
            total = 0j
            for coef, exps in items:
                v = coef
                for p, e in zip(point, exps):
                    if e:
                        v *= p**e
                total += v
            return total

        return ev


def _grlex_key(exps: tuple):
    return (sum(exps), exps)


def _leading(f: ScalarField) -> tuple:
    return max(f.terms, key=_grlex_key)


class RationalScalar:
    """Exact quotient of scalar fields; denominator normalized monic."""

    __slots__ = ("num", "den")

    def __init__(self, num: ScalarField, den: ScalarField):
        if den.is_zero:
            raise FieldError("zero denominator")
        num, den = num._aligned(den)
        # reduce when the division happens to be exact, then normalize monic
        if not num.is_zero:
            try:
                num = num.exact_div(den)
                den = ScalarField.one(num.variables)
            except FieldError:
                pass
        lead = den.terms[_leading(den)]
        if lead != CRational(1):
            inv = CRational(1) / lead
            num = num * inv
            den = den * inv
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __setattr__(self, *a):
        raise AttributeError("RationalScalar is immutable")

    @classmethod
    def coerce(cls, value) -> "RationalScalar":
        if isinstance(value, RationalScalar):
            return value
        if isinstance(value, ScalarField):
            return cls(value, ScalarField.one(value.variables))
        if isinstance(value, (int, Fraction, CRational)):
            f = ScalarField.constant(value, ())
            return cls(f, ScalarField.one(()))
        raise TypeError(f"cannot interpret {value!r} as a rational scalar")

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    def __bool__(self):
        return not self.is_zero

    @property
    def variables(self) -> tuple:
        return self.num.variables

    def is_polynomial(self) -> bool:
        return self.den == ScalarField.one(self.den.variables)

    def as_polynomial(self) -> ScalarField:
        if not self.is_polynomial():
            raise FieldError(f"not a polynomial: denominator {self.den}")
        return self.num

    def __add__(self, other):
        other = RationalScalar.coerce(other)
        return RationalScalar(
            self.num * other.den + other.num * self.den, self.den * other.den
        )

    __radd__ = __add__

    def __neg__(self):
        return RationalScalar(-self.num, self.den)

    def __sub__(self, other):
        return self + (-RationalScalar.coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = RationalScalar.coerce(other)
        return RationalScalar(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = RationalScalar.coerce(other)
        if other.is_zero:
            raise ZeroDivisionError("division by zero rational scalar")
        return RationalScalar(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other):
        return RationalScalar.coerce(other) / self

    def __pow__(self, n: int):
        if n < 0:
            return (RationalScalar.coerce(1) / self) ** (-n)
        return RationalScalar(self.num**n, self.den**n)

    def conjugate(self) -> "RationalScalar":
        return RationalScalar(self.num.conjugate(), self.den.conjugate())

    def partial(self, var) -> "RationalScalar":
        # num and den share a variable tuple by construction
        num, den = self.num, self.den
        return RationalScalar(
            num.partial(var) * den - num * den.partial(var), den * den
        )

    def evaluate(self, point: Sequence):
        top = self.num.evaluate(point)
        bot = self.den.evaluate(point)
        if isinstance(top, CRational):
            return top / bot
        if bot == 0:
            raise ZeroDivisionError("denominator vanishes at evaluation point")
        return top / bot

    def substitute_value(self, name: str, value) -> "RationalScalar":
        num = self.num.substitute_value(name, value) if name in self.num.variables else self.num
        den = self.den.substitute_value(name, value) if name in self.den.variables else self.den
        return RationalScalar(num, den)

    def substitute_scale(self, scale_var: str = "t") -> "RationalScalar":
        return RationalScalar(
            self.num.substitute_scale(scale_var), self.den.substitute_scale(scale_var)
        )

    def __eq__(self, other):
        try:
            other = RationalScalar.coerce(other)
        except TypeError:
            return NotImplemented
        return (self.num * other.den - other.num * self.den).is_zero

    def __hash__(self):
        # hash through the reduced form when polynomial; otherwise a coarse key
        if self.is_polynomial():
            return hash(self.num)
        return hash((self.num, self.den))

    def __str__(self):
        if self.is_polynomial():
            return str(self.num)
        return f"({self.num}) / ({self.den})"

    def __repr__(self):
        return f"RationalScalar({self})"

    def compile_numeric(self):
        fn, fd = self.num.compile_numeric(), self.den.compile_numeric()
        if self.is_polynomial():
            return fn

        def ev(point) -> complex:
            return fn(point) / fd(point)

        return ev


Scalar = Union[ScalarField, RationalScalar]


def as_scalar(value, variables: Sequence[str] = ()) -> Scalar:
    if isinstance(value, (ScalarField, RationalScalar)):
        return value
    return ScalarField.constant(value, variables)


def scalar_is_polynomial(s: Scalar) -> bool:
    return isinstance(s, ScalarField) or s.is_polynomial()


def partial_or_zero(s: Scalar, name: str) -> Scalar:
    """Partial derivative treating absent coordinates as constants."""
    if name in s.variables:
        return s.partial(name)
    if isinstance(s, ScalarField):
        return ScalarField.zero(s.variables)
    return RationalScalar.coerce(ScalarField.zero(s.variables))


def imag_part(s: Scalar) -> Scalar:
    """(s - conj s) / 2i, exact."""
    diff = s - s.conjugate()
    half_i = CRational(0, Fraction(-1, 2))  # 1/(2i) = -i/2
    return diff * half_i


def real_part(s: Scalar) -> Scalar:
    return (s + s.conjugate()) * Fraction(1, 2)


# ---------------------------------------------------------------------------
# string grammar
# ---------------------------------------------------------------------------


class _Parser:
    """Recursive-descent parser for the polynomial string grammar.

    poly   := ['+'|'-'] term (('+'|'-') term)*
    term   := factor ('*' factor)*
    factor := atom ['^' digits]
    atom   := rational ['i'] | 'i' | variable | '(' poly ')' ['i']
    """

    def __init__(self, text: str, variables: Sequence[str]):
        self.text = text
        self.variables = tuple(variables)
        self.pos = 0

    def fail(self, message: str):
        raise PolynomialSyntaxError(message, self.text, self.pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self) -> ScalarField:
        if not self.text.strip():
            self.fail("empty polynomial")
        value = self.parse_poly()
        self.skip_ws()
        if self.pos != len(self.text):
            self.fail(f"unexpected character {self.text[self.pos]!r}")
        return value

    def parse_poly(self, stop=()) -> ScalarField:
        total = ScalarField.zero(self.variables)
        first = True
        while True:
            ch = self.peek()
            if first:
                sign = 1
                if ch in "+-":
                    sign = -1 if ch == "-" else 1
                    self.pos += 1
                total = total + self.parse_term() * sign
                first = False
                continue
            if ch in stop or ch == "":
                return total
            if ch not in "+-":
                self.fail(f"expected '+', '-' or end, found {ch!r}")
            sign = -1 if ch == "-" else 1
            self.pos += 1
            total = total + self.parse_term() * sign

    def parse_term(self) -> ScalarField:
        value = self.parse_factor()
        while self.peek() == "*":
            self.pos += 1
            value = value * self.parse_factor()
        return value

    def parse_factor(self) -> ScalarField:
        value = self.parse_atom()
        if self.peek() == "^":
            self.pos += 1
            self.skip_ws()
            digits = self._take_digits("exponent")
            value = value ** int(digits)
            if self.peek() == "^":
                self.fail("repeated '^'")
        return value

    def _take_digits(self, what: str) -> str:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if self.pos == start:
            self.fail(f"expected digits for {what}")
        return self.text[start : self.pos]

    def parse_atom(self) -> ScalarField:
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            inner = self.parse_poly(stop=")")
            if self.peek() != ")":
                self.fail("unbalanced parenthesis")
            self.pos += 1
            if self.peek() == "i" and not self._identifier_continues(self.pos + 1):
                self.pos += 1
                inner = inner * I_UNIT
            return inner
        if ch.isdigit():
            num = self._take_digits("number")
            if self.pos < len(self.text) and self.text[self.pos] == ".":
                self.fail("decimal literals are not part of the grammar; use a/b")
            den = "1"
            if self.peek() == "/":
                save = self.pos
                self.pos += 1
                if not self.peek().isdigit():
                    self.pos = save
                else:
                    den = self._take_digits("denominator")
            coef = CRational(Fraction(int(num), int(den)))
            if self.peek() == "i" and not self._identifier_continues(self.pos + 1):
                self.pos += 1
                coef = coef * I_UNIT
            return ScalarField.constant(coef, self.variables)
        if ch == "i" and not self._identifier_continues(self.pos + 1):
            self.pos += 1
            return ScalarField.constant(I_UNIT, self.variables)
        if ch.isalpha():
            start = self.pos
            while self.pos < len(self.text) and (
                self.text[self.pos].isalnum() or self.text[self.pos] == "_"
            ):
                self.pos += 1
            name = self.text[start : self.pos]
            if name not in self.variables:
                self.pos = start
                self.fail(
                    f"unknown variable {name!r} (allowed: {', '.join(self.variables) or 'none'})"
                )
            return ScalarField.coordinate(name, self.variables)
        if ch == "":
            self.fail("unexpected end of input")
        self.fail(f"unexpected character {ch!r}")

    def _identifier_continues(self, pos: int) -> bool:
        return pos < len(self.text) and (
            self.text[pos].isalnum() or self.text[pos] == "_"
        )


def parse_polynomial(text: str, variables: Sequence[str]) -> ScalarField:
    """Parse the scenario polynomial grammar, e.g. ``(1/2)*x1^2*t - 3*x2 + i*x1``."""
    return _Parser(text, variables).parse()
