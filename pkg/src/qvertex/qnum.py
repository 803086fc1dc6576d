"""Exact rational arithmetic on truncated q-series with rational exponents.

A :class:`QSeries` is a finite dict of exact rational coefficients indexed by
exponents living on a lattice (1/den)*Z, together with a truncation order:
exponents at or above the truncation are unknown.  A truncation of ``None``
means the series is known exactly at every order (a Laurent polynomial).

All coefficients are :class:`fractions.Fraction`; nothing in this module (or
anywhere downstream) touches floating point.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd

Rational = Fraction

__all__ = [
    "Rational",
    "QSeries",
    "Monomial",
    "QError",
    "NonInvertible",
    "BranchUndefined",
    "NonTruncating",
    "OutOfRange",
    "qs",
    "one",
    "zero",
    "q_int",
    "q_factorial",
    "q_binomial",
    "pochhammer",
    "theta",
    "eta",
    "q_gamma",
    "q_beta",
    "binom_pow",
    "series_to_record",
    "series_from_record",
    "series_to_csv",
    "series_from_csv",
]


class QError(Exception):
    pass


class NonInvertible(QError):
    pass


class BranchUndefined(QError):
    pass


class NonTruncating(QError):
    pass


class OutOfRange(QError):
    pass


def _lcm(a, b):
    return a * b // gcd(a, b)


class QSeries:
    """Truncated Laurent series in q with Fraction coefficients.

    ``terms`` maps scaled exponents (exponent * den) to coefficients; ``trunc``
    is the scaled truncation order, or None for an exact polynomial.
    """

    __slots__ = ("den", "terms", "trunc")

    def __init__(self, terms=None, trunc=None, den=1, _clean=True):
        self.den = den
        self.terms = dict(terms) if terms else {}
        self.trunc = trunc
        if _clean:
            self._clean()

    def _clean(self):
        t = self.trunc
        dead = [e for e, c in self.terms.items() if c == 0 or (t is not None and e >= t)]
        for e in dead:
            del self.terms[e]
        if self.den == 1:
            return
        # keep the lattice minimal so convolutions stay cheap
        g = self.den
        for e in self.terms:
            g = gcd(g, e)
            if g == 1:
                return
        if t is not None:
            g = gcd(g, t)
        if g > 1:
            self.den //= g
            self.terms = {e // g: c for e, c in self.terms.items()}
            if t is not None:
                self.trunc = t // g

    # -- constructors -----------------------------------------------------

    @staticmethod
    def from_terms(pairs, trunc=None):
        """Build from (exponent, coeff) pairs; exponents and trunc may be Fractions."""
        den = 1
        for e, _ in pairs:
            den = _lcm(den, Fraction(e).denominator)
        if trunc is not None:
            den = _lcm(den, Fraction(trunc).denominator)
        terms = {}
        for e, c in pairs:
            key = int(Fraction(e) * den)
            terms[key] = terms.get(key, Fraction(0)) + Fraction(c)
        t = None if trunc is None else int(Fraction(trunc) * den)
        return QSeries(terms, t, den)

    @staticmethod
    def const(c):
        c = Fraction(c)
        return QSeries({0: c} if c else {}, None, 1)

    # -- inspection --------------------------------------------------------

    def is_zero(self):
        return not self.terms

    def truncation(self):
        return None if self.trunc is None else Fraction(self.trunc, self.den)

    def valuation(self):
        """Lowest known exponent, or None for a series with no known terms."""
        if not self.terms:
            return None
        return Fraction(min(self.terms), self.den)

    def top_exponent(self):
        if not self.terms:
            return None
        return Fraction(max(self.terms), self.den)

    def leading(self):
        if not self.terms:
            raise NonInvertible("zero series has no leading term")
        e = min(self.terms)
        return Fraction(e, self.den), self.terms[e]

    def coeff(self, e):
        e = Fraction(e)
        scaled = e * self.den
        if scaled.denominator != 1:
            return Fraction(0)
        return self.terms.get(int(scaled), Fraction(0))

    def items(self):
        for e in sorted(self.terms):
            yield Fraction(e, self.den), self.terms[e]

    # -- ring ops ----------------------------------------------------------

    def _aligned(self, other):
        den = _lcm(self.den, other.den)
        a, b = den // self.den, den // other.den
        sa = {e * a: c for e, c in self.terms.items()}
        sb = {e * b: c for e, c in other.terms.items()}
        ta = None if self.trunc is None else self.trunc * a
        tb = None if other.trunc is None else other.trunc * b
        return den, sa, ta, sb, tb

    def __add__(self, other):
        if not isinstance(other, QSeries):
            other = QSeries.const(other)
        den, sa, ta, sb, tb = self._aligned(other)
        if ta is None:
            t = tb
        elif tb is None:
            t = ta
        else:
            t = min(ta, tb)
        for e, c in sb.items():
            sa[e] = sa.get(e, Fraction(0)) + c
        return QSeries(sa, t, den)

    __radd__ = __add__

    def __neg__(self):
        return QSeries({e: -c for e, c in self.terms.items()}, self.trunc, self.den, _clean=False)

    def __sub__(self, other):
        if not isinstance(other, QSeries):
            other = QSeries.const(other)
        return self + (-other)

    def __rsub__(self, other):
        return QSeries.const(other) - self

    def scale(self, c):
        c = Fraction(c)
        if c == 0:
            return QSeries({}, self.trunc, self.den)
        return QSeries({e: c * v for e, v in self.terms.items()}, self.trunc, self.den, _clean=False)

    def __mul__(self, other):
        if not isinstance(other, QSeries):
            return self.scale(other)
        if (not self.terms and self.trunc is None) or (not other.terms and other.trunc is None):
            return QSeries({}, None, 1)
        den, sa, ta, sb, tb = self._aligned(other)
        va = min(sa) if sa else ta
        vb = min(sb) if sb else tb
        cands = []
        if ta is not None:
            cands.append(ta + vb)
        if tb is not None:
            cands.append(tb + va)
        t = min(cands) if cands else None
        # integer fast path: convolve over a common coefficient denominator
        da = 1
        for c in sa.values():
            da = da * (c.denominator // gcd(da, c.denominator))
        db = 1
        for c in sb.values():
            db = db * (c.denominator // gcd(db, c.denominator))
        ia = [(e, int(c * da)) for e, c in sa.items()]
        ib = [(e, int(c * db)) for e, c in sb.items()]
        acc = {}
        for ea, ca in ia:
            for eb, cb in ib:
                e = ea + eb
                if t is not None and e >= t:
                    continue
                acc[e] = acc.get(e, 0) + ca * cb
        dd = da * db
        out = {e: Fraction(v, dd) for e, v in acc.items() if v}
        return QSeries(out, t, den)

    __rmul__ = __mul__

    def truncate(self, order):
        order = Fraction(order)
        den = _lcm(self.den, order.denominator)
        a = den // self.den
        t = int(order * den)
        if self.trunc is not None and self.trunc * a < t:
            t = self.trunc * a
        if a == 1 and self.trunc == t:
            return self
        return QSeries({e * a: c for e, c in self.terms.items()}, t, den)

    def shift(self, e):
        """Multiply by q**e."""
        e = Fraction(e)
        den = _lcm(self.den, e.denominator)
        a = den // self.den
        k = int(e * den)
        return QSeries(
            {x * a + k: c for x, c in self.terms.items()},
            None if self.trunc is None else self.trunc * a + k,
            den,
        )

    def inv(self, order=None):
        """Multiplicative inverse, truncated at ``order`` (or the implied order)."""
        if not self.terms:
            raise NonInvertible("cannot invert the zero series")
        v, lead = self.leading()
        t = self.truncation()
        if t is None and order is None:
            if len(self.terms) == 1:
                return QSeries.from_terms([(-v, Fraction(1) / lead)])
            raise NonTruncating("inverse of an exact non-monomial needs an explicit order")
        # self = lead * q^v * (1 + u); the (1+u)-inverse is computed to ``span``
        span = None if t is None else t - v
        if order is not None:
            want = Fraction(order) + v
            span = want if span is None else min(span, want)
        u = (self.shift(-v).scale(Fraction(1) / lead) - 1).truncate(span)
        out = QSeries.const(1)
        acc = QSeries.const(1)
        if not u.is_zero():
            uv = u.valuation()
            if uv <= 0:
                raise NonInvertible("series has an ill-ordered tail")
            n = 1
            while n * uv < span:
                acc = (acc * u).truncate(span)
                if acc.is_zero():
                    break
                out = out + acc.scale((-1) ** n)
                n += 1
        return out.truncate(span).shift(-v).scale(Fraction(1) / lead)

    def exp(self, order=None):
        """exp of a series with strictly positive valuation."""
        t = self.truncation()
        if t is None:
            if self.is_zero():
                return QSeries.const(1)
            if order is None:
                raise NonTruncating("exp of an exact series needs an explicit order")
            t = Fraction(order)
        elif order is not None:
            t = min(t, Fraction(order))
        s = self.truncate(t)
        out = QSeries.const(1).truncate(t)
        if s.is_zero():
            return out
        v = s.valuation()
        if v <= 0:
            raise BranchUndefined("exp needs positive valuation")
        acc = QSeries.const(1)
        n = 1
        fact = 1
        while n * v < t:
            acc = (acc * s).truncate(t)
            if acc.is_zero():
                break
            fact *= n
            out = out + acc.scale(Fraction(1, fact))
            n += 1
        return out

    def log(self, order=None):
        """log of a series with leading term 1 at exponent 0."""
        if not self.terms:
            raise NonInvertible("log of zero")
        v, lead = self.leading()
        if v != 0 or lead != 1:
            raise BranchUndefined("log needs leading term 1 at exponent 0")
        t = self.truncation()
        if t is None:
            if len(self.terms) == 1:
                return QSeries({}, None, 1)
            if order is None:
                raise NonTruncating("log of an exact series needs an explicit order")
            t = Fraction(order)
        elif order is not None:
            t = min(t, Fraction(order))
        u = (self - 1).truncate(t)
        out = QSeries({}, None, 1).truncate(t)
        if u.is_zero():
            return out
        uv = u.valuation()
        acc = QSeries.const(1)
        n = 1
        while n * uv < t:
            acc = (acc * u).truncate(t)
            if acc.is_zero():
                break
            out = out + acc.scale(Fraction((-1) ** (n + 1), n))
            n += 1
        return out

    def pow(self, r, order=None):
        """Integer power of any series; rational power of a unit-coefficient monomial."""
        r = Fraction(r)
        if r.denominator == 1:
            n = int(r)
            if n == 0:
                return QSeries.const(1)
            if n < 0:
                return self.inv(order).pow(-n, order)
            out = QSeries.const(1)
            base = self
            while n:
                if n & 1:
                    out = out * base
                n >>= 1
                if n:
                    base = base * base
            if order is not None:
                out = out.truncate(order)
            return out
        if len(self.terms) != 1 or self.trunc is not None:
            raise BranchUndefined("fractional power of a non-monomial")
        e, c = self.leading()
        if c != 1:
            raise BranchUndefined("fractional power needs a unit coefficient")
        return QSeries.from_terms([(e * r, 1)])

    def __eq__(self, other):
        if not isinstance(other, QSeries):
            other = QSeries.const(other)
        _, sa, _, sb, _ = self._aligned(other)
        return sa == sb

    def __hash__(self):
        return hash((self.den, tuple(sorted(self.terms.items()))))

    def __repr__(self):
        if not self.terms:
            body = "0"
        else:
            bits = []
            for e in sorted(self.terms):
                c = self.terms[e]
                ex = Fraction(e, self.den)
                bits.append(f"{c}" if ex == 0 else f"{c}*q^({ex})")
            body = " + ".join(bits)
        t = self.truncation()
        return body if t is None else f"{body} + O(q^({t}))"


def qs(pairs, trunc=None):
    return QSeries.from_terms(pairs, trunc)


def one():
    return QSeries.const(1)


def zero():
    return QSeries({}, None, 1)


class Monomial:
    """c * q^e * prod(var^f); the carrier for prefactors and spectral arguments."""

    __slots__ = ("coef", "qexp", "vexp")

    def __init__(self, coef=1, qexp=0, vexp=None):
        self.coef = Fraction(coef)
        self.qexp = Fraction(qexp)
        self.vexp = {v: Fraction(e) for v, e in (vexp or {}).items() if e}
        if self.coef == 0:
            self.qexp = Fraction(0)
            self.vexp = {}

    @staticmethod
    def q(e=1):
        return Monomial(1, e)

    @staticmethod
    def var(name, e=1):
        return Monomial(1, 0, {name: e})

    def __mul__(self, other):
        if not isinstance(other, Monomial):
            return Monomial(self.coef * Fraction(other), self.qexp, self.vexp)
        v = dict(self.vexp)
        for k, e in other.vexp.items():
            v[k] = v.get(k, Fraction(0)) + e
        return Monomial(self.coef * other.coef, self.qexp + other.qexp, v)

    __rmul__ = __mul__

    def __pow__(self, r):
        r = Fraction(r)
        if self.coef == 1:
            c = Fraction(1)
        elif r.denominator == 1:
            c = self.coef ** int(r)
        elif self.coef == -1 and r.denominator % 2 == 1:
            c = Fraction(-1) if r.numerator % 2 else Fraction(1)
        else:
            raise BranchUndefined(f"fractional power of coefficient {self.coef}")
        return Monomial(c, self.qexp * r, {k: e * r for k, e in self.vexp.items()})

    def inverse(self):
        return self ** -1

    def is_pure_q(self):
        return not self.vexp

    def is_unit(self):
        return self.coef == 1

    def to_qseries(self):
        if self.vexp:
            raise BranchUndefined("monomial carries variables; not a q-series")
        if self.coef == 0:
            return zero()
        return QSeries.from_terms([(self.qexp, self.coef)])

    def __eq__(self, other):
        return (
            isinstance(other, Monomial)
            and self.coef == other.coef
            and self.qexp == other.qexp
            and self.vexp == other.vexp
        )

    def __hash__(self):
        return hash((self.coef, self.qexp, tuple(sorted(self.vexp.items()))))

    def __repr__(self):
        bits = [str(self.coef)]
        if self.qexp:
            bits.append(f"q^({self.qexp})")
        for v, e in sorted(self.vexp.items()):
            bits.append(f"{v}^({e})")
        return "*".join(bits)


# ---------------------------------------------------------------------------
# q-special functions
# ---------------------------------------------------------------------------


def q_int(n):
    """[n] = (q^n - q^-n)/(q - q^-1), a symmetric Laurent polynomial."""
    n = int(n)
    if n == 0:
        return zero()
    s = 1 if n > 0 else -1
    m = abs(n)
    return qs([(m - 1 - 2 * i, s) for i in range(m)])


def q_factorial(n):
    n = int(n)
    if n < 0:
        raise OutOfRange("q-factorial of a negative integer")
    out = one()
    for i in range(1, n + 1):
        out = out * q_int(i)
    return out


def _laurent_exact_div(num, den):
    """Exact quotient of Laurent polynomials (raises if division is not exact)."""
    if den.is_zero():
        raise NonInvertible("division by zero polynomial")
    if num.is_zero():
        return zero()
    qtop = num.top_exponent() - den.top_exponent()
    inv_order = qtop - num.valuation() + 1
    quot = (num * den.inv(order=inv_order)).truncate(qtop + 1)
    quot = qs([(e, c) for e, c in quot.items()])
    if not (quot * den) == num:
        raise NonInvertible("inexact polynomial division")
    return quot


def q_binomial(x, y):
    """[x]! / ([y]! [x-y]!) for 0 <= y <= x; a symmetric Laurent polynomial."""
    x, y = int(x), int(y)
    if not (0 <= y <= x):
        raise OutOfRange(f"q-binomial needs 0 <= {y} <= {x}")
    num = one()
    for i in range(x - y + 1, x + 1):
        num = num * q_int(i)
    return _laurent_exact_div(num, q_factorial(y))


def pochhammer(x, bases, order):
    """(x; b1[, b2])_inf = prod over m[,n] >= 0 of (1 - x*b1^m*b2^n), truncated.

    ``x`` may be a pure-q Monomial or a QSeries; bases are pure-q Monomials
    with positive exponent so the product truncates.
    """
    order = Fraction(order)
    if isinstance(x, Monomial):
        x = x.to_qseries()
    bases = list(bases)
    for b in bases:
        if not isinstance(b, Monomial) or b.vexp or b.qexp <= 0:
            raise NonTruncating("pochhammer base must be a pure q-monomial with positive exponent")
    if x.is_zero():
        return one().truncate(order)
    v = x.valuation()
    shifts = []
    if len(bases) == 1:
        b = bases[0].qexp
        m = 0
        while v + m * b < order:
            shifts.append(m * b)
            m += 1
    elif len(bases) == 2:
        b1, b2 = bases[0].qexp, bases[1].qexp
        m = 0
        while v + m * b1 < order:
            n = 0
            while v + m * b1 + n * b2 < order:
                shifts.append(m * b1 + n * b2)
                n += 1
            m += 1
    else:
        raise OutOfRange("pochhammer supports one or two bases")
    # negative-valuation factors eat into the known window; pad accordingly
    pad = order + sum(max(Fraction(0), -(v + s)) for s in shifts)
    out = one().truncate(pad)
    for s in shifts:
        out = out * (one() - x.shift(s))
    return out.truncate(order)


def theta(z, p, order):
    """Jacobi theta: (z;p)(p/z;p)(p;p), truncated at ``order``."""
    order = Fraction(order)
    if not isinstance(p, Monomial) or p.vexp or p.qexp <= 0:
        raise NonTruncating("theta base must be a pure q-monomial with positive exponent")
    if isinstance(z, QSeries):
        if len(z.terms) != 1 or z.trunc is not None:
            raise BranchUndefined("theta argument must be a monomial")
        e, c = z.leading()
        z = Monomial(c, e)
    a = pochhammer(z.to_qseries(), [p], order)
    b = pochhammer((p * z.inverse()).to_qseries(), [p], order)
    c = pochhammer(Monomial.q(p.qexp), [p], order)
    return (a * b * c).truncate(order)


def eta(p, order):
    """Dedekind eta: p^(1/24) * (p;p)_inf."""
    order = Fraction(order)
    if not isinstance(p, Monomial) or p.vexp or p.qexp <= 0:
        raise NonTruncating("eta base must be a pure q-monomial with positive exponent")
    body = pochhammer(Monomial.q(p.qexp), [p], order - Fraction(p.qexp, 24))
    return body.shift(Fraction(p.qexp, 24)).truncate(order)


def binom_pow(s, r, order):
    """(series)^r for rational r by the generalized binomial expansion.

    Requires leading term 1 at exponent 0.
    """
    r = Fraction(r)
    order = Fraction(order)
    v, lead = s.leading()
    if v != 0 or lead != 1:
        raise BranchUndefined("binomial power needs leading term 1 at exponent 0")
    u = (s - 1).truncate(order)
    if u.is_zero():
        return one().truncate(order)
    uv = u.valuation()
    if uv <= 0:
        raise BranchUndefined("binomial power needs a positive-valuation tail")
    out = one()
    acc = one()
    coef = Fraction(1)
    n = 1
    while n * uv < order:
        acc = (acc * u).truncate(order)
        if acc.is_zero():
            break
        coef = coef * (r - (n - 1)) / n
        out = out + acc.scale(coef)
        n += 1
    return out.truncate(order)


def q_gamma(z, p, order):
    """Gamma-type function: (p;p)/(p^z;p) * (1-p)^(1-z) on the exponent lattice."""
    z = Fraction(z)
    order = Fraction(order)
    if not isinstance(p, Monomial) or p.vexp or p.qexp <= 0:
        raise NonTruncating("gamma base must be a pure q-monomial with positive exponent")
    pz = Monomial.q(p.qexp * z)
    if z.denominator == 1 and z <= 0:
        raise BranchUndefined("gamma has a pole at nonpositive integers")
    pad = order + p.qexp + 1 + max(Fraction(0), -2 * pz.qexp)
    num = pochhammer(Monomial.q(p.qexp), [p], pad)
    den = pochhammer(pz, [p], pad)
    corr = binom_pow(one() - Monomial.q(p.qexp).to_qseries(), 1 - z, pad)
    return (num * den.inv(order=pad) * corr).truncate(order)


def q_beta(x, y, p, order):
    """Beta-type function via the gamma ratio."""
    order = Fraction(order)
    pad = order + 2 * p.qexp + 2
    gx = q_gamma(x, p, pad)
    gy = q_gamma(y, p, pad)
    gxy = q_gamma(Fraction(x) + Fraction(y), p, pad)
    return (gx * gy * gxy.inv(order=pad)).truncate(order)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def series_to_record(s):
    t = s.truncation()
    return {
        "lattice_denominator": s.den,
        "truncation": None if t is None else {"num": t.numerator, "den": t.denominator},
        "terms": [
            {
                "exp_num": e.numerator,
                "exp_den": e.denominator,
                "coef_num": c.numerator,
                "coef_den": c.denominator,
            }
            for e, c in s.items()
        ],
    }


def series_from_record(rec):
    t = rec.get("truncation")
    trunc = None if t is None else Fraction(t["num"], t["den"])
    pairs = [
        (Fraction(r["exp_num"], r["exp_den"]), Fraction(r["coef_num"], r["coef_den"]))
        for r in rec["terms"]
    ]
    return QSeries.from_terms(pairs, trunc)


def series_to_csv(s):
    lines = ["exp_num,exp_den,coef_num,coef_den"]
    for e, c in s.items():
        lines.append(f"{e.numerator},{e.denominator},{c.numerator},{c.denominator}")
    return "\n".join(lines) + "\n"


def series_from_csv(text):
    rows = [r for r in text.strip().splitlines()[1:] if r]
    pairs = []
    for r in rows:
        en, ed, cn, cd = (int(v) for v in r.split(","))
        pairs.append((Fraction(en, ed), Fraction(cn, cd)))
    return QSeries.from_terms(pairs)
