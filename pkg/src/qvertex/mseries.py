"""Laurent series in formal markers with QSeries coefficients.

Markers carry contour variables, the spectator position of the eta/xi
insertion, ratio variables of two-point functions, and the charge-sum
regulator.  Marker exponents are integers; q-content lives in the QSeries
coefficients.

Expansion decisions (direction, caps) are driven by an :class:`Ctx` holding
the target q-order, formal "sizes" for the markers (a size is the exponent a
of q^a that the marker stands in for; smaller values mean larger modulus) and
optional hard power caps per marker.
"""

from __future__ import annotations

from fractions import Fraction

from .qnum import Monomial, NonTruncating, QError, QSeries, one, zero

NUHAT = "~nu"  # charge-sum regulator marker; set to 1 at the end of a trace


class DomainClash(QError):
    pass


class Ctx:
    """Expansion context: q-order target, marker sizes, marker power caps.

    ``sizes`` drive truncation accounting (a conservative final-weight slope
    per marker power); ``dir_sizes`` drive expansion-direction decisions for
    closed factors (where the summation points actually sit) and default to
    ``sizes``.
    """

    def __init__(self, order, sizes=None, caps=None, window=None, dir_sizes=None):
        self.order = Fraction(order)
        self.sizes = {k: Fraction(v) for k, v in (sizes or {}).items()}
        self.caps = dict(caps or {})
        self.window = Fraction(window) if window is not None else self.order
        self.dir_sizes = dict(self.sizes)
        if dir_sizes:
            self.dir_sizes.update({k: Fraction(v) for k, v in dir_sizes.items()})

    def with_window(self, window):
        return Ctx(self.order, self.sizes, self.caps, window, self.dir_sizes)

    def size(self, qexp, mexp):
        s = Fraction(qexp)
        for v, e in mexp.items():
            s += self.sizes.get(v, Fraction(0)) * e
        return s

    def mono_size(self, mon):
        return self.size(mon.qexp, mon.vexp)

    def dir_size(self, mon):
        s = Fraction(mon.qexp)
        for v, e in mon.vexp.items():
            s += self.dir_sizes.get(v, Fraction(0)) * e
        return s

    def capped_out(self, mexp):
        for v, e in mexp.items():
            c = self.caps.get(v)
            if c is not None and abs(e) > c:
                return True
        return False


class MSeries:
    """dict of marker-exponent tuples -> QSeries, over a sorted var tuple."""

    __slots__ = ("vars", "terms")

    def __init__(self, vars=(), terms=None, _clean=True):
        self.vars = tuple(vars)
        self.terms = dict(terms or {})
        if _clean:
            dead = [k for k, v in self.terms.items() if v.is_zero() and v.trunc is None]
            for k in dead:
                del self.terms[k]

    # -- constructors ------------------------------------------------------

    @staticmethod
    def from_qs(s):
        if s.is_zero() and s.trunc is None:
            return MSeries()
        return MSeries((), {(): s})

    @staticmethod
    def from_const(c):
        return MSeries.from_qs(QSeries.const(c))

    @staticmethod
    def from_monomial(mon):
        for v, e in mon.vexp.items():
            if Fraction(e).denominator != 1:
                raise QError(f"marker {v} carries fractional exponent {e}")
        base = QSeries.from_terms([(mon.qexp, mon.coef)]) if mon.coef else zero()
        if mon.coef == 0:
            return MSeries()
        vars = tuple(sorted(mon.vexp))
        key = tuple(int(mon.vexp[v]) for v in vars)
        return MSeries(vars, {key: base})

    # -- alignment ---------------------------------------------------------

    def _expand_vars(self, vars):
        if vars == self.vars:
            return self
        pos = {v: i for i, v in enumerate(vars)}
        idx = [pos[v] for v in self.vars]
        terms = {}
        for k, s in self.terms.items():
            key = [0] * len(vars)
            for i, e in zip(idx, k):
                key[i] = e
            terms[tuple(key)] = s
        return MSeries(vars, terms, _clean=False)

    @staticmethod
    def _common(a, b):
        if a.vars == b.vars:
            return a, b
        vars = tuple(sorted(set(a.vars) | set(b.vars)))
        return a._expand_vars(vars), b._expand_vars(vars)

    # -- inspection ----------------------------------------------------------

    def is_zero(self):
        return all(s.is_zero() for s in self.terms.values())

    def is_marker_free(self, ignore=()):
        keep = [i for i, v in enumerate(self.vars) if v not in ignore]
        for k, s in self.terms.items():
            if s.is_zero():
                continue
            if any(k[i] != 0 for i in keep):
                return False
        return True

    def pure_qs(self):
        """Collapse to a QSeries; all marker powers must vanish."""
        out = zero()
        worst = None
        for k, s in self.terms.items():
            if any(k):
                if not s.is_zero():
                    raise QError(f"marker residue survives: {dict(zip(self.vars, k))} -> {s}")
                t = s.truncation()
                if t is not None:
                    worst = t if worst is None else min(worst, t)
                continue
            out = out + s
        if worst is not None:
            out = out.truncate(min(worst, out.truncation() or worst))
        return out

    def min_trunc(self):
        t = None
        for s in self.terms.values():
            st = s.truncation()
            if st is not None:
                t = st if t is None else min(t, st)
        return t

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, QSeries):
            other = MSeries.from_qs(other)
        a, b = MSeries._common(self, other)
        terms = dict(a.terms)
        for k, s in b.terms.items():
            terms[k] = terms[k] + s if k in terms else s
        return MSeries(a.vars, terms)

    def __neg__(self):
        return MSeries(self.vars, {k: -s for k, s in self.terms.items()}, _clean=False)

    def __sub__(self, other):
        if isinstance(other, QSeries):
            other = MSeries.from_qs(other)
        return self + (-other)

    def scale_qs(self, s):
        return MSeries(self.vars, {k: v * s for k, v in self.terms.items()})

    def mul(self, other, ctx=None):
        if isinstance(other, QSeries):
            return self.scale_qs(other)
        a, b = MSeries._common(self, other)
        out = {}
        for ka, sa in a.terms.items():
            for kb, sb in b.terms.items():
                k = tuple(x + y for x, y in zip(ka, kb))
                if ctx is not None:
                    mexp = dict(zip(a.vars, k))
                    if ctx.capped_out(mexp):
                        continue
                s = sa * sb
                if ctx is not None:
                    v = s.valuation()
                    if v is not None:
                        mexp = dict(zip(a.vars, k))
                        if ctx.size(v, mexp) >= ctx.window:
                            s = s.truncate(v)  # keep truncation info, drop terms
                    s = _trunc_by_size(s, dict(zip(a.vars, k)), ctx)
                if k in out:
                    out[k] = out[k] + s
                else:
                    out[k] = s
        return MSeries(a.vars, out)

    def __mul__(self, other):
        return self.mul(other)

    def mul_monomial(self, mon):
        return self.mul(MSeries.from_monomial(mon))

    def shift(self, qexp):
        return MSeries(self.vars, {k: s.shift(qexp) for k, s in self.terms.items()}, _clean=False)

    def truncate(self, order):
        return MSeries(self.vars, {k: s.truncate(order) for k, s in self.terms.items()})

    def truncate_sized(self, ctx):
        """Truncate each coefficient at ctx.order shifted by its marker sizes."""
        out = {}
        for k, s in self.terms.items():
            off = sum(ctx.sizes.get(v, Fraction(0)) * e for v, e in zip(self.vars, k))
            out[k] = s.truncate(ctx.order - off)
        return MSeries(self.vars, out)

    # -- marker operations -----------------------------------------------------

    def coeff_of(self, var, power):
        if var not in self.vars:
            return self if power == 0 else MSeries()
        i = self.vars.index(var)
        rest = self.vars[:i] + self.vars[i + 1 :]
        terms = {}
        for k, s in self.terms.items():
            if k[i] != power:
                continue
            terms[k[:i] + k[i + 1 :]] = terms.get(k[:i] + k[i + 1 :], zero()) + s
        return MSeries(rest, terms)

    def residue(self, var):
        """Coefficient of var^(-1)."""
        return self.coeff_of(var, -1)

    def powers_of(self, var):
        if var not in self.vars:
            return {0} if self.terms else set()
        i = self.vars.index(var)
        return {k[i] for k, s in self.terms.items() if not (s.is_zero() and s.trunc is None)}

    def subs_monomial(self, var, mon):
        """Substitute var -> mon (a Monomial possibly carrying other markers)."""
        if var not in self.vars:
            return self
        i = self.vars.index(var)
        rest = self.vars[:i] + self.vars[i + 1 :]
        out = MSeries(rest)
        for k, s in self.terms.items():
            e = k[i]
            piece = MSeries(rest, {k[:i] + k[i + 1 :]: s}, _clean=False)
            if e:
                piece = piece.mul(MSeries.from_monomial(mon ** e))
            out = out + piece
        return out

    def subs_one(self, var):
        """Substitute var -> 1."""
        if var not in self.vars:
            return self
        i = self.vars.index(var)
        rest = self.vars[:i] + self.vars[i + 1 :]
        out = {}
        for k, s in self.terms.items():
            key = k[:i] + k[i + 1 :]
            out[key] = out[key] + s if key in out else s
        return MSeries(rest, out)

    def exp(self, ctx):
        """exp of a series all of whose terms have positive size."""
        out = MSeries.from_qs(one().truncate(ctx.window))
        if self.is_zero():
            return out
        minsize = None
        for k, s in self.terms.items():
            v = s.valuation()
            if v is None:
                continue
            sz = ctx.size(v, dict(zip(self.vars, k)))
            minsize = sz if minsize is None else min(minsize, sz)
        if minsize is None:
            return out
        if minsize <= 0:
            raise NonTruncating(f"exp of a series with non-positive minimal size {minsize}")
        acc = MSeries.from_const(1)
        n = 1
        fact = 1
        while n * minsize < ctx.window:
            acc = acc.mul(self, ctx)
            if acc.is_zero():
                break
            fact *= n
            out = out + acc.scale_qs(QSeries.const(Fraction(1, fact)))
            n += 1
        return out

    def __eq__(self, other):
        if isinstance(other, QSeries):
            other = MSeries.from_qs(other)
        a, b = MSeries._common(self, other)
        keys = set(a.terms) | set(b.terms)
        for k in keys:
            if a.terms.get(k, zero()) != b.terms.get(k, zero()):
                return False
        return True

    def __repr__(self):
        if not self.terms:
            return "0"
        bits = []
        for k in sorted(self.terms):
            head = "*".join(f"{v}^{e}" for v, e in zip(self.vars, k) if e)
            s = self.terms[k]
            bits.append(f"[{head or '1'}] ({s})")
        return " + ".join(bits)


def _trunc_by_size(s, mexp, ctx):
    """Truncate a QSeries coefficient so its surviving terms stay inside the window."""
    off = sum(ctx.sizes.get(v, Fraction(0)) * e for v, e in mexp.items())
    return s.truncate(ctx.window - off)


# ---------------------------------------------------------------------------
# closed multiplicative factors
# ---------------------------------------------------------------------------


class Poch:
    """(1 - x*q^(b . m))^power over multi-indices m >= 0; bases may be empty.

    ``x`` is a Monomial (markers allowed), bases a tuple of positive Fractions.
    With no bases this is a plain (1 - x)^power factor.
    """

    __slots__ = ("x", "bases", "power")

    def __init__(self, x, bases=(), power=1):
        self.x = x
        self.bases = tuple(Fraction(b) for b in bases)
        for b in self.bases:
            if b <= 0:
                raise NonTruncating("poch factor base must be positive")
        self.power = int(power)

    def subs(self, var, mon):
        x = self.x
        if var in x.vexp:
            e = x.vexp[var]
            if Fraction(e).denominator != 1:
                raise QError("fractional marker power in factor substitution")
            rest = {k: v for k, v in x.vexp.items() if k != var}
            x = Monomial(x.coef, x.qexp, rest) * (mon ** e)
        return Poch(x, self.bases, self.power)

    def is_pure_pole(self, ctx):
        """A (1 - x)^(-1) factor whose ratio has size exactly zero."""
        return (
            not self.bases
            and self.power < 0
            and ctx.mono_size(self.x) == 0
        )

    def shifts(self, ctx, extra=0):
        """Base multi-index q-shifts that can still matter inside the window."""
        v = ctx.mono_size(self.x)
        lim = ctx.window + extra
        out = []
        if not self.bases:
            return [Fraction(0)] if v < lim else []
        if len(self.bases) == 1:
            b = self.bases[0]
            m = 0
            while v + m * b < lim:
                out.append(m * b)
                m += 1
            return out
        if len(self.bases) == 2:
            b1, b2 = self.bases
            m = 0
            while v + m * b1 < lim:
                n = 0
                while v + m * b1 + n * b2 < lim:
                    out.append(m * b1 + n * b2)
                    n += 1
                m += 1
            return out
        raise NonTruncating("poch factor supports at most two bases")

    def _ratio_plan(self, ctx, s):
        """Plan for the inverted element (1 - x q^s)^-1.

        Returns (ratio monomial, flipped?, direction rate, n_max).  The
        direction metric decides the expansion side: when the summation
        points sit past the factor's zero the reciprocal form
        (1 - x)^-1 = -x^-1 (1 - x^-1)^-1 applies.
        """
        xs = self.x * Monomial.q(s)
        rd = ctx.dir_size(xs)
        flipped = False
        if rd < 0 and not self._capped(ctx):
            xs = xs ** -1
            rd = -rd
            flipped = True
        bounds = []
        if rd > 0:
            n = 1
            while n * rd < ctx.window:
                n += 1
            bounds.append(n)
        for v, e in xs.vexp.items():
            cap = ctx.caps.get(v)
            if cap is not None and e:
                bounds.append(int(cap // abs(e)) + 1)
        if not bounds:
            raise DomainClash(
                f"inverted factor with flat ratio and no marker cap: {self.x} q^{s}"
            )
        return xs, flipped, rd, min(bounds)

    def neg_mass(self, ctx):
        """Total negative truncation-size mass carried by expanded factors."""
        v = ctx.mono_size(self.x)
        vd = ctx.dir_size(self.x)
        mass = Fraction(0)
        if self.power > 0:
            for s in self.shifts(ctx):
                mass += max(Fraction(0), -(v + s))
            return mass * self.power
        for s in self.shifts(ctx, extra=max(Fraction(0), -v) + abs(vd - v)):
            xs, flipped, rd, n_max = self._ratio_plan(ctx, s)
            tsize = ctx.mono_size(xs)
            if tsize < 0:
                mass += n_max * (-tsize)
            if flipped and tsize < 0:
                mass += -tsize
        return mass * (-self.power)

    def _capped(self, ctx):
        return any(ctx.caps.get(vv) is not None for vv in self.x.vexp)

    def expand(self, ctx):
        out = MSeries.from_qs(one().truncate(ctx.window))
        v = ctx.mono_size(self.x)
        vd = ctx.dir_size(self.x)
        xms = MSeries.from_monomial(self.x)
        extra = 0 if self.power > 0 else max(Fraction(0), -v) + abs(vd - v)
        for s in self.shifts(ctx, extra=extra):
            if self.power > 0:
                fac = MSeries.from_const(1) - xms.shift(s)
                for _ in range(self.power):
                    out = out.mul(fac, ctx)
                continue
            xs, flipped, rd, n_max = self._ratio_plan(ctx, s)
            fac_ratio = MSeries.from_monomial(xs)
            geo = MSeries.from_qs(one().truncate(ctx.window))
            accp = MSeries.from_const(1)
            for _ in range(n_max):
                accp = accp.mul(fac_ratio, ctx)
                if accp.is_zero():
                    break
                geo = geo + accp
            if flipped:
                geo = geo.mul(fac_ratio.scale_qs(QSeries.const(-1)), ctx)
            for _ in range(-self.power):
                out = out.mul(geo, ctx)
        return out

    def __repr__(self):
        b = ",".join(f"q^{x}" for x in self.bases)
        return f"({self.x}; {b})^{self.power}"


def expand_factors(prefactor, factors, ctx):
    """Expand prefactor * prod(factors) to an MSeries under ``ctx``.

    The window is padded by the negative-size mass of the factor list plus the
    prefactor so no knowledge is silently lost before the final truncation.
    """
    pad = max(Fraction(0), -ctx.mono_size(prefactor))
    for f in factors:
        pad += f.neg_mass(ctx)
    wctx = ctx.with_window(ctx.window + pad)
    out = MSeries.from_monomial(prefactor)
    for f in factors:
        out = out.mul(f.expand(wctx), wctx)
    return out.truncate_sized(ctx)
