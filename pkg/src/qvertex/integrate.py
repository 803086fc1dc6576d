"""Discrete q-integrals, formal contour residues, and the hypergeometric kernel.

The integrals here are geometric sums over lattice points c*p^n; contours are
never numeric - a residue is coefficient extraction from a Laurent expansion
in a declared marker.
"""

from __future__ import annotations

from fractions import Fraction

from .mseries import MSeries
from .qnum import (
    Monomial,
    NonTruncating,
    OutOfRange,
    QError,
    QSeries,
    binom_pow,
    one,
    pochhammer,
    q_gamma,
    zero,
)

__all__ = [
    "UndeterminedDomain",
    "JacksonSpec",
    "jackson_finite",
    "jackson_bilateral",
    "jackson_points",
    "residue",
    "fourier_double",
    "hyper_F",
    "q_beta_integral",
]


class UndeterminedDomain(QError):
    pass


class JacksonSpec:
    """Endpoint, base, and summation mode of a discrete q-integral.

    mode "zero_to_c":  int_0^c      = c (1-p) sum_{n>=0} f(c p^n) p^n
    mode "cp_to_cinf": int_{cp}^{c.inf} = c (1-p) sum_{n<=0} f(c p^n) p^n
    mode "bilateral":  int_0^{c.inf}   = c (1-p) sum_{n in Z} f(c p^n) p^n
    """

    __slots__ = ("c", "p", "mode", "term_cap")

    def __init__(self, c, p, mode, term_cap=None):
        if not isinstance(p, Monomial) or p.vexp or p.qexp <= 0:
            raise NonTruncating("the q-integral base must be a pure q-monomial with positive exponent")
        self.c = c
        self.p = p
        self.mode = mode
        self.term_cap = term_cap

    def cap(self, order):
        if self.term_cap is not None:
            return self.term_cap
        return int(Fraction(order) / self.p.qexp) + 2


def jackson_points(spec, order):
    """The lattice points and weights (t_n, c(1-p)p^n) the sum runs over."""
    cap = spec.cap(order)
    if spec.mode == "zero_to_c":
        ns = range(0, cap + 1)
    elif spec.mode == "cp_to_cinf":
        ns = range(0, -cap - 1, -1)
    elif spec.mode == "bilateral":
        ns = range(-cap, cap + 1)
    else:
        raise OutOfRange(f"unknown q-integral mode {spec.mode}")
    out = []
    for n in ns:
        t = spec.c * (spec.p ** n)
        out.append((n, t))
    return out


def _weight(spec, n, order):
    w = (spec.c * (spec.p ** n)).to_qseries()
    return w - w.shift(spec.p.qexp)  # c p^n (1 - p), exact


def _sum_points(f, spec, order, decay_checks=2):
    order = Fraction(order)
    total = zero().truncate(order)
    pts = jackson_points(spec, order)
    last_vals = []
    for n, t in pts:
        w = _weight(spec, n, order)
        val = f(t)
        if isinstance(val, MSeries):
            raise UndeterminedDomain("q-integral integrand must evaluate to a QSeries")
        term = (w * val).truncate(order)
        total = total + term
        if not term.is_zero():
            last_vals.append((n, term.valuation()))
    # decay check: the first omitted points must clear the order
    for extra in range(1, decay_checks + 1):
        tail_ns = []
        if spec.mode == "zero_to_c":
            tail_ns = [pts[-1][0] + extra]
        elif spec.mode == "cp_to_cinf":
            tail_ns = [pts[-1][0] - extra]
        else:
            tail_ns = [pts[-1][0] + extra, pts[0][0] - extra]
        for n in tail_ns:
            t = spec.c * (spec.p ** n)
            term = (_weight(spec, n, order) * f(t)).truncate(order)
            if not term.is_zero():
                raise NonTruncating(
                    f"q-integral tail at n={n} still contributes below order {order}"
                )
    return total


def jackson_finite(f, spec, order):
    """The finite-endpoint q-integral of ``f`` to q-order ``order``."""
    if spec.mode != "zero_to_c":
        raise OutOfRange("jackson_finite needs mode zero_to_c")
    return _sum_points(f, spec, order)


def jackson_bilateral(f, spec, order):
    """The unbounded-upper q-integral (one- or two-sided sum)."""
    if spec.mode not in ("cp_to_cinf", "bilateral"):
        raise OutOfRange("jackson_bilateral needs mode cp_to_cinf or bilateral")
    return _sum_points(f, spec, order)


def residue(ms, var):
    """Coefficient of var^(-1) of a Laurent expansion in a declared domain."""
    if isinstance(ms, QSeries):
        return MSeries()
    return ms.residue(var)


def fourier_double(ms, var):
    """sum_k of the var^k residues: evaluation of the series at var = 1."""
    return ms.subs_one(var)


def q_beta_integral(x, y, p, order):
    """The discrete-integral form of the beta-type function.

    int_0^1 d_p t  t^(x-1) (pt;p)/(p^y t;p), summed over t = p^n.
    """
    order = Fraction(order)
    x = Fraction(x)
    y = Fraction(y)
    pq = p.qexp

    def f(t):
        tq = t.to_qseries()
        if len(tq.terms) != 1:
            raise UndeterminedDomain("beta integrand needs monomial points")
        head = tq.pow(x - 1)
        pad = order - min(Fraction(0), head.valuation()) + 2 * pq + 2
        num = pochhammer(Monomial.q(pq) * t, [p], pad)
        den = pochhammer(Monomial.q(pq * y) * t, [p], pad)
        return head * num * den.inv(order=pad)

    # t^(x-1) decays like p^(n(x-1)); widen the cap accordingly
    spec = JacksonSpec(Monomial(1, 0), p, "zero_to_c", term_cap=int(order / (pq * min(x, 1))) + 3)
    return jackson_finite(f, spec, order)


def hyper_F(a, b, c, z, p, order):
    """Gamma-prefactored discrete-integral hypergeometric function.

    F(a,b,c;z) = Gamma(c)/(Gamma(a)Gamma(c-a)) *
                 int_0^1 d_p t t^(a-1) (pt;p)(p^b z t;p) / ((p^(c-a) t;p)(z t;p))
    """
    order = Fraction(order)
    a, b, c = Fraction(a), Fraction(b), Fraction(c)
    pq = p.qexp
    pad = order + 2 * pq + 2
    if isinstance(z, Monomial):
        zq = z.to_qseries()
    else:
        zq = z

    def f(t):
        tq = t.to_qseries()
        head = tq.pow(a - 1)
        padl = pad - min(Fraction(0), head.valuation())
        num = pochhammer(Monomial.q(pq) * t, [p], padl)
        if not zq.is_zero():
            zt = (zq * tq).truncate(padl)
            num = num * pochhammer(zt.shift(pq * b), [p], padl)
            den2 = pochhammer(zt, [p], padl)
        else:
            den2 = one()
        den1 = pochhammer(Monomial.q(pq * (c - a)) * t, [p], padl)
        return head * num * (den1 * den2).inv(order=padl)

    spec = JacksonSpec(Monomial(1, 0), p, "zero_to_c", term_cap=int(order / (pq * min(a, 1))) + 3)
    body = jackson_finite(f, spec, order)
    pref = q_gamma(c, p, pad) * (q_gamma(a, p, pad) * q_gamma(c - a, p, pad)).inv(order=pad)
    return (pref * body).truncate(order)


def jackson_sum_symbolic(ms, tvar, spec, order, lattice=1, regulate=False):
    """Apply the q-integral sum over a symbolic position marker, in closed form.

    Every power t^e of the marker is summed geometrically over the lattice
    points c p^n of ``spec`` (including the measure weight c (1-p) p^n), with
    the divergent direction continued through the same rational expression,
    which is the standard reading of unbounded q-integrals of power-law
    integrands.  A flat power (e = -1) is a genuine pole and raises.
    """
    order = Fraction(order)
    p = spec.p
    pq = p.qexp
    c = spec.c
    out = MSeries()
    one_minus_p = one() - p.to_qseries()
    for e in sorted(ms.powers_of(tvar)):
        piece = ms.coeff_of(tvar, e)
        if piece.is_zero():
            continue
        w = Fraction(e, lattice) + 1
        if w == 0:
            if regulate:
                continue
            raise NonTruncating("flat power in an unbounded q-integral; needs a regulator")
        # sum over n of p^(n w), over the mode's range, continued
        if spec.mode == "zero_to_c":
            geo = _geo_cont(p, w, order + abs(w * pq) + 2 * pq + 4)
        elif spec.mode == "cp_to_cinf":
            geo = _geo_cont(p, -w, order + abs(w * pq) + 2 * pq + 4)
        elif spec.mode == "bilateral":
            raise NonTruncating("two-sided sums need a splitting into the two modes")
        else:
            raise OutOfRange(f"unknown q-integral mode {spec.mode}")
        # the integrand already carries the endpoint through the symbolic
        # position; the measure contributes one factor of it
        if not isinstance(c, Monomial):
            raise UndeterminedDomain("symbolic q-integral needs a monomial endpoint")
        piece = piece.scale_qs((c.to_qseries() * one_minus_p * geo))
        out = out + piece
    return out


def _geo_cont(p, w, order):
    """sum over n >= 0 of p^(n w), continued: 1/(1 - p^w)."""
    pw = p.qexp * w
    if pw > 0:
        base = one() - QSeries.from_terms([(pw, 1)])
        return base.inv(order=order)
    # 1/(1 - x) = -x^-1/(1 - x^-1) for |x| > 1
    base = one() - QSeries.from_terms([(-pw, 1)])
    return (QSeries.from_terms([(-pw, -1)]) * base.inv(order=order)).truncate(order)
