"""Closed-form graded traces over the free-field Fock spaces.

The workhorse is :func:`product_trace`: given an ordered operator product it
multiplies the pairwise contractions, the zero-mode weights at the sector
charges, the per-family mode-sum factors, and the thermal pairing exponential
from the generic Heisenberg trace formula

    Tr( mu^(level-counting) e^(sum C_n a_-n) e^(sum D_n a_n) )
        = (mu;mu)^-1 exp( sum_m h(m) C_m D_m mu^m / (1 - mu^m) ).

The projector onto the restricted space (the contour insertion of the pair of
conjugate fermionic exponentials) is folded in exactly: the charge tower that
it generates is a geometric sum whose ratio is a monomial Lambda; the sum is
kept closed as a 1/(1 - Lambda) factor carrying a regulator marker, and the
regulator is removed at the end by exact polynomial division, which certifies
that apparent poles cancel instead of sweeping them under a truncation.
"""

from __future__ import annotations

from fractions import Fraction

from .mseries import NUHAT, Ctx, DomainClash, MSeries, Poch, expand_factors
from .opalg import ExpOperator, Eta, Xi, build_elementary, contract_closed, fam_x1, fam_x2, fam_x3
from .qnum import (
    Monomial,
    NonTruncating,
    OutOfRange,
    QError,
    QSeries,
    one,
    pochhammer,
    theta,
    zero,
)

__all__ = [
    "CapTooSmall",
    "TraceSpec",
    "trace_exp_closed",
    "product_trace",
    "finalize",
    "trace_X1",
    "trace_X2X3",
    "PseudoConstant",
    "pseudo_constant",
    "lefschetz_trace",
    "character",
    "sector_label",
]


class CapTooSmall(QError):
    pass


class TraceSpec:
    """Input bundle for a graded trace: sector, operators, weights, orders."""

    __slots__ = ("k", "ell", "ops", "mu", "nu", "order", "s_max", "insert_eta_xi", "s_charge", "t_charge")

    def __init__(self, k, ell, ops, mu=None, nu=None, order=8, s_max=None,
                 insert_eta_xi=False, s_charge=0, t_charge=0):
        self.k = int(k)
        self.ell = Fraction(ell)
        self.ops = list(ops)
        self.mu = mu if mu is not None else Monomial.q(4)
        self.nu = nu if nu is not None else Monomial.q(1)
        self.order = Fraction(order)
        self.s_max = s_max
        self.insert_eta_xi = insert_eta_xi
        self.s_charge = Fraction(s_charge)
        self.t_charge = Fraction(t_charge)


def trace_exp_closed(h, a_plus, a_minus, mu, order):
    """The generic trace formula for one Heisenberg family.

    ``h(m)`` is the mode bracket, ``a_plus(m)``/``a_minus(m)`` the coefficient
    functions of the annihilation/creation exponentials, ``mu`` the grading
    monomial.  Returns (mu;mu)^-1 exp(-sum h A_+ A_- mu^m/(1-mu^m)).
    """
    order = Fraction(order)
    if not isinstance(mu, Monomial) or mu.vexp or mu.qexp <= 0:
        raise NonTruncating("grading monomial must be pure q with positive exponent")
    muq = mu.qexp

    def term_at(m):
        return (h(m) * a_plus(m) * a_minus(m)).truncate(order)

    m_abs = int((order + 16) / muq) + 4
    expo = zero().truncate(order)
    for m in range(1, m_abs + 1):
        term = term_at(m)
        if term.is_zero():
            continue
        v = term.valuation()
        j = 1
        while v + j * m * muq < order:
            expo = expo + term.shift(j * m * muq).truncate(order)
            j += 1
    for m in (m_abs + 1, m_abs + 2):
        term = term_at(m)
        if not term.is_zero() and term.valuation() + m * muq < order:
            raise NonTruncating("mode sum fails to decay inside the requested order")
    body = expo.scale(-1).exp(order)
    inv_poch = pochhammer(mu, [mu], order).inv(order=order)
    return (body * inv_poch).truncate(order)


# ---------------------------------------------------------------------------
# the product-trace engine
# ---------------------------------------------------------------------------

_FAMS = {"X1": fam_x1, "X2": fam_x2, "X3": fam_x3}


class RegSum:
    """Sum of (series, pole-order, removable-pole set) awaiting regulator removal."""

    def __init__(self, terms=None):
        self.terms = list(terms or [])

    @staticmethod
    def zero():
        return RegSum()

    def __add__(self, other):
        return RegSum(self.terms + other.terms)

    def scale(self, s):
        return RegSum([(ms.scale_qs(s) if isinstance(s, QSeries) else ms.scale_qs(QSeries.const(s)), p, rem)
                       for ms, p, rem in self.terms])

    def mul_ms(self, other, ctx):
        return RegSum([(ms.mul(other, ctx), p, rem) for ms, p, rem in self.terms])


def finalize(reg, ctx, keep=()):
    """Remove the charge-tower regulator from a RegSum exactly.

    Terms carrying genuine 1/(1-nuhat^2)^p poles are assembled over a common
    denominator and divided out exactly; a nonzero remainder raises, because
    it means the tower really diverges rather than cancelling.
    """
    if not reg.terms:
        return MSeries()
    pmax = max(p for _, p, _ in reg.terms)
    # removable poles: union with multiplicity across terms
    rem_union = []
    for _, _, rem in reg.terms:
        counts = {}
        for x in rem:
            counts[x] = counts.get(x, 0) + 1
        for x, c in counts.items():
            have = rem_union.count(x)
            rem_union.extend([x] * (c - have))
    pole = MSeries.from_const(1) - MSeries.from_monomial(Monomial(1, 0, {NUHAT: 2}))
    total = MSeries()
    for ms, p, rem in reg.terms:
        pad = ms
        for _ in range(pmax - p):
            pad = pad.mul(pole, ctx)
        missing = list(rem_union)
        for x in rem:
            missing.remove(x)
        for x in missing:
            pad = pad.mul(MSeries.from_const(1) - MSeries.from_monomial(x), ctx)
        total = total + pad
    for _ in range(pmax):
        total = _divide_one_minus_nuhat2(total)
    total = total.subs_one(NUHAT)
    for x in rem_union:
        c = (MSeries.from_const(1) - MSeries.from_monomial(x)).subs_one(NUHAT).pure_qs()
        total = total.mul(MSeries.from_qs(c.inv(order=ctx.order + 8)), ctx)
    return total


def _divide_one_minus_nuhat2(ms):
    """Exact division by (1 - nuhat^2); raises if the remainder is nonzero."""
    if NUHAT not in ms.vars:
        if ms.is_zero():
            return ms
        raise NonTruncating("charge tower does not cancel: no regulator content to divide")
    i = ms.vars.index(NUHAT)
    powers = sorted({k[i] for k in ms.terms})
    if not powers:
        return ms
    lo, hi = powers[0], powers[-1]
    out = {}
    carry = {}
    # (1 - n^2) T = S  =>  t_j = s_j + t_{j-2}, ascending
    for j in range(lo, hi + 1):
        sj = ms.coeff_of(NUHAT, j)
        tj = sj + carry.get(j - 2, MSeries())
        if not tj.is_zero():
            carry[j] = tj
        else:
            carry[j] = tj
    # remainder: the top two carries must vanish
    r1 = carry.get(hi, MSeries())
    r0 = carry.get(hi - 1, MSeries())
    if not (r1.is_zero() and r0.is_zero()):
        raise NonTruncating(
            "charge tower fails to cancel at the regulator pole; "
            f"remainders {r0!r} / {r1!r}"
        )
    terms = {}
    vars_rest = ms.vars[:i] + ms.vars[i + 1 :]
    for j in range(lo, hi - 1):
        tj = carry.get(j)
        if tj is None or tj.is_zero():
            continue
        tj = tj._expand_vars(vars_rest)
        for kk, s in tj.terms.items():
            key = kk[:i] + (j,) + kk[i:]
            terms[key] = terms.get(key, zero()) + s if key in terms else s
    return MSeries(ms.vars, terms)


def product_trace(
    ops,
    k,
    ell,
    mu,
    nu,
    order,
    space=("X1", "X2", "X3"),
    normal_ordered=False,
    insert=False,
    w0="w0",
    s_charge=0,
    t_charge=0,
    sizes=None,
    caps=None,
):
    """Graded trace of an operator product over the chosen family space.

    Returns a RegSum; apply :func:`finalize` to obtain the series.  ``ops``
    are ExpOperators with specialized (monomial or marker) arguments, listed
    left to right.  With ``normal_ordered`` the listed product is taken as a
    single normal-ordered composite (no pairwise contractions among ``ops``).
    With ``insert`` the conjugate-pair contour projector is appended and the
    equal-charge tower is summed in closed form.
    """
    order = Fraction(order)
    k = int(k)
    P = k + 2
    ell = Fraction(ell)
    sizes = dict(sizes or {})
    sizes.setdefault(w0, Fraction(0))
    sizes.setdefault(NUHAT, Fraction(0))
    ctx = Ctx(order, sizes=sizes, caps=caps)
    fams = {fid: _FAMS[fid](k) for fid in space}
    for op in ops:
        for t in op.xterms:
            if t.fam.fid not in fams:
                raise OutOfRange(f"operator touches family {t.fam.fid} outside the trace space")
    # charge gates
    for fid in space:
        tot = sum(op.a0_shift(fid) for op in ops)
        if insert and fid == "X3":
            tot += Fraction(0)  # eta and xi balance each other
        if tot != 0:
            return RegSum.zero()
    eig = {"X1": ell, "X2": Fraction(-2) * Fraction(s_charge), "X3": Fraction(2) * Fraction(t_charge)}

    full_ops = list(ops)
    gamma = None
    if insert:
        if "X2" not in fams or "X3" not in fams:
            raise OutOfRange("the contour projector needs the X2 and X3 families in the space")
        lam = Monomial(1, 2 * nu.qexp, {NUHAT: 2})
        for op in ops:
            for t in op.xterms:
                if t.fam.fid == "X2":
                    lam = lam * (t.arg ** (t.q_charge() * (-2)))
                elif t.fam.fid == "X3":
                    lam = lam * (t.arg ** (t.q_charge() * 2))
        gamma = Monomial.var(w0) * (lam ** -1)
        full_ops = ops + [
            build_elementary(Eta, k, gamma),
            build_elementary(Xi, k, Monomial.var(w0)),
        ]

    # pairwise contractions
    pre = Monomial(1)
    factors = []
    n_ops = len(ops)
    for i in range(len(full_ops)):
        for j in range(i + 1, len(full_ops)):
            if normal_ordered and j < n_ops:
                continue
            c = contract_closed(full_ops[i], full_ops[j])
            pre = pre * c.prefactor
            factors.extend(c.factors)

    # zero-mode diagonal weights at the sector charges
    for op in full_ops:
        for t in op.xterms:
            if t.fam.fid not in fams:
                continue
            e = eig.get(t.fam.fid, Fraction(0))
            a0 = t.a0_ln()
            if a0 is not None and e:
                c0, arg = a0
                pre = pre * (arg ** (c0 * e))
            clq = t.a0_logq()
            if clq and e:
                pre = pre * Monomial.q(clq * e)
    # sector weights of the grading monomials
    wexp = mu.qexp * (ell * (ell + 2)) / (4 * P) - ell * nu.qexp if "X1" in fams else Fraction(0)
    if not insert:
        s0, t0 = Fraction(s_charge), Fraction(t_charge)
        if "X2" in fams:
            wexp += mu.qexp * (-s0 * (s0 + 1) / 2) + 2 * s0 * nu.qexp
        if "X3" in fams:
            wexp += mu.qexp * (t0 * (t0 + 1) / 2)
    pre = pre * Monomial.q(wexp)
    if insert:
        pre = pre * gamma

    # split off regulator pole factors
    kept = []
    pole_count = 0
    removable = []
    for f in factors:
        if f.bases or f.power >= 0 or NUHAT not in f.x.vexp:
            kept.append(f)
            continue
        x = f.x
        if set(x.vexp) != {NUHAT}:
            kept.append(f)
            continue
        e = x.vexp[NUHAT]
        if x.qexp == 0:
            base = x
            for _ in range(-f.power):
                if e < 0:
                    # (1 - x)^-1 = -x^-1 (1 - x^-1)^-1
                    pre = pre * (base ** -1) * Monomial(-1)
                    base_n = base ** -1
                else:
                    base_n = base
                if base_n.coef == 1:
                    pole_count += 1
                else:
                    removable.append(base_n)
        else:
            # regular at the regulator point: expand as a finite series
            kept.append(f)
    # thermal pairing exponential
    thermal = _thermal_exponent(full_ops, fams, mu, ctx)
    body = expand_factors(Monomial(1), kept, ctx)
    ms = MSeries.from_monomial(_int_marker(pre))
    ms = ms.mul(body, ctx).mul(thermal.exp(ctx), ctx)
    invp = pochhammer(mu, [mu], order).inv(order=order)
    for _ in fams:
        ms = ms.scale_qs(invp)
    return RegSum([(ms, pole_count, tuple(removable))])


def _int_marker(mon):
    for v, e in mon.vexp.items():
        if Fraction(e).denominator != 1:
            raise QError(f"non-integer marker power {v}^{e} survives in a trace prefactor")
    return mon


def _thermal_exponent(ops, fams, mu, ctx):
    """sum_m h(m) C_m D_m mu^m/(1-mu^m) over each family, as an MSeries."""
    muq = mu.qexp
    total = MSeries()
    for fid, fam in fams.items():

        def pair_at(m):
            cre = MSeries()
            ann = MSeries()
            for op in ops:
                for t in op.xterms:
                    if t.fam.fid != fid:
                        continue
                    s, mex = t.cre(m, ctx.window)
                    if not (s.is_zero() and s.trunc is None):
                        cre = cre + MSeries.from_monomial(Monomial(1, 0, mex)).scale_qs(s)
                    s, mex = t.ann(m, ctx.window)
                    if not (s.is_zero() and s.trunc is None):
                        ann = ann + MSeries.from_monomial(Monomial(1, 0, mex)).scale_qs(s)
            if cre.is_zero() or ann.is_zero():
                return None
            return cre.mul(ann, ctx).scale_qs(fam.norm(m))

        m_abs = int((ctx.window + 16) / muq) + 4
        for m in range(1, m_abs + 1):
            pair = pair_at(m)
            if pair is None:
                continue
            minsz = _min_size(pair, ctx)
            if minsz is None:
                continue
            j = 1
            while minsz + j * m * muq < ctx.window:
                total = total + pair.shift(j * m * muq).truncate(ctx.window)
                j += 1
        for m in (m_abs + 1, m_abs + 2):
            pair = pair_at(m)
            if pair is not None:
                minsz = _min_size(pair, ctx)
                if minsz is not None and minsz + m * muq < ctx.window:
                    raise NonTruncating("thermal mode sum fails to decay inside the window")
    return total


def _min_size(ms, ctx):
    out = None
    for kk, s in ms.terms.items():
        v = s.valuation()
        if v is None:
            continue
        sz = ctx.size(v, dict(zip(ms.vars, kk)))
        out = sz if out is None else min(out, sz)
    return out


# ---------------------------------------------------------------------------
# the two sector-trace surfaces
# ---------------------------------------------------------------------------


def _xterm_op(k, xterms):
    return ExpOperator(k, xterms)


def trace_X1(ell_s, N1, N2, N3, N4, n4, X, Y, Z, W, mu, nu, order, k):
    """Closed trace over the first family with the four insertion classes.

    X carries top-component vertex arguments, Y bottom-component ones, Z
    screening arguments, W derivative-current arguments (first ``n4`` with
    the + branch).  All arguments are pure-q Monomials.  The charge gate
    k*N1 + N2 - 2*N3 = 0 is applied exactly.
    """
    from .opalg import XTerm

    if len(X) != N1 or len(Y) != N2 or len(Z) != N3 or len(W) != N4:
        raise OutOfRange("argument sets do not match the declared sizes")
    k = int(k)
    P = k + 2
    f1 = fam_x1(k)
    ops = []
    for x in X:
        ops.append(_xterm_op(k, [XTerm(f1, "std", +1, Monomial.q(k) * x, Fraction(P, 2), L=k, M=2, N=P)]))
    for y in Y:
        ops.append(_xterm_op(k, [XTerm(f1, "std", +1, Monomial.q(k - 2) * y, -Fraction(P, 2), L=1, M=2, N=P)]))
    for z in Z:
        ops.append(_xterm_op(k, [XTerm(f1, "std", -1, Monomial.q(-2) * z, -Fraction(P, 2), L=1, M=1, N=P)]))
    for i, w in enumerate(W):
        eps = 1 if i < n4 else -1
        ops.append(_xterm_op(k, [XTerm(f1, "dx", +1, Monomial.q(-2) * w, -Fraction(P, 2), eps=eps)]))
    reg = product_trace(
        ops, k, ell_s, mu, nu, order, space=("X1",), normal_ordered=True
    )
    ctx = Ctx(order)
    return finalize(reg, ctx).pure_qs()


def trace_X2X3(A, B, C, D, G, H, Xt, Yt, Zt, Wt, mu, nu, order, k, w0="w0"):
    """Closed trace over the second and third families with the projector.

    The first/second lists hold the q-shifts of the minus/plus third-family
    exponentials at arguments Xt/Yt; the next four hold shifts and spectral
    offsets of the minus/plus second-family exponentials at Zt/Wt.  The
    result may carry the ``w0`` spectator marker.
    """
    from .opalg import XTerm

    if not (len(A) == len(Xt) and len(B) == len(Yt) and len(C) == len(D) == len(Zt) and len(G) == len(H) == len(Wt)):
        raise OutOfRange("argument sets do not match the declared shifts")
    k = int(k)
    f2, f3 = fam_x2(k), fam_x3(k)
    ops = []
    for a, x in zip(A, Xt):
        ops.append(_xterm_op(k, [XTerm(f3, "std", -1, Monomial.q(a) * x, 0, L=1, M=1, N=2)]))
    for b, y in zip(B, Yt):
        ops.append(_xterm_op(k, [XTerm(f3, "std", +1, Monomial.q(b) * y, 0, L=1, M=1, N=2)]))
    for c, d, z in zip(C, D, Zt):
        ops.append(_xterm_op(k, [XTerm(f2, "std", -1, Monomial.q(c) * z, d, L=1, M=1, N=2)]))
    for g, h, w in zip(G, H, Wt):
        ops.append(_xterm_op(k, [XTerm(f2, "std", +1, Monomial.q(g) * w, h, L=1, M=1, N=2)]))
    reg = product_trace(
        ops, k, 0, mu, nu, order, space=("X2", "X3"), normal_ordered=True, insert=True, w0=w0
    )
    ctx = Ctx(order, sizes={w0: Fraction(0)})
    return finalize(reg, ctx, keep=(w0,))


# ---------------------------------------------------------------------------
# pseudo constants
# ---------------------------------------------------------------------------


class PseudoConstant:
    """A ratio of theta functions at a regularized point, kept symbolic.

    ``pref`` holds the (constant, epsilon) parts of the prefactor exponent;
    the theta arguments are stored as q-exponents with their epsilon shifts.
    Only structural facts (pseudo-periodicity, valuation bounds) are exposed;
    series values exist only where the regulator exponents cancel.
    """

    __slots__ = ("which", "k", "pref_base", "pref_eps", "num_arg", "den_arg", "epsilon")

    def __init__(self, which, k, pref_base, pref_eps, num_arg, den_arg, epsilon):
        self.which = which
        self.k = k
        self.pref_base = Fraction(pref_base)
        self.pref_eps = Fraction(pref_eps)
        self.num_arg = Fraction(num_arg)  # theta argument exponent at eps = 0
        self.den_arg = Fraction(den_arg)
        self.epsilon = epsilon

    def pseudo_periodic(self):
        """A(t p) = A(t) as an exact exponent identity (theta shift rule)."""
        # t^e picks up p^e; theta(p z)/theta(z) = -1/z for each theta factor
        P = self.k + 2
        pe = Fraction(2 * P)
        shift = self.pref_eps * pe  # t^(pref_eps) under t -> t p
        shift += -(self.num_arg) * 0  # theta ratio handled below
        ratio = shift - (-self.num_arg) + (-self.den_arg)
        return ratio + (self.num_arg - self.den_arg) == 0 or self._period_exact()

    def _period_exact(self):
        P = self.k + 2
        pe = Fraction(2 * P)
        total = self.pref_eps * pe + (self.den_arg - self.num_arg)
        return total == 0

    def valuation_bound(self):
        """Lower bound on the q-valuation with the regulator treated as size 0."""
        return self.pref_base + min(Fraction(0), self.num_arg) - min(Fraction(0), self.den_arg)

    def singular_at_zero(self):
        """True when the theta numerator vanishes as the regulator closes."""
        return self.num_arg == 0

    def __repr__(self):
        return (
            f"PseudoConstant({self.which}, q^({self.pref_base}+{self.pref_eps}*eps) "
            f"theta(q^({self.num_arg}+eps))/theta(q^({self.den_arg}+eps)))"
        )


def pseudo_constant(which, k, epsilon=Fraction(1, 97), ell=None):
    """The screening-exchange pseudo constants at their regularized points."""
    k = int(k)
    P = k + 2
    if which == "A_s":
        # t^(-2/P) theta(p q^-2 t)/theta(p q^2 t) at t = q^(-2-eps)
        t0 = Fraction(-2)
        return PseudoConstant("A_s", k, -Fraction(2, P) * t0, -Fraction(2, P),
                              2 * P - 2 + t0, 2 * P + 2 + t0, epsilon)
    if which == "A_Phi":
        if ell is None:
            raise OutOfRange("A_Phi needs the component parameter")
        z0 = Fraction(ell)
        return PseudoConstant("A_Phi", k, Fraction(ell, P) * (k + 2 + z0), Fraction(ell, P),
                              -ell + z0, ell + z0, epsilon)
    if which == "A_Psi1":
        z0 = Fraction(-k - 1)
        return PseudoConstant("A_Psi1", k, Fraction(1, P) * (-2 + z0), Fraction(1, P),
                              k + 1 + z0, k - 1 + z0, epsilon)
    raise OutOfRange(f"unknown pseudo constant {which}")


# ---------------------------------------------------------------------------
# Lefschetz alternating sum and the character
# ---------------------------------------------------------------------------


def sector_label(n_t, s, P):
    """Charge label of the s-th alternating sector for tower index n_t."""
    if s % 2 == 0:
        return n_t - P * s - 1
    return -n_t - P * (s - 1) - 1


def lefschetz_trace(per_sector, weight_bound, s_max, order):
    """sum_s (-1)^s per_sector(s) with a bound check on the omitted sectors.

    ``weight_bound(s)`` must return a lower bound for the q-valuation of the
    s-th term; the first omitted sector on each side must clear ``order`` and
    the bounds must keep growing, else CapTooSmall is raised.
    """
    order = Fraction(order)
    total = None
    for s in range(-s_max, s_max + 1):
        term = per_sector(s)
        if isinstance(term, QSeries):
            term = MSeries.from_qs(term)
        term = term if s % 2 == 0 else -term
        total = term if total is None else total + term
    for s in (s_max + 1, -s_max - 1):
        b = weight_bound(s)
        b2 = weight_bound(s + (1 if s > 0 else -1))
        if b < order or b2 < b:
            raise CapTooSmall(
                f"sector cap {s_max} leaves sector {s} with valuation bound {b} below order {order}"
            )
    return total if total is not None else MSeries()


def character(k, m, mu, nu, order, s_max=None, use_flat_constant=False):
    """Graded trace of the identity over the irreducible module, in closed form.

    The alternating sum pairs the first-family sector weights with the closed
    projector factor of the other two families.  ``use_flat_constant``
    switches the projector constant to the flat value q^3 quoted alongside
    the worked examples instead of the level-dependent one the contour
    algebra produces; they agree at k = 1.
    """
    k = int(k)
    if not (0 <= int(m) <= k):
        raise OutOfRange("sector index out of range")
    P = k + 2
    n_t = int(m) + 1
    order = Fraction(order)
    ctx = Ctx(order)
    x23 = finalize(
        product_trace([], k, 0, mu, nu, order, space=("X2", "X3"), insert=True), ctx
    ).pure_qs()
    if use_flat_constant:
        x23 = x23.shift(3 - (k + 2))
    invp = pochhammer(mu, [mu], order).inv(order=order)

    def x1_weight_exp(s):
        lv = Fraction(sector_label(n_t, s, P))
        return mu.qexp * lv * (lv + 2) / (4 * P) - lv * nu.qexp

    def per_sector(s):
        return invp.shift(x1_weight_exp(s)).truncate(order)

    if s_max is None:
        s_max = 1
        while x1_weight_exp(s_max + 1) < order or x1_weight_exp(-s_max - 1) < order:
            s_max += 1
            if s_max > 200:
                raise CapTooSmall("runaway sector cap")
    out = lefschetz_trace(per_sector, x1_weight_exp, s_max, order)
    return out.pure_qs() * x23
