"""Brute-force oracle: explicit truncated Fock spaces and graded traces.

Everything here works by direct enumeration: states are multisets of creation
modes over a charged sector, operators act mode by mode, and traces are sums
of diagonal matrix elements.  No closed trace formula is consulted, which is
the point - results from this module certify the closed machinery.

A product of exponential operators factorizes over the three mode families,
so a trace is computed family by family and multiplied; the equal-charge
constraint tying the second and third families together is imposed by the
sector loop, and the contour insertion that projects onto the restricted
space is handled by residue extraction in a formal marker.
"""

from __future__ import annotations

from fractions import Fraction

from .mseries import Ctx, MSeries
from .opalg import ExpOperator, fam_x1, fam_x2, fam_x3
from .qnum import Monomial, NonTruncating, OutOfRange, QError, QSeries, one, zero

__all__ = [
    "ZeroMode",
    "TruncationUnderflow",
    "FockSector",
    "FockState",
    "commutator_norm",
    "enumerate_states",
    "apply_exp_operator",
    "sector_grades",
    "brute_trace",
]


class ZeroMode(QError):
    pass


class TruncationUnderflow(QError):
    pass


def commutator_norm(family, n, k=None):
    """[a_{X,n}, a_{X,-n}] as an exact Laurent polynomial.

    ``family`` is a Family object or one of the ids "X1", "X2", "X3" (then
    ``k`` is required for "X1").
    """
    if isinstance(family, str):
        if family == "X1":
            if k is None:
                raise OutOfRange("level k required for the X1 family")
            family = fam_x1(k)
        elif family == "X2":
            family = fam_x2(k or 1)
        elif family == "X3":
            family = fam_x3(k or 1)
        else:
            raise OutOfRange(f"unknown family {family}")
    if int(n) == 0:
        raise ZeroMode("zero-mode brackets are sector constants")
    return family.norm(int(n))


class FockSector:
    """Charged sector of the three-family Fock space."""

    __slots__ = ("k", "ell", "s", "t")

    def __init__(self, k, ell, s=0, t=0):
        self.k = int(k)
        self.ell = Fraction(ell)
        self.s = Fraction(s)
        self.t = Fraction(t)

    def a0(self, fid):
        if fid == "X1":
            return self.ell
        if fid == "X2":
            return -2 * self.s
        if fid == "X3":
            return 2 * self.t
        return Fraction(0)

    def shifted(self, fid, delta_a0):
        if fid == "X1":
            return FockSector(self.k, self.ell + delta_a0, self.s, self.t)
        if fid == "X2":
            return FockSector(self.k, self.ell, self.s - delta_a0 / 2, self.t)
        if fid == "X3":
            return FockSector(self.k, self.ell, self.s, self.t + delta_a0 / 2)
        raise OutOfRange(f"unknown family {fid}")

    def key(self):
        return (self.ell, self.s, self.t)

    def __repr__(self):
        return f"Sector(ell={self.ell}, s={self.s}, t={self.t})"


class FockState:
    """Multiset of creation modes (fid, n>0) -> multiplicity over a sector."""

    __slots__ = ("sector", "modes")

    def __init__(self, sector, modes=()):
        self.sector = sector
        self.modes = tuple(sorted(modes))

    def degree(self):
        return sum(n * m for (_, n), m in self.modes)

    def degree_of(self, fid):
        return sum(n * m for (f, n), m in self.modes if f == fid)

    def key(self):
        return (self.sector.key(), self.modes)

    def __eq__(self, other):
        return isinstance(other, FockState) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        body = " ".join(f"a[{f},-{n}]^{m}" for (f, n), m in self.modes)
        return f"|{body or 'vac'};{self.sector}>"


def _partitions(max_degree):
    """All mode multisets {n: mult} of one family with degree <= max_degree."""
    states = []

    def rec(n, remaining, acc):
        states.append(tuple(acc))
        for nn in range(n, remaining + 1):
            cap = remaining // nn
            for m in range(1, cap + 1):
                rec(nn + 1, remaining - nn * m, acc + [(nn, m)])

    rec(1, max_degree, [])
    # deduplicate (rec already emits each multiset once) and sort by degree then lex
    uniq = sorted(set(states), key=lambda ms: (sum(n * m for n, m in ms), ms))
    return uniq


def enumerate_states(sector, max_degree, fids=("X1", "X2", "X3")):
    """All states with total degree <= max_degree, ordered by (degree, lex)."""
    if max_degree < 0:
        raise OutOfRange("max_degree must be nonnegative")
    per = {fid: _partitions(max_degree) for fid in fids}
    states = []

    def rec(i, room, acc):
        if i == len(fids):
            states.append(FockState(sector, acc))
            return
        fid = fids[i]
        for ms in per[fid]:
            d = sum(n * m for n, m in ms)
            if d > room:
                continue
            rec(i + 1, room - d, acc + [((fid, n), m) for n, m in ms])

    rec(0, max_degree, [])
    states.sort(key=lambda st: (st.degree(), st.modes))
    return states


def sector_grades(state):
    """Eigenvalues (d1, d2, d3) of the three grading operators on ``state``."""
    sec = state.sector
    P = sec.k + 2
    ell, s, t = sec.ell, sec.s, sec.t
    d1 = -state.degree_of("X1") - ell * (ell + 2) / (4 * P)
    d2 = -state.degree_of("X2") + s * (s + 1) / 2
    d3 = -state.degree_of("X3") - t * (t + 1) / 2
    return d1, d2, d3


# ---------------------------------------------------------------------------
# operator application
# ---------------------------------------------------------------------------


def _op_family_coeffs(op, fam, side, nmax, order):
    """Summed mode coefficients of ``op`` for one family as MSeries, n = 1..nmax."""
    out = {}
    terms = [t for t in op.xterms if t.fam.fid == fam.fid]
    for n in range(1, nmax + 1):
        tot = MSeries()
        for t in terms:
            s, mexp = t.ann(n, order) if side == "ann" else t.cre(n, order)
            if s.is_zero() and s.trunc is None:
                continue
            tot = tot + MSeries.from_monomial(Monomial(1, 0, mexp)).scale_qs(s)
        if not tot.is_zero():
            out[n] = tot
    return out


def _falling(m, j):
    out = 1
    for i in range(j):
        out *= m - i
    return out


def _apply_family_op(op, fam, vec, max_degree, order, ctx, zero_modes=True):
    """Apply the ``fam``-part of ``op`` to a single-family state vector.

    ``vec`` maps mode-tuples ((n, mult), ...) to (sector, MSeries); the sector
    rides along so zero modes see the right eigenvalue.  With
    ``zero_modes=False`` the eigenvalue factors and charge shifts are skipped
    (they are then supplied analytically by the caller).
    """
    ann = _op_family_coeffs(op, fam, "ann", max_degree, order)
    cre = _op_family_coeffs(op, fam, "cre", max_degree, order)
    terms = [t for t in op.xterms if t.fam.fid == fam.fid]
    dshift = op.a0_shift(fam.fid) if zero_modes else Fraction(0)
    norms = {n: fam.norm(n) for n in range(1, max_degree + 1)}

    out = {}

    def add(key, sec, val):
        if key in out:
            out[key] = (sec, out[key][1] + val)
        else:
            out[key] = (sec, val)

    for modes, (sec, coef) in vec.items():
        # annihilation exponential: per mode level, sum over j quanta removed
        branches = [(dict(modes), coef)]
        for n, mult in modes:
            c = ann.get(n)
            if c is None:
                continue
            newb = []
            for md, cf in branches:
                m = md[n]
                power = MSeries.from_const(1)
                for j in range(0, m + 1):
                    if j:
                        power = power.mul(c, ctx).scale_qs(norms[n])
                        fac = Fraction(_falling(m, j), 1) / Fraction(_fact(j))
                        term = power.scale_qs(QSeries.const(fac)).mul(cf, ctx)
                    else:
                        term = cf
                    md2 = dict(md)
                    if j == m:
                        md2.pop(n)
                    else:
                        md2[n] = m - j
                    newb.append((md2, term))
            branches = newb
        # zero modes at the current sector eigenvalue, then the charge shift
        zfac = MSeries.from_const(1)
        if zero_modes:
            eig = sec.a0(fam.fid)
            for t in terms:
                a0 = t.a0_ln()
                if a0 is not None:
                    c0, arg = a0
                    e = c0 * eig
                    if e:
                        zfac = zfac.mul(MSeries.from_monomial(arg ** e), ctx)
                clq = t.a0_logq()
                if clq:
                    zfac = zfac.shift(clq * eig)
        sec2 = sec.shifted(fam.fid, dshift) if dshift else sec
        # creation exponential up to the degree cap
        for md, cf in branches:
            cf = cf.mul(zfac, ctx) if not _is_one(zfac) else cf
            deg0 = sum(n * m for n, m in md.items())
            stack = [(md, cf, 1)]
            for n, c in cre.items():
                newstack = []
                for md2, cf2, _ in stack:
                    d2 = sum(a * b for a, b in md2.items())
                    jmax = (max_degree - d2) // n
                    power = MSeries.from_const(1)
                    for j in range(0, jmax + 1):
                        if j:
                            power = power.mul(c, ctx)
                            term = power.scale_qs(QSeries.const(Fraction(1, _fact(j)))).mul(cf2, ctx)
                        else:
                            term = cf2
                        md3 = dict(md2)
                        if j:
                            md3[n] = md3.get(n, 0) + j
                        newstack.append((md3, term, 1))
                stack = newstack
            for md3, cf3, _ in stack:
                key = tuple(sorted(md3.items()))
                add(key, sec2, cf3)
    return out


_FACT = [1]


def _fact(n):
    while len(_FACT) <= n:
        _FACT.append(_FACT[-1] * len(_FACT))
    return _FACT[n]


def _is_one(ms):
    return ms == MSeries.from_const(1)


def apply_exp_operator(op, vec, trunc, max_degree, sizes=None, caps=None):
    """Apply a (three-family) ExpOperator to a StateVector.

    ``vec`` maps FockState -> MSeries.  Spectral arguments must already be
    specialized to monomials (markers are allowed only where the resulting
    zero-mode powers stay integral).
    """
    ctx = Ctx(trunc, sizes=sizes, caps=caps, window=trunc)
    fams = op.families()
    out = {}
    for state, coef in vec.items():
        pieces = {}
        sec = state.sector
        for fid, fam in fams.items():
            modes = tuple((n, m) for (f, n), m in state.modes if f == fid)
            sub = {modes: (sec, MSeries.from_const(1))}
            pieces[fid] = _apply_family_op(op, fam, sub, max_degree, trunc, ctx)
        # untouched families ride along
        touched = set(fams)
        base_modes = [((f, n), m) for (f, n), m in state.modes if f not in touched]
        combos = [({}, sec, coef)]
        for fid, res in pieces.items():
            newc = []
            for md_acc, sec_acc, val in combos:
                for modes, (sec2, piece) in res.items():
                    md2 = dict(md_acc)
                    md2[fid] = modes
                    sec3 = _merge_sector(sec_acc, sec2, fid)
                    newc.append((md2, sec3, val.mul(piece, ctx)))
            combos = newc
        for md_acc, sec_acc, val in combos:
            modes = list(base_modes)
            for fid, ms in md_acc.items():
                modes.extend(((fid, n), m) for n, m in ms)
            st = FockState(sec_acc, modes)
            if st.degree() > max_degree:
                continue  # truncated away; callers size the cap to their order
            out[st] = out.get(st, MSeries()) + val
    return out


def _merge_sector(base, moved, fid):
    if fid == "X1":
        return FockSector(base.k, moved.ell, base.s, base.t)
    if fid == "X2":
        return FockSector(base.k, base.ell, moved.s, base.t)
    return FockSector(base.k, base.ell, base.s, moved.t)


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


def _family_mode_trace(ops, fam, mu_exp, max_degree, order, ctx):
    """Charge-independent mode part of a single-family trace.

    The diagonal of a product of exponentials forces each mode level back to
    its own multiplicity, so the trace factorizes over levels; each level is
    summed by explicit application on the states a_(-n)^m up to the cap.
    Zero modes are stripped (they are exponential-linear in the charge and
    applied analytically by the caller).
    """
    total = MSeries.from_qs(one())
    for n in range(1, max_degree + 1):
        cap = max_degree // n
        h = fam.norm(n)
        # per-op coefficient powers at this level, annihilators with brackets
        pows = []
        any_op = False
        for op in ops:
            annc = MSeries()
            crec = MSeries()
            for t in op.xterms:
                if t.fam.fid != fam.fid:
                    continue
                s, mex = t.ann(n, order)
                if not (s.is_zero() and s.trunc is None):
                    annc = annc + MSeries.from_monomial(Monomial(1, 0, mex)).scale_qs(s)
                s, mex = t.cre(n, order)
                if not (s.is_zero() and s.trunc is None):
                    crec = crec + MSeries.from_monomial(Monomial(1, 0, mex)).scale_qs(s)
            ann_pows = [MSeries.from_const(1)]
            cre_pows = [MSeries.from_const(1)]
            if not annc.is_zero():
                any_op = True
                for j in range(1, cap + 1):
                    ann_pows.append(ann_pows[-1].mul(annc, ctx).scale_qs(h * QSeries.const(Fraction(1, j))))
            if not crec.is_zero():
                any_op = True
                for j in range(1, cap + 1):
                    cre_pows.append(cre_pows[-1].mul(crec, ctx).scale_qs(QSeries.const(Fraction(1, j))))
            pows.append((ann_pows, cre_pows))
        lvl = MSeries()
        for m in range(0, cap + 1):
            vec = {m: MSeries.from_const(1)}
            if any_op:
                for ann_pows, cre_pows in reversed(pows):
                    new = {}
                    for mult, coef in vec.items():
                        for j in range(0, min(mult, len(ann_pows) - 1) + 1):
                            c2 = coef if j == 0 else ann_pows[j].scale_qs(
                                QSeries.const(_falling(mult, j))
                            ).mul(coef, ctx)
                            m2 = mult - j
                            for kk in range(0, (cap - m2) + 1 if len(cre_pows) > 1 else 1):
                                if kk >= len(cre_pows):
                                    break
                                val = c2 if kk == 0 else cre_pows[kk].mul(c2, ctx)
                                m3 = m2 + kk
                                new[m3] = new[m3] + val if m3 in new else val
                    vec = new
            diag = vec.get(m)
            if diag is None:
                continue
            lvl = lvl + diag.shift(mu_exp * n * m)
        total = total.mul(lvl, ctx)
    # levels above the cap hold no states, matching the degree-cap semantics
    return total


def _zero_mode_monomial(ops, fam, base_eig):
    """Product of the diagonal zero-mode factors at a given base charge.

    Operators act right to left, so the one at position i sees the base
    eigenvalue shifted by everything to its right.
    """
    shifts = [op.a0_shift(fam.fid) for op in ops]
    out = Monomial(1)
    for i, op in enumerate(ops):
        eig = Fraction(base_eig) + sum(shifts[i + 1 :], Fraction(0))
        if not eig:
            continue
        for t in op.xterms:
            if t.fam.fid != fam.fid:
                continue
            a0 = t.a0_ln()
            if a0 is not None:
                c0, arg = a0
                e = c0 * eig
                if e:
                    out = out * (arg ** e)
            clq = t.a0_logq()
            if clq:
                out = out * Monomial.q(clq * eig)
    return out


def _guaranteed_order(ops, mu, max_degree, order, marker_weight=None):
    """q-order to which the degree cap certifies the trace.

    A dropped quantum at level n costs at least the mu-weight plus the worst
    pairing valuation per unit degree; a dropped excursion through the
    projector costs the pairing valuation plus the charge-tower weight its
    marker powers force.  The degree-(M+1) shell then bounds the error.
    """
    muq = mu.qexp
    marker_weight = marker_weight or {}
    worst = muq
    for n in range(1, max_degree + 2):
        pair_state = None
        pair_exc = None
        for ia, a in enumerate(ops):
            for ib, b in enumerate(ops):
                for ta in a.xterms:
                    for tb in b.xterms:
                        if ta.fam.fid != tb.fam.fid:
                            continue
                        c, cm = ta.cre(n, order + 48)
                        d, dm = tb.ann(n, order + 48)
                        if c.is_zero() or d.is_zero():
                            continue
                        v = c.valuation() + d.valuation() + ta.fam.norm(n).valuation()
                        pair_state = v if pair_state is None else min(pair_state, v)
                        if ib < ia:
                            # the annihilator sits left of the creator: a direct
                            # excursion, paid for only by its marker weights
                            w = v
                            for mk, e in list(cm.items()) + list(dm.items()):
                                w += abs(e) * marker_weight.get(mk, Fraction(0))
                            pair_exc = w if pair_exc is None else min(pair_exc, w)
        cost = muq if pair_state is None else muq + min(Fraction(0), pair_state) / n
        worst = min(worst, cost)
        if pair_exc is not None:
            worst = min(worst, pair_exc / n)
    if worst <= 0:
        raise NonTruncating("degree cap cannot certify any order for these operators")
    return (max_degree + 1) * worst


class _EigSector:
    """Single-family stand-in sector carrying just an a0 eigenvalue."""

    __slots__ = ("fid", "eig")

    def __init__(self, fid, eig):
        self.fid = fid
        self.eig = Fraction(eig)

    def a0(self, fid):
        return self.eig if fid == self.fid else Fraction(0)

    def shifted(self, fid, delta):
        return _EigSector(self.fid, self.eig + delta) if fid == self.fid else self

    def key(self):
        return (self.fid, self.eig)


def brute_trace(
    ops,
    k,
    ell,
    mu,
    nu,
    max_degree,
    order,
    insert_eta_xi=False,
    s_fixed=None,
    t_fixed=None,
    w0="w0",
    y_var="~y",
    space=("X1", "X2", "X3"),
):
    """Graded trace over the truncated Fock space by direct enumeration.

    Returns (value, guaranteed_order).  The value is an MSeries (it may carry
    the ``w0`` marker when the eta-xi insertion is used).  Charge gates are
    applied exactly: a product with unbalanced charges traces to zero.

    Without the insertion the X2/X3 charges are fixed (default 0, 0); with it
    the equal-charge tower is summed and the contour integral over the eta
    position is taken by residue extraction.
    """
    from .opalg import build_elementary, Eta, Xi

    if mu.qexp <= 0 or mu.vexp:
        raise NonTruncating("mu must be a pure q-monomial with positive exponent")
    P = k + 2
    order = Fraction(order)
    all_ops = list(ops)
    if insert_eta_xi:
        all_ops = all_ops + [
            build_elementary(Eta, k, Monomial.var(y_var)),
            build_elementary(Xi, k, Monomial.var(w0)),
        ]
    # charge gates per family
    shifts = {}
    for op in all_ops:
        for fid in ("X1", "X2", "X3"):
            shifts[fid] = shifts.get(fid, Fraction(0)) + op.a0_shift(fid)
    marker_weight = {}
    if insert_eta_xi:
        lamval = 2 * nu.qexp
        for op in ops:
            for t in op.xterms:
                if t.fam.fid == "X2":
                    lamval += t.arg.qexp * t.q_charge() * (-2)
                elif t.fam.fid == "X3":
                    lamval += t.arg.qexp * t.q_charge() * 2
        if lamval <= 0:
            raise NonTruncating("flat or divergent charge tower; the oracle cannot sum it")
        marker_weight = {y_var: lamval}
    guaranteed = _guaranteed_order(all_ops, mu, max_degree, order, marker_weight)
    if any(shifts.values()):
        return MSeries(), guaranteed
    # negative-valuation mode coefficients pair up later; pad the working
    # window so intermediate products keep enough of the series
    slack = Fraction(0)
    for op in all_ops:
        rate = Fraction(0)
        for t in op.xterms:
            for n in range(1, max_degree + 1):
                for side in ("ann", "cre"):
                    s, _ = getattr(t, side)(n, order + 8)
                    if not s.is_zero():
                        rate = min(rate, s.valuation() / n)
        slack += -rate * max_degree
    work = Fraction(order) + slack
    ctx = Ctx(work, sizes={w0: 0, y_var: 0})
    mu_exp = mu.qexp

    fams = {}
    for fid in space:
        if fid == "X1":
            fams[fid] = fam_x1(k)
        elif fid == "X2":
            fams[fid] = fam_x2(k)
        elif fid == "X3":
            fams[fid] = fam_x3(k)
    for op in all_ops:
        for fid, fam in op.families().items():
            fams.setdefault(fid, fam)

    def x1_zero_weight(lv):
        return mu_exp * (lv * (lv + 2)) / (4 * P) + (-lv) * nu.qexp

    mode_cache = {}

    def fam_trace(fam, eig):
        if fam.fid not in mode_cache:
            mode_cache[fam.fid] = _family_mode_trace(all_ops, fam, mu_exp, max_degree, work, ctx)
        zm = _zero_mode_monomial(all_ops, fam, eig)
        return mode_cache[fam.fid].mul(MSeries.from_monomial(zm), ctx)

    # families outside the charge bookkeeping (test helpers) trace at charge 0
    total = MSeries.from_const(1)
    for fid, fam in fams.items():
        if fid in ("X1", "X2", "X3"):
            continue
        total = total.mul(fam_trace(fam, Fraction(0)), ctx)

    if "X1" in fams:
        t1 = fam_trace(fams["X1"], Fraction(ell))
        total = total.mul(t1.shift(x1_zero_weight(Fraction(ell))), ctx)

    if not insert_eta_xi:
        s0 = Fraction(s_fixed if s_fixed is not None else 0)
        t0 = Fraction(t_fixed if t_fixed is not None else 0)
        if "X2" in fams:
            t2 = fam_trace(fams["X2"], -2 * s0)
            total = total.mul(t2.shift(mu_exp * (-s0 * (s0 + 1) / 2) + 2 * s0 * nu.qexp), ctx)
        if "X3" in fams:
            t3 = fam_trace(fams["X3"], 2 * t0)
            total = total.mul(t3.shift(mu_exp * (t0 * (t0 + 1) / 2)), ctx)
        return total.truncate(order), guaranteed

    # eta-xi insertion: the equal-charge tower meets the y residue one power at
    # a time, so walk the finite set of y powers the mode part produced
    if "X2" not in fams or "X3" not in fams:
        raise NonTruncating("the contour projector needs the X2 and X3 families in the space")
    mode2 = _family_mode_trace(all_ops, fams["X2"], mu_exp, max_degree, work, ctx)
    mode3 = _family_mode_trace(all_ops, fams["X3"], mu_exp, max_degree, work, ctx)
    base23 = mode2.mul(mode3, ctx)
    def tower_monomial(cc):
        zm = _zero_mode_monomial(all_ops, fams["X2"], -2 * cc) * _zero_mode_monomial(
            all_ops, fams["X3"], 2 * cc
        )
        w = mu_exp * (-cc * (cc + 1) / 2 + cc * (cc + 1) / 2) + 2 * cc * nu.qexp
        return zm * Monomial.q(w)

    # the zero-mode y power is affine in the tower charge; solve the residue
    # condition (mode power) + (zero-mode power) = -1 per mode power
    p0 = tower_monomial(Fraction(0)).vexp.get(y_var, Fraction(0))
    p1 = tower_monomial(Fraction(1)).vexp.get(y_var, Fraction(0)) - p0
    if p1 == 0:
        raise NonTruncating("projector zero modes carry no tower charge")
    rate_plus, rate_minus = _y_flow_rates(all_ops, mu, max_degree, order, y_var)
    res = MSeries()
    for e in sorted(base23.powers_of(y_var)):
        cc = Fraction(-1 - e - p0, 1) / p1
        if cc.denominator != 1:
            continue
        piece = base23.coeff_of(y_var, e)
        zm = tower_monomial(cc)
        zm = Monomial(zm.coef, zm.qexp, {v: x for v, x in zm.vexp.items() if v != y_var})
        if piece.is_zero():
            # certify that the true content of this contour power cannot reach
            # back below the requested order once the tower weight lands
            rate = rate_plus if e > 0 else rate_minus
            if rate is None or rate * abs(e) + zm.qexp < order:
                raise NonTruncating(
                    f"cannot certify the dropped contour power {e}; raise the degree cap"
                )
            continue
        res = res + piece.mul(MSeries.from_monomial(zm), ctx)
    total = total.mul(res, ctx)
    return total.truncate(order), guaranteed


def _y_flow_rates(ops, mu, max_degree, order, y_var):
    """Worst valuation per unit of net contour-marker flow, by direction.

    Pairs with the annihilator strictly left of the creator are excursions
    (no grading weight); all others ride the trace and earn the mu weight.
    """
    muq = mu.qexp
    rp = None
    rm = None
    for n in range(1, max_degree + 3):
        for ia, a in enumerate(ops):
            for ib, b in enumerate(ops):
                for ta in a.xterms:
                    for tb in b.xterms:
                        if ta.fam.fid != tb.fam.fid:
                            continue
                        c, cm = ta.cre(n, order + 48)
                        d, dm = tb.ann(n, order + 48)
                        if c.is_zero() or d.is_zero():
                            continue
                        net = cm.get(y_var, 0) + dm.get(y_var, 0)
                        if net == 0:
                            continue
                        v = c.valuation() + d.valuation() + ta.fam.norm(n).valuation()
                        if not (ib < ia):
                            v += muq * n
                        r = Fraction(v, abs(net))
                        if net > 0:
                            rp = r if rp is None else min(rp, r)
                        else:
                            rm = r if rm is None else min(rm, r)
    return rp, rm
