"""Witness search and certification.

Three searches share one candidate generator.  For a log-modulus s the
generator walks the steps q with ``2/q < s < q``; inside such a step it
locates the first level whose y exceeds s and offers, in increasing order of
k, every index with j(k) = l on the few levels around that crossing.  On those
levels ``u = M_k (s - y_k)`` is small, which is what all three conditions need:

* lemma condition (1): ``||v_l| e^u - ||v_l|| | < eps``;
* covering: ``|u| < delta``, i.e. ``|s - (x_k + alpha_l/M_k)| < delta/M_k``;
* orbit: ``||(zB)^{M_k} f - v_l|| < 3 eps_l``, evaluated by
  :meth:`HVector.scaled_orbit_log_distance`.

The first certified candidate is returned, so results are deterministic.
"""

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np
from mpmath import iv

from .errors import (BudgetExceeded, ConfigError, DivergenceViolated, NoWitnessInBudget, OutOfReach,
                     PatternMismatch, PrecisionUndecidable)
from .hvector import HVector
from .multiplier import Multiplier
from .numerics import decimal, escalate, hi, lo, mid, precision, to_iv

_GUARD = 96


@dataclass(frozen=True)
class Witness:
    """A certified index k for (z, l).

    ``value`` is the certified upper bound of the checked quantity in
    ``kind``-specific units (log-distance for orbit witnesses, |u| for
    covering, the lemma residual otherwise) and ``bound`` the threshold it
    clears; ``margin = bound - value`` on the same scale.
    """

    kind: str
    z: str
    l: int
    k: int
    M: int
    q: int
    value: float
    bound: float
    margin: float
    bits: int

    def as_dict(self):
        d = asdict(self)
        d["M"] = decimal(self.M)
        d["k"] = decimal(self.k)
        d["M_bits"] = self.M.bit_length()
        return d


def _s_fn(z):
    z = Multiplier.coerce(z)
    return z.log_abs


def _inside(s_fn, q, max_bits=1 << 14):
    """Certified 2/q < s < q; s too close to an edge to tell counts as outside."""
    def check():
        s = s_fn()
        if lo(s) > hi(to_iv(Fraction(2, q))) and hi(s) < q:
            return True
        if hi(s) <= lo(to_iv(Fraction(2, q))) or lo(s) >= q:
            return False
        raise PrecisionUndecidable("s sits on an edge of the step")
    try:
        return escalate(check, 128, max_bits)
    except PrecisionUndecidable:
        return False


def _below(s_fn, q):
    with precision(128):
        return hi(s_fn()) <= lo(to_iv(Fraction(2, q)))


def candidates(schedule, s_fn, l, K=None, window=2, max_steps=6, step_span=12):
    """Yield (step, k) near the level crossing of s, step by step, k increasing.

    Steps beyond ``first_step + step_span`` are never built: M grows so fast
    with q that they are out of reach anyway.
    """
    K = schedule.k_start if K is None else K
    cm = schedule.cycle_map
    used = 0
    q = schedule.config.first_step
    q_last = q + step_span
    with precision(128):
        s_lo = lo(s_fn())
    if s_lo <= 0 or 2 / s_lo >= q_last:
        need = float(2 / s_lo) if s_lo > 0 else math.inf
        raise OutOfReach(f"ln|z| = {float(s_lo):.3g} only fits steps q > {need:.3g}, past step {q_last}")
    while used < max_steps and q <= q_last:
        try:
            st = schedule.step(q)
        except (BudgetExceeded, DivergenceViolated) as exc:
            raise OutOfReach(f"step {q} starts past the reachable part of the schedule",
                             getattr(exc, "bracket", None)) from None
        q += 1
        if not _inside(s_fn, st.q):
            continue
        used += 1
        try:
            m_up = st.first_level_above(s_fn)
            inside = getattr(st, "level_inside", None)
            end = None if inside is not None and inside(m_up + window - 1) else st.known_end()
        except (BudgetExceeded, DivergenceViolated) as exc:
            raise OutOfReach(f"the crossing of s in step {st.q} lies past exact reach",
                             getattr(exc, "bracket", None)) from None
        for m in range(max(0, m_up - window), m_up + window):
            try:
                lo_k = st.level_start(m)
            except BudgetExceeded:
                break
            if end is not None and lo_k > end:
                break
            try:
                hi_k = st.level_start(m + 1) - 1
            except BudgetExceeded:
                hi_k = end
            if end is not None:
                hi_k = min(hi_k, end)
            for c in st.level_cycle_starts(m):
                k = c + l - 1
                if k < lo_k or k > hi_k or k <= K:
                    continue
                if cm.j(k) != l:
                    continue
                yield st, k


def _no_witness(schedule, what):
    if schedule.config.mode == "faithful":
        return OutOfReach(f"no {what} within exact reach")
    return NoWitnessInBudget(f"no {what} in the searched steps")


def _u(schedule, k, s_fn, bits=None):
    """u = M_k (s - y_k) at a precision resolving M_k."""
    e = schedule.entry(k, bits)
    work = max(bits or 0, e.M.bit_length() + _GUARD)
    with precision(work + 32):
        return e, e.M * (s_fn() - iv.mpf(e.y)), work


def lemma_condition_1(schedule, lam, l, eps, K=None, **kw):
    """First k > K with j(k) = l and | lam^{M_k} r_k - ||v_l|| | < eps."""
    lam = Multiplier.coerce(lam)
    if not lam.is_positive_real:
        raise ConfigError("the lemma takes a real lambda > 1")
    s_fn = lam.log_abs
    v = schedule.target(l)
    for st, k in candidates(schedule, s_fn, l, K, **kw):
        e, u, work = _u(schedule, k, s_fn)
        with precision(work + 32):
            # lam^{M} r_k = e^{M s - M y + alpha_l} = a e^u
            val = iv.sqrt(to_iv(v.norm_sq)) * abs(iv.expm1(u))
            if hi(val) < lo(to_iv(Fraction(eps))):
                return Witness("lemma", str(lam), l, k, e.M, st.q, float(hi(val)), float(eps),
                               float(eps) - float(hi(val)), work)
    raise _no_witness(schedule, "lemma witness")


def covering_check(schedule, l, s, delta, K=None, bits=None, **kw):
    """First k > K with j(k) = l and |s - (x_k + alpha_l/M_k)| < delta/M_k."""
    if delta <= 0 or (not callable(s) and s <= 0):
        raise ConfigError("s and delta must be positive")
    s_fn = (lambda: to_iv(Fraction(s))) if not callable(s) else s
    for st, k in candidates(schedule, s_fn, l, K, **kw):
        e, u, work = _u(schedule, k, s_fn, bits)
        if hi(abs(u)) < lo(to_iv(Fraction(delta))):
            return Witness("covering", str(s), l, k, e.M, st.q, float(hi(abs(u))), float(delta),
                           float(delta) - float(hi(abs(u))), work)
    raise _no_witness(schedule, "covering witness")


def covering_residual(schedule, k, s, bits=None):
    """|s - (x_k + alpha_{j(k)}/M_k)| * M_k as an interval, from scratch at the given precision."""
    s_fn = (lambda: to_iv(Fraction(s))) if not callable(s) else s
    e = schedule.entry(k, bits)
    work = max(bits or 0, e.M.bit_length() + _GUARD)
    with precision(work + 32):
        a = schedule.alpha(e.j)
        return abs(s_fn() - (iv.mpf(e.x) + a / e.M)) * e.M


def _log_three_eps(v, l):
    with precision(128):
        return iv.log(3 * v.cone_radius_iv())


def hypercyclicity_check(schedule, z, l, K=None, hv=None, **kw):
    """Witness k with ||(zB)^{M_k} f - v_l|| < 3 eps_l, certified in interval arithmetic."""
    z = Multiplier.coerce(z)
    if not schedule.config.is_complex and not z.is_positive_real:
        raise ConfigError("a real schedule only handles real z > 1; use a complex schedule")
    hv = hv or HVector(schedule)
    v = schedule.target(l)
    bound = _log_three_eps(v, l)
    for st, k in candidates(schedule, z.log_abs, l, K, **kw):
        try:
            d = hv.scaled_orbit_log_distance(z, k, l)
        except PatternMismatch:
            continue
        if hi(d) < lo(bound):
            e = schedule.entry(k)
            b = math.nextafter(float(lo(bound)), -math.inf)
            margin = math.exp(b) - math.exp(float(hi(d)))
            return Witness("orbit", str(z), l, k, e.M, st.q, float(hi(d)), b,
                           margin, e.M.bit_length() + _GUARD)
    raise _no_witness(schedule, "orbit witness")


def reverify(schedule, witness, factor=2, z=None):
    """Recompute a witness from scratch at ``factor`` times its precision; True if it still holds."""
    bits = witness.bits * factor
    if witness.kind == "covering":
        r = covering_residual(schedule, witness.k, Fraction(witness.z), bits)
        return hi(r) < witness.bound
    if witness.kind == "orbit":
        hv = HVector(schedule)
        z = Multiplier.coerce(z or witness.z)
        with precision(bits):
            old = schedule.min_bits
            schedule.min_bits = bits
            try:
                d = hv.scaled_orbit_log_distance(z, witness.k, witness.l)
            finally:
                schedule.min_bits = old
        return hi(d) < witness.bound
    lam = Multiplier.coerce(z or witness.z)
    e, u, work = _u(schedule, witness.k, lam.log_abs, bits)
    v = schedule.target(witness.l)
    with precision(work + 32):
        val = iv.sqrt(to_iv(v.norm_sq)) * abs(iv.expm1(u))
        return hi(val) < witness.bound


def subsequence(schedule, l, K=None, k_hi=None):
    """Indices k > K with j(k) = l, in increasing order (lazily)."""
    cm = schedule.cycle_map
    k = max(schedule.k_start, (K or schedule.k_start) + 1)
    n = cm.cycle_of(k)
    while True:
        c = cm.breakpoint(n)
        nxt = cm.breakpoint(n + 1)
        cand = c + l - 1
        if cand >= k and cand < nxt:
            if k_hi is not None and cand > k_hi:
                return
            yield cand
        if k_hi is not None and c > k_hi:
            return
        n += 1


@dataclass
class DivergenceReport:
    l: int
    horizon: int
    indices: list
    partial_sums: list
    minorant: dict

    def as_dict(self):
        return {"l": self.l, "horizon": self.horizon, "count": len(self.indices),
                "last_sum": self.partial_sums[-1] if self.partial_sums else 0.0,
                "minorant": {str(k): v for k, v in self.minorant.items()}}


def minorant_partial_sum(horizon, start=16):
    """sum_{s=start}^{horizon} 1 / (s lnln s lnln(s lnln s))."""
    if horizon < start:
        return 0.0
    s = np.arange(start, horizon + 1, dtype=np.float64)
    ll = np.log(np.log(s))
    terms = 1.0 / (s * ll * np.log(np.log(s * ll)))
    return math.fsum(terms.tolist())


def divergence_report(schedule, l, horizon, minorant_horizons=(10 ** 3, 10 ** 6)):
    """Partial sums of 1/M_k over k <= horizon with j(k) = l, plus minorant sums."""
    idx = []
    sums = []
    acc = []
    for k in subsequence(schedule, l, schedule.k_start - 1, horizon):
        st = schedule.step_of(k)
        M = 1 if st is None else st.M(k)
        acc.append(1.0 / M)
        idx.append(k)
        sums.append(math.fsum(acc))
    mino = {h: minorant_partial_sum(h) for h in minorant_horizons}
    return DivergenceReport(l, horizon, idx, sums, mino)


def density_demo(real_schedule, complex_schedule, z_grid, l_max, **kw):
    """Best certified margin per (z, l); failures are recorded, not raised."""
    rows = []
    hv_real = HVector(real_schedule) if real_schedule is not None else None
    hv_cx = HVector(complex_schedule) if complex_schedule is not None else None
    for z in z_grid:
        z = Multiplier.coerce(z)
        real = z.is_positive_real and real_schedule is not None
        sched, hv = (real_schedule, hv_real) if real else (complex_schedule, hv_cx)
        for l in range(1, l_max + 1):
            row = {"z": str(z), "l": l, "status": "ok", "k": "", "k_bits": "", "q": "", "margin": "",
                   "log_dist": ""}
            try:
                w = hypercyclicity_check(sched, z, l, hv=hv, **kw)
                row.update(k=decimal(w.k), k_bits=w.k.bit_length(), q=w.q, margin=repr(w.margin), log_dist=repr(w.value))
            except OutOfReach:
                row["status"] = "out_of_reach"
            except NoWitnessInBudget:
                row["status"] = "no_witness"
            rows.append(row)
    return rows


__all__ = [
    "Witness", "candidates", "lemma_condition_1", "covering_check", "covering_residual",
    "hypercyclicity_check", "reverify", "subsequence", "divergence_report", "DivergenceReport",
    "minorant_partial_sum", "density_demo",
]
