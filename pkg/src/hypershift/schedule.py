"""The inductive construction of M_k, y_k (and theta_k), step by step.

Step q starts right after the last index N of step q-1 with the jump
``M_{N+1} = q^2 (M_N + 1)``, ``y_{N+1} = 2/q`` and then grows M by a fixed
increment rule.  y moves forward only at cycle starts (indices where j
returns to 1), by ``1/(q M)`` evaluated at that cycle start, and the step ends
at the first cycle start where y exceeds q.  The jump index itself never
counts as an advancing cycle start, even when j(N+1) = 1.

Two engines evaluate a step:

* ``_ArithmeticStep`` handles integer constant densities.  Cycle starts are an
  arithmetic progression, so y at the m-th advance is a shifted harmonic sum
  and ``H(A, D, m) = (psi(A/D + m) - psi(A/D)) / D`` gives every entry, and
  the step end, in closed form.
* ``_ScanStep`` handles any density.  The first ``exact_cycles`` cycle starts
  are accumulated in interval arithmetic; beyond that numpy chunks are summed
  with an explicit relative error bound.  When the scan budget runs out a
  two-sided bracket for the step end is derived from monotone bounds on M.

Increment rules (``M_{k+1} - M_k``):

* ``jump``:   ``d + q floor(g(k))`` with ``d = M_{N+1} - M_N``;
* ``square``: ``q^2 + q floor(g(k))``;
* ``flat``:   ``q^2`` (constant densities only).

The last two keep the exponent of M polynomial in q so that accelerated runs
complete several steps.  Both still give the in-step gap ``M_{k+1}x_{k+1} -
M_k x_k >= 2q - 1``.
"""

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from mpmath import iv

from .errors import (BudgetExceeded, ConfigError, DivergenceViolated, PrecisionUndecidable)
from .numerics import (DEFAULT_MAX_BITS, MIN_BITS, env_precision_bits, harmonic, harmonic_crossing,
                       hi, lo, precision, to_iv)
from .slowfn import CycleMap, parse_density
from .targets import enumerate_target

MODES = ("faithful", "accelerated")
INCREMENTS = ("jump", "square", "flat")
_GUARD = 96


def _parse_theta(theta):
    if theta is None or theta == "none":
        return None
    if theta == "sweep":
        return "sweep"
    if isinstance(theta, str) and theta.startswith("grid:"):
        try:
            t = int(theta[5:])
        except ValueError:
            raise ConfigError(f"bad theta rule {theta!r}")
        if t < 1:
            raise ConfigError("theta grid size must be at least 1")
        return f"grid:{t}"
    raise ConfigError(f"unknown theta rule {theta!r}; expected none, sweep or grid:T")


@dataclass(frozen=True)
class ScheduleConfig:
    """Everything that determines a schedule.

    ``theta`` is None for the real construction, ``"sweep"`` for the sweep rule
    (theta climbs by 1/(qM) per cycle start, y moves once per completed sweep)
    or ``"grid:T"`` (theta = (i mod T)/T at the i-th cycle start, y moves every
    T-th cycle start).
    """

    mode: str = "accelerated"
    density: str = "const:1"
    increment: str = "square"
    theta: str = None
    first_step: int = 2
    k_start: int = None
    budget: int = 10 ** 9
    exact_cycles: int = 65536
    chunk: int = 1 << 20
    prefix_bits: int = 256
    max_bits: int = DEFAULT_MAX_BITS
    engine: str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "theta", _parse_theta(self.theta))
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.increment not in INCREMENTS:
            raise ConfigError(f"increment must be one of {INCREMENTS}, got {self.increment!r}")
        g = parse_density(self.density)
        if self.mode == "faithful":
            want = "lnlnln" if self.theta else "lnln"
            if self.density != want:
                raise ConfigError(f"faithful {'complex' if self.theta else 'real'} mode uses density {want}")
            if self.increment != "jump" or self.first_step != 2:
                raise ConfigError("faithful mode uses the jump increment and starts at step 2")
            if self.theta not in (None, "sweep"):
                raise ConfigError("faithful complex mode uses the sweep theta rule")
        if self.increment == "flat" and g.constant is None:
            raise ConfigError("the flat increment needs a constant density")
        if self.first_step < 2:
            raise ConfigError("steps are numbered from 2")
        if self.budget < 1:
            raise ConfigError("budget must be at least 1")
        if self.engine not in ("auto", "closed-form", "scan"):
            raise ConfigError("engine must be auto, closed-form or scan")
        if self.engine == "closed-form" and not (g.is_integer_constant and self.theta != "sweep"):
            raise ConfigError("the closed-form engine needs an integer constant density and no sweep theta")

    @classmethod
    def faithful_real(cls, **kw):
        return cls(mode="faithful", density="lnln", increment="jump", theta=None, **kw)

    @classmethod
    def faithful_complex(cls, **kw):
        return cls(mode="faithful", density="lnlnln", increment="jump", theta="sweep", **kw)

    @classmethod
    def accelerated(cls, density="const:1", increment="square", first_step=2, theta=None, **kw):
        return cls(mode="accelerated", density=density, increment=increment, first_step=first_step,
                   theta=theta, **kw)

    @property
    def is_complex(self):
        return self.theta is not None

    @property
    def grid(self):
        if self.theta and self.theta.startswith("grid:"):
            return int(self.theta[5:])
        return None

    def as_dict(self):
        return {
            "mode": self.mode, "density": self.density, "increment": self.increment,
            "theta": self.theta, "first_step": self.first_step, "k_start": self.k_start,
            "budget": self.budget, "exact_cycles": self.exact_cycles,
        }


@dataclass(frozen=True)
class ScheduleEntry:
    """One index of the schedule.  ``y``, ``x`` and ``log_r`` are intervals."""

    k: int
    M: int
    y: object
    theta: object
    x: object
    log_r: object
    j: int
    q: int

    @property
    def y_float(self):
        return float(iv.mpf(self.y).mid)

    @property
    def x_float(self):
        return float(iv.mpf(self.x).mid)

    @property
    def log_r_float(self):
        return float(iv.mpf(self.log_r).mid)

    @property
    def theta_float(self):
        if self.theta is None:
            return None
        return float(to_iv(self.theta).mid)


@dataclass
class StepEnd:
    """Certified end of a step: index N_m, M there, y there, number of advances."""

    q: int
    index: int
    M: int
    y: object
    advances: int


@dataclass
class Bracket:
    """Two-sided bounds on a step end past the scan budget.

    The bounds come from the state (k0, M0, y0) at the last scanned cycle start
    (the n0-th breakpoint) and two monotone envelopes of M beyond it:

    * ``M >= M0 + (k - k0) * (base + q * m0)`` with ``m0 = floor(g(k0))`` and
      breakpoints ``bp(n) >= n g(n) - 1`` give an upper bound for the
      remaining y-increments, hence the lower bound ``lo``;
    * ``M <= M0 + (k - k0) * (base + q g(k))`` with ``bp(n) <= n g(n)`` give a
      lower bound for the increments, hence ``hi``.

    Both sums are evaluated over geometric blocks of n with ratio ``1 + rho``.
    ``hi`` is None when the lower envelope never reaches the needed amount
    before n = 1e290.
    """

    q: int
    lo: int
    hi: object
    k0: int
    n0: int
    M0: int
    y0_lo: float
    y0_hi: float
    base: int
    m0: int
    rho: float
    grid: int
    scanned_cycles: int
    density: str

    def as_dict(self):
        return {
            "q": self.q, "lo": str(self.lo), "hi": None if self.hi is None else str(self.hi),
            "k0": str(self.k0), "n0": str(self.n0), "M0": str(self.M0),
            "y0_lo": repr(self.y0_lo), "y0_hi": repr(self.y0_hi), "base": str(self.base),
            "m0": self.m0, "rho": self.rho, "grid": self.grid,
            "scanned_cycles": self.scanned_cycles, "density": self.density,
        }


def step_jump(M_N, q):
    """First entry values of step q: (M_{N+1}, y_{N+1})."""
    if q < 2:
        raise ConfigError("q must be at least 2")
    return q * q * (M_N + 1), Fraction(2, q)


def bracket_bounds(density, q, k0, n0, M0, y0_lo, y0_hi, base, m0, grid=1, qg=None, rho=1 / 1024,
                   n_cap=1e290):
    """Re-derive (lo, hi) for a step end from recorded bracket constants.

    ``qg`` multiplies floor(g) in the increment (q, or 0 for the flat rule).
    Pure float evaluation; every block term carries a 1e-12 relative safety
    factor and every breakpoint estimate is widened outward.
    """
    g = parse_density(density)
    qg = q if qg is None else qg
    inc_lo = float(base + qg * m0)
    need_lo = q - y0_hi
    need_hi = q - y0_lo
    M0f = float(M0)
    up = low = 0.0
    lo_idx = hi_idx = None
    a = n0 + 1
    first = True
    while a < n_cap:
        b = max(a, int(a * (1 + rho)))
        cnt = b - a + 1
        bot = a * g.value(a) * (1 - 1e-12) - 1
        top = b * g.value(b) * (1 + 1e-12)
        # one increment is at most 1/(q M) at the smallest possible M in the block
        t_up = (1 + 1e-12) / (q * (M0f + max(bot - k0, 0.0) * inc_lo))
        up += (cnt / grid + (1 if first or grid == 1 else 0)) * t_up if grid > 1 else cnt * t_up
        if lo_idx is None and up >= need_lo:
            lo_idx = max(k0 + 1, int(math.floor(bot)))
        if not first:
            g_top = g.value(max(top, float(g.n_min))) * (1 + 1e-12)
            t_low = (1 - 1e-12) / (q * (M0f + (top - k0) * (base + qg * g_top)))
            low += (cnt // grid) * t_low
            if low > need_hi:
                hi_idx = int(math.floor(top)) + 1
                break
        first = False
        a = b + 1
    if lo_idx is None:
        lo_idx = int(n_cap)
    return lo_idx, hi_idx


class _Step:
    """State shared by both engines."""

    def __init__(self, sched, q, N, M_N):
        self.sched = sched
        self.cfg = sched.config
        self.cm = sched.cycle_map
        self.g = self.cm.g
        self.q = q
        self.N = N
        self.M_N = M_N
        self.M_jump, self.y_jump = step_jump(M_N, q)
        self.d = self.M_jump - M_N
        rule = self.cfg.increment
        self.base = self.d if rule == "jump" else q * q
        self.use_g = rule != "flat"
        self.T = self.cfg.grid or 1
        self._end = None
        self._end_error = None

    # M is exact everywhere
    def M(self, k):
        if k <= self.N:
            raise ConfigError(f"index {k} precedes step {self.q}")
        off = (k - self.N - 1) * self.base
        if self.use_g:
            off += self.q * self.g.floor_sum(self.N + 1, k - 1)
        return self.M_jump + off

    def increment_at(self, k):
        return self.base + (self.q * self.g.floor(k) if self.use_g else 0)

    def end(self):
        if self._end is not None:
            return self._end
        if self._end_error is not None:
            raise self._end_error
        try:
            self._end = self._compute_end()
        except (BudgetExceeded, DivergenceViolated) as exc:
            self._end_error = exc
            raise
        return self._end

    def contains(self, k):
        if k <= self.N:
            return False
        try:
            return k <= self.end().index
        except (BudgetExceeded, DivergenceViolated) as exc:
            br = getattr(exc, "bracket", None)
            if br is not None and k >= br.lo:
                raise BudgetExceeded(f"index {k} may lie past the end of step {self.q}", br) from None
            return True


class _ArithmeticStep(_Step):
    """Integer constant density C: cycle starts are c_i = c_1 + (i-1) C."""

    kind = "closed-form"

    def __init__(self, sched, q, N, M_N):
        super().__init__(sched, q, N, M_N)
        C = int(self.g.constant)
        self.C = C
        self.incr = self.base + (q * C if self.use_g else 0)
        self.c1 = (N + 1) // C * C + C
        A = self.M_jump + (self.c1 - N - 1) * self.incr
        self.A = A + (self.T - 1) * C * self.incr
        self.D = self.T * C * self.incr

    def M(self, k):
        if k <= self.N:
            raise ConfigError(f"index {k} precedes step {self.q}")
        return self.M_jump + (k - self.N - 1) * self.incr

    def cycle_count(self, k):
        """Number of cycle starts in (N+1, k]."""
        return 0 if k < self.c1 else (k - self.c1) // self.C + 1

    def cycle_start(self, i):
        return self.c1 + (i - 1) * self.C

    def level_of(self, k):
        return self.cycle_count(k) // self.T

    def level_start(self, m):
        return self.N + 1 if m == 0 else self.cycle_start(m * self.T)

    def theta_of(self, k):
        if not self.cfg.is_complex:
            return None
        return Fraction(self.cycle_count(k) % self.T, self.T)

    def Y(self, m, bits=None):
        """y on level m, an interval (exact rational enclosure for small m)."""
        q = self.q
        if m <= 256:
            from .numerics import harmonic_exact
            return to_iv(Fraction(2, q) + harmonic_exact(self.A, self.D, m) / q)
        return to_iv(Fraction(2, q)) + harmonic(self.A, self.D, m, bits) / q

    def Y_exact(self, m):
        if m > 256:
            return None
        from .numerics import harmonic_exact
        return Fraction(2, self.q) + harmonic_exact(self.A, self.D, m) / self.q

    def state(self, k):
        return self.Y(self.level_of(k)), self.theta_of(k)

    def level_crossing(self, tau):
        """Smallest level m with H(A, D, m) > tau (tau Fraction or interval callable)."""
        return harmonic_crossing(self.A, self.D, tau, max_bits=self.cfg.max_bits)

    def known_end(self):
        return self.end().index

    def contains(self, k):
        # a level whose y is still below q cannot hold the end, so no end computation is needed
        if k > self.N and self._end is None and self.level_inside(self.level_of(k)):
            return True
        return super().contains(k)

    def level_inside(self, m):
        """True when y on level m is certified below q, so the step outlasts level m."""
        bits = max(128, m.bit_length() + _GUARD)
        with precision(bits + 32):
            return hi(self.Y(m, bits)) < self.q

    def first_level_above(self, s_fn):
        """Smallest level m whose y exceeds s (s given as an interval callable)."""
        q = self.q
        return self.level_crossing(lambda: q * s_fn() - 2)

    def level_cycle_starts(self, m):
        """Cycle starts whose state is level m, plus the cycle that holds N+1 for m = 0."""
        out = [self.cycle_start(i) for i in range(max(1, m * self.T), (m + 1) * self.T)]
        if m == 0:
            out.insert(0, (self.N + 1) // self.C * self.C)
        return out

    def _compute_end(self):
        q = self.q
        m_end = self.level_crossing(Fraction(q * q - 2))
        idx = self.level_start(m_end)
        bits = max(self.sched.min_bits, self.M(idx).bit_length() + _GUARD)
        with precision(bits + 32):
            y = self.Y(m_end, bits=bits)
        return StepEnd(q, idx, self.M(idx), y, m_end)


class _ScanStep(_Step):
    """Any density: exact interval prefix, then float chunks with error bounds."""

    kind = "scan"
    _REL = 1e-13

    def __init__(self, sched, q, N, M_N):
        super().__init__(sched, q, N, M_N)
        self._bits = max(self.cfg.prefix_bits, self.M_jump.bit_length() + _GUARD)
        with precision(self._bits):
            self._y = to_iv(self.y_jump)
            self._theta = iv.mpf(0) if self.cfg.theta == "sweep" else None
        self._starts, self._Ms, self._ys, self._thetas = [], [], [], []
        self._count = 0
        self._n_next = self.cm.cycle_of(N + 1) + 1
        self._last_bp = N + 1
        self._prefix_done = False
        self._found = None
        # float scan state, valid once the prefix is done
        self._checkpoints = []
        self._scan_done = False

    @property
    def _cap(self):
        return min(self.cfg.exact_cycles, self.cfg.budget)

    # -- exact prefix --------------------------------------------------
    def _apply_rule(self, Mc):
        """Update y/theta at a cycle start with M = Mc; True if y moved."""
        self._count += 1
        term = iv.mpf(1) / (iv.mpf(self.q) * Mc)
        rule = self.cfg.theta
        if rule is None:
            self._y = self._y + term
            return True
        if rule == "sweep":
            s = self._theta + term
            if lo(s) >= 1:
                self._y, self._theta = self._y + term, iv.mpf(0)
                return True
            if hi(s) < 1:
                self._theta = s
                return False
            raise PrecisionUndecidable("theta sweep completion undecided")
        if self._count % self.T == 0:
            self._y = self._y + term
            return True
        return False

    def _extend_prefix(self, want_index=None):
        """Grow the exact prefix until it passes want_index, ends the step or hits the cap."""
        with precision(self._bits):
            while not self._prefix_done and self._found is None:
                if want_index is not None and self._last_bp > want_index:
                    return
                bps = self.g.breakpoints(self._n_next, self._n_next + 1024)
                self._n_next += 1024
                for b in bps.tolist():
                    if b <= self._last_bp:
                        continue
                    self._last_bp = b
                    Mc = self.M(b)
                    moved = self._apply_rule(Mc)
                    self._starts.append(b)
                    self._Ms.append(Mc)
                    self._ys.append(self._y)
                    self._thetas.append(self._theta)
                    if moved and lo(self._y) > self.q:
                        self._found = StepEnd(self.q, b, Mc, self._y, None)
                        return
                    if moved and hi(self._y) > self.q:
                        raise PrecisionUndecidable("step end undecided in the exact prefix")
                    if self._count >= self._cap:
                        self._prefix_done = True
                        self._scan_n = self.cm.cycle_of(b) + 1
                        self._scan_last = b
                        self._scan_count = self._count
                        self._scan_y = self._y
                        self._scan_done = self._count >= self.cfg.budget
                        return

    # -- float chunks --------------------------------------------------
    def _G(self, b):
        """sum_{i=N+1}^{b} floor(g(i)) for an int64 array b >= N, as floats."""
        N = self.N
        v = self.g.floor(N + 1)
        out = v * (b - N).astype(np.float64)
        top = int(b.max())
        while True:
            v += 1
            t = self.g.transition(v)
            if t is None or t > top:
                return out
            out += np.maximum(0, b - t + 1).astype(np.float64)

    def _ratios(self, c):
        """M(c) / M_{N+1} as floats, a few ulp of relative error."""
        off = (c - self.N - 1).astype(np.float64) * float(Fraction(self.base, self.M_jump))
        if self.use_g:
            off = off + self._G(c - 1) * float(Fraction(self.q, self.M_jump))
        return 1.0 + off

    def _chunk_starts(self, n_lo, n_hi, last_bp):
        bps = self.g.breakpoints(n_lo, n_hi)
        if bps.size == 0:
            return bps
        keep = np.empty(bps.shape, dtype=bool)
        keep[0] = bps[0] > last_bp
        keep[1:] = bps[1:] > bps[:-1]
        return bps[keep]

    def _advancing(self, count_before, n):
        idx = count_before + np.arange(1, n + 1, dtype=np.int64)
        return (idx % self.T) == 0

    def _scale(self):
        return iv.mpf(1) / (iv.mpf(self.q) * self.M_jump)

    def _fsum_iv(self, terms):
        S = math.fsum(terms.tolist()) if terms.size else 0.0
        err = self._REL * S
        return iv.mpf([S - err, S + err]) if S else iv.mpf(0)

    def _scan(self, until=None):
        """Run float chunks until the end is found, index ``until`` is passed or the budget is spent."""
        self._extend_prefix(want_index=until)
        if self._found is not None or not self._prefix_done or self._scan_done or self.cfg.theta == "sweep":
            return
        q = self.q
        with precision(self._bits):
            scale = self._scale()
            while self._scan_count < self.cfg.budget:
                if until is not None and self._scan_last > until:
                    return
                n, last_bp, count, y = self._scan_n, self._scan_last, self._scan_count, self._scan_y
                size = min(self.cfg.chunk, self.cfg.budget - count)
                c = self._chunk_starts(n, n + size, last_bp)[: self.cfg.budget - count]
                if c.size == 0:
                    self._scan_n = n + size
                    continue
                adv = self._advancing(count, c.size)
                terms = 1.0 / self._ratios(c[adv])
                y_new = y + scale * self._fsum_iv(terms)
                self._checkpoints.append((int(c[0]), count, n, last_bp, y))
                if hi(y_new) > q:
                    self._finish_in_chunk(c, adv, terms, y, scale)
                    return
                self._scan_last = int(c[-1])
                self._scan_n = self.cm.cycle_of(self._scan_last) + 1
                self._scan_count = count + int(c.size)
                self._scan_y = y_new
            self._scan_done = True

    def _finish_in_chunk(self, c, adv, terms, y, scale):
        """Locate the first advancing cycle with y > q inside a chunk."""
        q = self.q
        cum = np.cumsum(terms)
        est = float(lo(y)) + float(hi(scale)) * cum * (1 + 1e-9)
        cand = int(np.searchsorted(est, q, side="right"))
        adv_pos = np.nonzero(adv)[0]
        back = 8
        while True:
            p = max(cand - back, 0)
            yp = y + scale * self._fsum_iv(terms[:p])
            if hi(yp) <= q:
                break
            if p == 0:
                raise PrecisionUndecidable("step end undecided inside a float chunk")
            back *= 4
        for i in range(p, adv_pos.size):
            ci = int(c[adv_pos[i]])
            Mc = self.M(ci)
            yp = yp + iv.mpf(1) / (iv.mpf(q) * Mc)
            if lo(yp) > q:
                self._found = StepEnd(q, ci, Mc, yp, None)
                return
            if hi(yp) > q:
                raise PrecisionUndecidable("step end undecided inside a float chunk")
        raise PrecisionUndecidable("float chunk overshoot could not be located")

    # -- queries --------------------------------------------------------
    def _compute_end(self):
        if self.cfg.theta == "sweep":
            self._extend_prefix()
            if self._found is not None:
                return self._found
            bound = self.sweep_bound()
            raise DivergenceViolated(
                f"step {self.q}: each completed theta sweep multiplies M by at least {self.q}, "
                f"so y stays below {float(bound):.9g} < {self.q}", bound)
        self._scan()
        if self._found is not None:
            return self._found
        raise BudgetExceeded(f"step {self.q} did not end within {self.cfg.budget} cycle starts",
                             self.bracket())

    def contains(self, k):
        if k <= self.N:
            return False
        self._scan(until=k)
        if self._found is not None:
            return k <= self._found.index
        if not self._prefix_done or (not self._scan_done and self._scan_last > k):
            return True
        if k < self.cm.next_cycle_start(self._scan_last if self._prefix_done else self._last_bp):
            return True
        if self.cfg.theta == "sweep":
            raise BudgetExceeded(f"index {k} lies past the exact prefix of step {self.q}")
        raise BudgetExceeded(f"index {k} may lie past the end of step {self.q}", self.bracket())

    def sweep_bound(self):
        """Supremum bound 2/q + 1/(q(q-1) M_{N+1}) of y under the sweep rule."""
        q = self.q
        return Fraction(2, q) + Fraction(1, q * (q - 1) * self.M_jump)

    def bracket(self):
        """Bracket for the end index from the state after the scan budget."""
        self._scan()
        if self._found is not None:
            return None
        k0 = self._scan_last
        n0 = self.cm.cycle_of(k0)
        M0 = self.M(k0)
        m0 = self.g.floor(k0) if self.use_g else 0
        qg = self.q if self.use_g else 0
        y0_lo = float(lo(self._scan_y)) * (1 - 1e-15)
        y0_hi = float(hi(self._scan_y)) * (1 + 1e-15)
        lo_idx, hi_idx = bracket_bounds(self.cfg.density, self.q, k0, n0, M0, y0_lo, y0_hi,
                                        self.base, m0, grid=self.T, qg=qg)
        # the lower envelope counts one cycle start per n, which needs g >= 1
        if self.g.constant is None and self.g.value(k0) < 1:
            hi_idx = None
        return Bracket(self.q, lo_idx, hi_idx, k0, n0, M0, y0_lo, y0_hi, self.base, m0,
                       1 / 1024, self.T, self._scan_count, self.cfg.density)

    def _locate(self, k):
        """(cycle count, y, theta) in force at index k."""
        if k <= self.N:
            raise ConfigError(f"index {k} precedes step {self.q}")
        self._extend_prefix(want_index=k)
        if self._found is not None and k > self._found.index:
            raise ConfigError(f"index {k} lies past the end of step {self.q}")
        if not self._starts or k < self._starts[0]:
            return 0, to_iv(self.y_jump), (iv.mpf(0) if self.cfg.theta == "sweep" else None)
        in_prefix = (not self._prefix_done or self._found is not None
                     or k < self.cm.next_cycle_start(self._starts[-1]))
        if in_prefix:
            i = bisect.bisect_right(self._starts, k) - 1
            return i + 1, self._ys[i], self._thetas[i]
        if self.cfg.theta == "sweep" or self.cfg.budget <= self._count:
            raise BudgetExceeded(f"index {k} lies past the exact prefix of step {self.q}")
        self._scan(until=k)
        if self._found is not None and k > self._found.index:
            raise ConfigError(f"index {k} lies past the end of step {self.q}")
        if self._found is None and k >= self.cm.next_cycle_start(self._scan_last):
            raise BudgetExceeded(f"index {k} lies past the scanned part of step {self.q}", self.bracket())
        firsts = [cp[0] for cp in self._checkpoints]
        first, count, n, last_bp, y = self._checkpoints[bisect.bisect_right(firsts, k) - 1]
        c = self._chunk_starts(n, self.cm.cycle_of(k) + 1, last_bp)
        c = c[c <= k]
        adv = self._advancing(count, c.size)
        with precision(self._bits):
            y = y + self._scale() * self._fsum_iv(1.0 / self._ratios(c[adv]))
        return count + int(c.size), y, None

    def state(self, k):
        count, y, theta = self._locate(k)
        if self.cfg.grid:
            theta = Fraction(count % self.T, self.T)
        return y, theta

    # levels: level m is the state after the m-th y-advance; with a grid or the
    # real rule these are cycles mT .. mT+T-1 of the exact prefix
    def _level_cycle(self, m):
        if self.cfg.theta == "sweep":
            raise BudgetExceeded("sweep levels are not indexed")
        i = m * self.T
        self._extend_prefix()
        if i > len(self._starts):
            raise BudgetExceeded(f"level {m} of step {self.q} lies past the exact prefix")
        return i

    def level_start(self, m):
        if m == 0:
            return self.N + 1
        return self._starts[self._level_cycle(m) - 1]

    def Y(self, m, bits=None):
        if m == 0:
            return to_iv(self.y_jump)
        return self._ys[self._level_cycle(m) - 1]

    def known_end(self):
        """End index if the exact prefix already contains it, else None."""
        self._extend_prefix()
        return None if self._found is None else self._found.index

    def first_level_above(self, s_fn):
        self._extend_prefix()
        if self.cfg.theta == "sweep":
            raise BudgetExceeded(f"step {self.q}: y does not advance within the exact prefix")
        top = len(self._starts) // self.T
        with precision(self._bits):
            s = s_fn()
            lo_m, hi_m = 0, top
            if hi(self.Y(top)) <= lo(s):
                raise BudgetExceeded(f"y stays below s throughout the exact prefix of step {self.q}")
            while hi_m - lo_m > 1:
                m = (lo_m + hi_m) // 2
                if lo(self.Y(m)) > hi(s):
                    hi_m = m
                elif hi(self.Y(m)) <= lo(s):
                    lo_m = m
                else:
                    raise PrecisionUndecidable("level comparison undecided")
            return hi_m

    def level_cycle_starts(self, m):
        i0 = max(1, m * self.T)
        out = [self._starts[i - 1] for i in range(i0, min((m + 1) * self.T, len(self._starts) + 1))]
        if m == 0:
            out.insert(0, self.cm.breakpoint(self.cm.cycle_of(self.N + 1)))
        return out

    def cycle_table(self):
        """Exact-prefix cycle starts with M, y after the cycle, and theta."""
        self._extend_prefix()
        return list(zip(self._starts, self._Ms, self._ys, self._thetas))


class Schedule:
    """Lazy schedule for one configuration.  Steps are built on first use."""

    def __init__(self, config=None, target=enumerate_target):
        self.config = config or ScheduleConfig()
        self.cycle_map = CycleMap(self.config.density, self.config.k_start)
        self.k_start = self.cycle_map.k_start
        self.target = target
        self._steps = {}
        env = env_precision_bits()
        self.min_bits = max(MIN_BITS, env or 0)

    def __repr__(self):
        return f"Schedule({self.config!r})"

    def _engine(self):
        cfg = self.config
        if cfg.engine == "scan":
            return _ScanStep
        g = self.cycle_map.g
        if g.is_integer_constant and cfg.theta != "sweep":
            return _ArithmeticStep
        return _ScanStep

    def step(self, q):
        """The engine for step q (earlier steps are completed first)."""
        q0 = self.config.first_step
        if q < q0:
            raise ConfigError(f"schedule starts at step {q0}")
        st = self._steps.get(q)
        if st is not None:
            return st
        if q == q0:
            N, M_N = self.k_start, 1
        else:
            prev = self.step(q - 1).end()
            N, M_N = prev.index, prev.M
        st = self._steps[q] = self._engine()(self, q, N, M_N)
        return st

    def step_end(self, q):
        return self.step(q).end()

    def steps(self):
        q = self.config.first_step
        while True:
            yield self.step(q)
            q += 1

    def step_of(self, k):
        if k < self.k_start:
            raise ConfigError(f"the schedule starts at k = {self.k_start}")
        if k == self.k_start:
            return None
        for st in self.steps():
            if st.contains(k):
                return st

    def alpha(self, l):
        return self.target(l).log_norm_iv()

    def entry(self, k, bits=None):
        """Full ScheduleEntry at index k."""
        k = int(k)
        st = self.step_of(k)
        j = self.cycle_map.j(k)
        if st is None:
            M, y, theta, q = 1, iv.mpf(1), (Fraction(0) if self.config.is_complex else None), self.config.first_step - 1
            with precision(max(self.min_bits, bits or 0, 128)):
                y = iv.mpf(1)
                return self._finish(k, M, y, theta, j, q)
        M = st.M(k)
        work = max(self.min_bits, bits or 0, M.bit_length() + _GUARD)
        with precision(work):
            if isinstance(st, _ArithmeticStep):
                m = st.level_of(k)
                y = st.Y(m, work)
                theta = st.theta_of(k)
            else:
                y, theta = st.state(k)
                y = +y
            return self._finish(k, M, y, theta, j, st.q)

    def _finish(self, k, M, y, theta, j, q):
        a = self.alpha(j)
        x = y - a / M
        log_r = -(y * M) + a
        return ScheduleEntry(k, M, y, theta, x, log_r, j, q)

    def entries(self, k_lo, k_hi, bits=None):
        return [self.entry(k, bits) for k in range(k_lo, k_hi + 1)]

    def gap(self, k, bits=None):
        """M_{k+1} x_{k+1} - M_k x_k = log r_k - log r_{k+1}, as an interval."""
        e0 = self.entry(k, bits)
        e1 = self.entry(k + 1, bits)
        work = max(e1.M.bit_length() + _GUARD, bits or 0, self.min_bits)
        with precision(work):
            return iv.mpf(e0.log_r) - iv.mpf(e1.log_r)


def step_advance(sched, entry):
    """Entry k+1 from entry k by the streaming recurrence (jump, increment, y/theta rule)."""
    cfg = sched.config
    k1 = entry.k + 1
    st = sched.step_of(k1)
    cm = sched.cycle_map
    j1 = cm.j(k1)
    if k1 == st.N + 1:
        M1, y1 = step_jump(entry.M, st.q)
        theta1 = Fraction(0) if cfg.is_complex else None
        with precision(max(sched.min_bits, M1.bit_length() + _GUARD)):
            return sched._finish(k1, M1, to_iv(y1), theta1, j1, st.q)
    M1 = entry.M + st.increment_at(entry.k)
    with precision(max(sched.min_bits, M1.bit_length() + _GUARD)):
        y1 = iv.mpf(entry.y)
        theta1 = entry.theta
        if j1 == 1:
            term = iv.mpf(1) / (iv.mpf(st.q) * M1)
            if cfg.theta is None:
                y1 = y1 + term
            elif cfg.theta == "sweep":
                s = to_iv(theta1) + term
                if lo(s) >= 1:
                    y1, theta1 = y1 + term, iv.mpf(0)
                elif hi(s) < 1:
                    theta1 = s
                else:
                    raise PrecisionUndecidable("theta sweep completion undecided")
            else:
                T = cfg.grid
                nxt = (int(Fraction(theta1) * T) + 1) % T
                if nxt == 0:
                    y1 = y1 + term
                theta1 = Fraction(nxt, T)
        return sched._finish(k1, M1, y1, theta1, j1, st.q)


def stream_entries(sched, k_hi):
    """Entries k_start..k_hi by repeated step_advance (reference path)."""
    e = sched.entry(sched.k_start)
    out = [e]
    while e.k < k_hi:
        e = step_advance(sched, e)
        out.append(e)
    return out


__all__ = [
    "ScheduleConfig", "ScheduleEntry", "StepEnd", "Bracket", "Schedule", "step_jump",
    "step_advance", "stream_entries", "bracket_bounds", "MODES", "INCREMENTS",
]
