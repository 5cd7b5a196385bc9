"""Independent reference computations used by the tests.

Nothing here imports the schedule engine.  The loops are written the slow,
obvious way: one index at a time, scalar mpmath at a fixed generous precision.
"""

import math
from fractions import Fraction

import mpmath

REF_BITS = 320


def lnln_breakpoints(k_max, bits=REF_BITS):
    """Sorted distinct values floor(n ln ln n) for n >= 16, up to k_max."""
    out = []
    with mpmath.workprec(bits):
        n = 16
        while True:
            b = int(mpmath.floor(n * mpmath.log(mpmath.log(n))))
            if b > k_max:
                return out
            if not out or out[-1] != b:
                out.append(b)
            n += 1


def floor_lnln(k, bits=REF_BITS):
    with mpmath.workprec(bits):
        return int(mpmath.floor(mpmath.log(mpmath.log(k))))


def j_reference(k, bps):
    """k + 1 - (largest breakpoint <= k)."""
    best = None
    for b in bps:
        if b <= k:
            best = b
        else:
            break
    return k + 1 - best


def faithful_step2(n_entries, k0=20, bits=REF_BITS):
    """Rows (k, M, y, x) for faithful step 2 of the real construction.

    Index k0 carries M = 1, y = 1.  The jump index k0 + 1 gets M = q^2 (M + 1)
    and y = 2/q and is not treated as a cycle start.  Afterwards
    M_{k+1} = M_k + d + q floor(ln ln k) with d = M_{k0+1} - M_{k0}, and y gains
    1/(q M_k) at every cycle start k.  Targets v_1 = e_0, v_2 = e_1 have
    alpha = 0; the first 10^4 indices never reach j = 4 (alpha_4 = -ln 2), so
    x is y minus alpha/M with alpha looked up from a small table.
    """
    q = 2
    alphas = {1: 0, 2: 0, 3: 0, 4: -math.log(2)}
    k_max = k0 + n_entries
    bps = lnln_breakpoints(k_max + 1, bits)
    starts = set(bps)
    rows = []
    with mpmath.workprec(bits):
        M, y = 1, mpmath.mpf(1)
        rows.append((k0, M, y))
        M_prev = M
        M = q * q * (M + 1)
        d = M - M_prev
        y = mpmath.mpf(2) / q
        rows.append((k0 + 1, M, y))
        for k in range(k0 + 1, k_max):
            M = M + d + q * floor_lnln(k, bits)
            if k + 1 in starts:
                y = y + 1 / (mpmath.mpf(q) * M)
            rows.append((k + 1, M, y))
        out = []
        for k, M, y in rows[: n_entries]:
            jk = j_reference(k, bps)
            a = mpmath.log(2) * -1 if jk == 4 else mpmath.mpf(alphas[jk])
            out.append((k, M, y, y - a / M, jk))
    return out


def harmonic_brute(A, D, n):
    return sum((Fraction(1) / (A + i * D) for i in range(n)), Fraction(0))


def minorant_brute(horizon, start=16):
    """Same partial sum as the package, but a plain Python loop with math.fsum."""
    terms = []
    for s in range(start, horizon + 1):
        ll = math.log(math.log(s))
        terms.append(1.0 / (s * ll * math.log(math.log(s * ll))))
    return math.fsum(terms)


def constant_density_step_ends(C, q0, q_max, k0=20, bits=200):
    """Step ends of the accelerated schedule with integer constant density C and square increments.

    Cycle starts are the multiples of C, every cycle start after the jump index
    advances y by 1/(q M), and the step ends at the first cycle start with
    y > q.  A plain loop, so only short steps are feasible.
    """
    ends = []
    N, M_N = k0, 1
    with mpmath.workprec(bits):
        for q in range(q0, q_max + 1):
            M = q * q * (M_N + 1)
            y = mpmath.mpf(2) / q
            incr = q * q + q * C
            k = N + 1
            while True:
                k += 1
                M += incr
                if k % C == 0:
                    y += 1 / (mpmath.mpf(q) * M)
                    if y > q:
                        break
            ends.append((q, k, M, y))
            N, M_N = k, M
    return ends
