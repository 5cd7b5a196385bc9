"""Command-line front end.

    hypershift targets dump --from 1 --to 50
    hypershift schedule build --mode accelerated --density const:1 --upto-step 4
    hypershift hvector blocks --upto 60
    hypershift hvector materialize --blocks 30 --len 400
    hypershift verify orbit --z 2,0 --l 1 --mode accelerated
    hypershift verify covering --l 3 --s 1.3 --delta 0.05
    hypershift verify density --grid zs.txt --lmax 10 --out table.csv

Tables go out as CSV and summaries as JSON; big integers are decimal strings.
Exit status: 0 success, 2 when the answer lies past exact reach (the JSON
report carries the bracket), 1 on any other error.
"""

import argparse
import csv
import hashlib
import io
import json
import os
import random
import sys
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

import mpmath

from . import __version__
from .errors import BudgetExceeded, DivergenceViolated, HypershiftError, OutOfReach
from .hvector import HVector
from .multiplier import Multiplier
from .numerics import PRECISION_ENV, env_precision_bits, mid, precision
from .schedule import Schedule, ScheduleConfig
from .targets import enumerate_target, format_coords
from .verify import covering_check, density_demo, hypercyclicity_check, reverify

EXIT_OK, EXIT_ERROR, EXIT_REACH = 0, 1, 2

_SOURCES = ("targets.py", "slowfn.py", "schedule.py", "numerics.py", "hvector.py")


def version_hash():
    """sha256 over the package version and the sources that determine numbers."""
    h = hashlib.sha256(__version__.encode())
    here = Path(__file__).parent
    for name in _SOURCES:
        h.update(name.encode())
        h.update((here / name).read_bytes())
    return h.hexdigest()


@contextmanager
def _big_ints():
    old = sys.get_int_max_str_digits()
    sys.set_int_max_str_digits(0)
    try:
        yield
    finally:
        sys.set_int_max_str_digits(old)


def _num(x, digits=17):
    """Decimal text of an interval midpoint."""
    if x is None:
        return ""
    if isinstance(x, Fraction):
        return mpmath.nstr(mpmath.mpf(x.numerator) / x.denominator, digits)
    return mpmath.nstr(mid(x), digits)


@contextmanager
def _sink(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _emit_json(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True)
    with _sink(path) as fh:
        fh.write(text + "\n")


# ---------------------------------------------------------------------------
# configuration

def _add_schedule_options(p, default_mode="accelerated"):
    g = p.add_argument_group("schedule")
    g.add_argument("--mode", choices=("faithful", "accelerated", "complex"), default=default_mode,
                   help="faithful real (lnln), faithful complex (lnlnln, sweep theta) or accelerated")
    g.add_argument("--density", default=None, help="lnln, lnlnln, ln or const:C")
    g.add_argument("--increment", choices=("jump", "square", "flat"), default=None)
    g.add_argument("--theta", default=None, help="none, sweep or grid:T")
    g.add_argument("--first-step", type=int, default=None)
    g.add_argument("--k-start", type=int, default=None)
    g.add_argument("--budget", type=int, default=None, help="cycle starts scanned per step")
    g.add_argument("--precision", type=int, default=None,
                   help=f"working digits (overridden by ${PRECISION_ENV})")


def _schedule_config(args, complex_z=False):
    mode = args.mode
    kw = {}
    if args.k_start is not None:
        kw["k_start"] = args.k_start
    if args.budget is not None:
        kw["budget"] = args.budget
    if mode == "faithful":
        for name in ("density", "increment", "theta", "first_step"):
            if getattr(args, name) is not None:
                raise HypershiftError(f"--{name.replace('_', '-')} is fixed in faithful mode")
        if complex_z:
            raise HypershiftError("complex z needs --mode complex or an accelerated theta grid")
        return ScheduleConfig.faithful_real(**kw)
    if mode == "complex":
        for name in ("density", "increment", "theta", "first_step"):
            if getattr(args, name) is not None:
                raise HypershiftError(f"--{name.replace('_', '-')} is fixed in faithful complex mode")
        return ScheduleConfig.faithful_complex(**kw)
    want_complex = complex_z or (args.theta not in (None, "none"))
    if want_complex:
        defaults = {"density": "const:10", "increment": "flat", "first_step": 5, "theta": "grid:12"}
    else:
        defaults = {"density": "const:10", "increment": "square", "first_step": 2, "theta": None}
    for name, value in defaults.items():
        v = getattr(args, name)
        kw[name] = value if v is None else v
    return ScheduleConfig.accelerated(**kw)


def _schedule(args, complex_z=False):
    cfg = _schedule_config(args, complex_z)
    sched = Schedule(cfg)
    digits = args.precision
    if digits is not None:
        if cfg.mode == "faithful" and digits < 50:
            raise HypershiftError("faithful mode needs --precision of at least 50 digits")
        if digits < 15:
            raise HypershiftError("--precision must be at least 15 digits")
    bits = env_precision_bits()
    if bits is None and digits is not None:
        bits = int(digits * 3.3219280948873626) + 1
    if bits is None and cfg.mode == "faithful":
        bits = 167
    if bits is not None:
        sched.min_bits = max(sched.min_bits, bits)
    return sched


def _report(args, sched=None, **extra):
    out = {"version": version_hash(), "package_version": __version__,
           "command": f"{args.group} {args.cmd}"}
    if sched is not None:
        out["config"] = sched.config.as_dict()
        out["config"]["k_start"] = sched.k_start
        out["config"]["min_bits"] = sched.min_bits
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# commands

def cmd_targets_dump(args):
    if args.from_ < 1 or args.to < args.from_:
        raise HypershiftError("need 1 <= --from <= --to")
    with _sink(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["l", "coords", "alpha_l", "eps_l"])
        for l in range(args.from_, args.to + 1):
            t = enumerate_target(l)
            w.writerow([l, format_coords(t.coords), repr(t.log_norm), repr(t.cone_radius)])
    return EXIT_OK


def _step_summary(st):
    row = {"q": st.q, "N": str(st.N), "M_N": str(st.M_N), "d": str(st.d), "engine": st.kind}
    try:
        end = st.end()
        row["end"] = {"index": str(end.index), "M_bits": end.M.bit_length(), "y": _num(end.y, 30)}
        return row, None
    except BudgetExceeded as exc:
        row["bracket"] = exc.bracket.as_dict() if exc.bracket else None
        row["status"] = str(exc)
        return row, exc
    except DivergenceViolated as exc:
        row["divergence"] = {"message": str(exc), "bound": None if exc.bound is None else str(exc.bound)}
        return row, exc


def cmd_schedule_build(args):
    sched = _schedule(args)
    q0 = sched.config.first_step
    if args.upto_step < q0:
        raise HypershiftError(f"--upto-step must be at least {q0}")
    steps, stop = [], None
    for q in range(q0, args.upto_step + 1):
        row, stop = _step_summary(sched.step(q))
        steps.append(row)
        if stop is not None:
            break
    k_hi = args.entries_upto if args.entries_upto is not None else sched.k_start + 200
    with _sink(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "M", "y", "theta", "x", "log_r", "j", "q"])
        for k in range(sched.k_start, k_hi + 1):
            try:
                e = sched.entry(k)
            except (BudgetExceeded, DivergenceViolated):
                break
            if e.q > args.upto_step:
                break
            w.writerow([k, str(e.M), _num(e.y), _num(e.theta) if e.theta is not None else "",
                        _num(e.x), _num(e.log_r), e.j, e.q])
    _emit_json(_report(args, sched, steps=steps), args.summary)
    return EXIT_REACH if stop is not None else EXIT_OK


def cmd_hvector_blocks(args):
    sched = _schedule(args)
    hv = HVector(sched)
    with _sink(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "M_k", "width", "j", "log_amp", "phase", "substituted"])
        for k in range(sched.k_start, args.upto + 1):
            b = hv.block(k)
            w.writerow([k, str(b.start), str(b.width), b.j, _num(b.log_amp), _num(b.phase, 17),
                        int(b.substituted)])
    return EXIT_OK


def cmd_hvector_materialize(args):
    sched = _schedule(args)
    hv = HVector(sched)
    vec = hv.materialize(args.blocks, args.len)
    with _sink(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "re", "im"])
        for i, c in enumerate(vec):
            w.writerow([i, repr(float(c.real)), repr(float(c.imag))])
    return EXIT_OK


def cmd_verify_orbit(args):
    z = Multiplier.parse(args.z)
    sched = _schedule(args, complex_z=not z.is_positive_real)
    w = hypercyclicity_check(sched, z, args.l, K=args.K)
    ok = reverify(sched, w, factor=2, z=z) if args.reverify else None
    _emit_json(_report(args, sched, witness=w.as_dict(), reverified=ok), args.out)
    return EXIT_OK


def cmd_verify_covering(args):
    sched = _schedule(args)
    if args.samples:
        rng = random.Random(args.seed)
        rows = []
        for _ in range(args.samples):
            l = rng.randint(1, args.l)
            s = Fraction(rng.randint(0, 10 ** 6), 10 ** 6) * (Fraction(args.s_max) - Fraction(args.s)) + Fraction(args.s)
            w = covering_check(sched, l, s, Fraction(args.delta), K=args.K)
            ok = reverify(sched, w, factor=2)
            rows.append([l, str(s), w.k.bit_length(), w.q, repr(w.value), int(ok)])
        with _sink(args.out) as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["l", "s", "k_bits", "q", "abs_u", "reverified"])
            wr.writerows(rows)
        return EXIT_OK
    w = covering_check(sched, args.l, Fraction(args.s), Fraction(args.delta), K=args.K)
    _emit_json(_report(args, sched, witness=w.as_dict()), args.out)
    return EXIT_OK


def cmd_verify_density(args):
    zs = [line.strip() for line in Path(args.grid).read_text().splitlines()
          if line.strip() and not line.lstrip().startswith("#")]
    mults = [Multiplier.parse(z) for z in zs]
    real = _schedule(args) if any(m.is_positive_real for m in mults) else None
    cx = _schedule(args, complex_z=True) if any(not m.is_positive_real for m in mults) else None
    rows = density_demo(real, cx, mults, args.lmax)
    with _sink(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        keys = ["z", "l", "status", "q", "k_bits", "margin", "log_dist"]
        w.writerow(keys)
        for r in rows:
            w.writerow([r[k] for k in keys])
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser():
    p = argparse.ArgumentParser(prog="hypershift", description="Common hypercyclic vector for zB, |z| > 1.")
    p.add_argument("--config", help="key=value file; command-line flags win")
    p.add_argument("--version", action="version", version=f"hypershift {__version__}")
    groups = p.add_subparsers(dest="group", required=True)

    t = groups.add_parser("targets").add_subparsers(dest="cmd", required=True)
    d = t.add_parser("dump", help="CSV of the target enumeration")
    d.add_argument("--from", dest="from_", type=int, default=1)
    d.add_argument("--to", type=int, default=50)
    d.add_argument("--out")
    d.set_defaults(func=cmd_targets_dump)

    s = groups.add_parser("schedule").add_subparsers(dest="cmd", required=True)
    b = s.add_parser("build", help="entries CSV and step summaries JSON")
    _add_schedule_options(b)
    b.add_argument("--upto-step", type=int, required=True)
    b.add_argument("--entries-upto", type=int, default=None, help="last index written to the CSV")
    b.add_argument("--out", help="entries CSV (default stdout)")
    b.add_argument("--summary", help="step summaries JSON (default stdout)")
    b.set_defaults(func=cmd_schedule_build)

    h = groups.add_parser("hvector").add_subparsers(dest="cmd", required=True)
    hb = h.add_parser("blocks", help="per-block CSV")
    _add_schedule_options(hb)
    hb.add_argument("--upto", type=int, required=True)
    hb.add_argument("--out")
    hb.set_defaults(func=cmd_hvector_blocks)
    hm = h.add_parser("materialize", help="coordinates of f as CSV")
    _add_schedule_options(hm)
    hm.add_argument("--blocks", type=int, required=True)
    hm.add_argument("--len", type=int, required=True)
    hm.add_argument("--out")
    hm.set_defaults(func=cmd_hvector_materialize)

    v = groups.add_parser("verify").add_subparsers(dest="cmd", required=True)
    vo = v.add_parser("orbit", help="witness JSON for one (z, l)")
    _add_schedule_options(vo)
    vo.add_argument("--z", required=True, help="RE,IM or polar:R,TURNS (R may be e)")
    vo.add_argument("--l", type=int, required=True)
    vo.add_argument("--K", type=int, default=None)
    vo.add_argument("--reverify", action="store_true", help="recheck at doubled precision")
    vo.add_argument("--out")
    vo.set_defaults(func=cmd_verify_orbit)
    vc = v.add_parser("covering", help="covering witness JSON, or a sampled CSV")
    _add_schedule_options(vc)
    vc.add_argument("--l", type=int, required=True, help="target index (largest index when sampling)")
    vc.add_argument("--s", required=True, help="log-modulus (lower end when sampling)")
    vc.add_argument("--s-max", default="3")
    vc.add_argument("--delta", required=True)
    vc.add_argument("--K", type=int, default=None)
    vc.add_argument("--samples", type=int, default=0)
    vc.add_argument("--seed", type=int, default=0)
    vc.add_argument("--out")
    vc.set_defaults(func=cmd_verify_covering)
    vd = v.add_parser("density", help="witness table over a grid of z")
    _add_schedule_options(vd)
    vd.add_argument("--grid", required=True, help="file with one z per line")
    vd.add_argument("--lmax", type=int, default=10)
    vd.add_argument("--out")
    vd.set_defaults(func=cmd_verify_density)
    return p


def _config_tokens(path):
    tokens = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise HypershiftError(f"config line {raw!r} is not key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        tokens += [f"--{key.replace('_', '-')}", value]
    return tokens


def _with_config(argv):
    """Splice key=value settings from --config in front of the command's own flags."""
    argv = list(argv)
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    path = argv[i + 1]
    del argv[i: i + 2]
    return argv[:2] + _config_tokens(path) + argv[2:]


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        argv = _with_config(argv)
    except (HypershiftError, OSError, IndexError) as exc:
        print(f"hypershift: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with _big_ints():
            return args.func(args)
    except (OutOfReach, BudgetExceeded) as exc:
        br = getattr(exc, "bracket", None)
        with _big_ints():
            _emit_json(_report(args, status="out_of_reach", message=str(exc),
                               bracket=br.as_dict() if br is not None else None),
                       getattr(args, "out", None) if args.cmd == "orbit" else None)
        return EXIT_REACH
    except DivergenceViolated as exc:
        _emit_json(_report(args, status="divergence", message=str(exc),
                           bound=None if exc.bound is None else str(exc.bound)))
        return EXIT_REACH
    except (HypershiftError, ValueError, OSError) as exc:
        print(f"hypershift: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
