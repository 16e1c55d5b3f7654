"""Command-line interface: ``dprime <verb> [options]``.

Verbs read key=value config files or presets and write CSV/JSON/text results
into ``--out`` (default ``results``).  Success exits 0; any failure prints a
one-line JSON error record on stderr and exits non-zero (2 for usage errors,
1 otherwise).
"""
import argparse
import json
import os
import sys
import time
from fractions import Fraction

import numpy as np

from . import __version__, gf2, qc, sim
from .baselattices import base_lattice
from .decoder import multistage_decode, recover_messages
from .encoder import LevelMessages, pack_b, random_messages
from .errors import ConfigError, DPrimeError
from .lattice import build_lattice, load_family, log2_volume, save_binary, save_family
from .presets import get_system, table1_family
from .shaping import ShapingLattice, direct_sum, estimate_shaping_gain, hypercube


class UsageError(Exception):
    pass


def _kv_file(path) -> dict:
    """``key = value`` lines into an ordered dict with line numbers."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    out = {}
    with open(path) as f:
        for ln, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"expected key = value, got {raw.strip()!r}", line=ln)
            k, v = (t.strip() for t in line.split("=", 1))
            out[k] = (v, ln)
    return out


def _overrides(pairs) -> dict:
    out = {}
    for p in pairs or []:
        if "=" not in p:
            raise UsageError(f"--set expects key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")


def _emit(obj):
    print(json.dumps(obj, sort_keys=True))


# -- design ---------------------------------------------------------------------

def _poly(text: str) -> dict:
    """``"1:1/3, 2:5/12"`` -> {1: Fraction(1, 3), 2: Fraction(5, 12)} (exponent: coefficient)."""
    out = {}
    for tok in text.split(","):
        e, c = tok.split(":")
        out[int(e)] = Fraction(c.strip())
    return out


def _intlist(text: str) -> tuple:
    return tuple(int(t) for t in text.replace(",", " ").split())


DESIGN_DEFAULTS = {"M": "12", "N": "24", "Z": "96", "girth": "8", "seed": "0",
                   "alt": "on", "A1": "5,7,9,11", "A2": "6,8,10,12",
                   "lambda": "1:1/3, 2:5/12, 3:1/8, 5:1/8", "rho": "5:2/3, 6:1/3",
                   "restarts": "100000", "time_limit": "60", "doubles": "auto"}


def _doubles(text: str, A: np.ndarray, last_set) -> tuple:
    """Double-circulant cells as 1-based ``(row, col)`` pairs.

    ``auto`` puts one in the last occupied cell of the last row of the last
    set.  With one circulant per column inside each set, the block rows of
    ``H1`` would otherwise sum to the same all-ones vector, costing a rank.
    """
    text = text.strip()
    if text == "none":
        return ()
    if text == "auto":
        if not last_set:
            return ()
        r = max(last_set)
        return ((r, int(np.nonzero(A[r - 1])[0].max()) + 1),)
    cells = []
    for tok in text.split(","):
        i, j = tok.split(":")
        cells.append((int(i), int(j)))
    return tuple(cells)


def cmd_design(args):
    cfg = {k: (v, None) for k, v in DESIGN_DEFAULTS.items()}
    if args.config:
        cfg.update(_kv_file(args.config))
    cfg.update({k: (v, None) for k, v in _overrides(args.set).items()})
    for k in cfg:
        if k not in DESIGN_DEFAULTS:
            raise ConfigError(f"unknown key {k!r}", line=cfg[k][1], field=k)
    try:
        val = {k: v for k, (v, _) in cfg.items()}
        M, N, Z = int(val["M"]), int(val["N"]), int(val["Z"])
        dist = qc.DegreeDistribution.from_polynomials(_poly(val["lambda"]), _poly(val["rho"]))
        A1, A2 = _intlist(val["A1"]), _intlist(val["A2"])
        girth, seed = int(val["girth"]), int(val["seed"])
        restarts, tlim = int(val["restarts"]), float(val["time_limit"])
        alt = val["alt"] == "on"
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"bad design parameter: {e}") from None
    t0 = time.perf_counter()
    P = qc.solve_placement(M, N, dist, A1=A1, A2=A2, alt=alt, time_limit=tlim)
    t1 = time.perf_counter()
    doubles = _doubles(val["doubles"], np.asarray(P.A), A2 or A1)
    p0 = qc.assign_shifts(P, Z, girth, seed=seed, restarts=restarts, doubles=doubles)
    p1 = qc.derive_h1(p0, A1, A2)
    t2 = time.perf_counter()
    out = _outdir(args)
    p0.save(os.path.join(out, "h0.proto"))
    p1.save(os.path.join(out, "h1.proto"))
    np.savetxt(os.path.join(out, "placement.txt"), np.asarray(P.A), fmt="%d")
    report = {"M": M, "N": N, "Z": Z, "girth_target": girth, "seed": seed, "A1": A1, "A2": A2,
              "doubles": [list(c) for c in doubles], "placement_seconds": t1 - t0, "shift_seconds": t2 - t1,
              "files": ["h0.proto", "h1.proto", "placement.txt"]}
    _write_json(os.path.join(out, "design.json"), report)
    _emit(report)


# -- lift / verify --------------------------------------------------------------

def _protos(args):
    if getattr(args, "preset", None):
        if args.preset != "table1":
            raise UsageError(f"unknown preset {args.preset!r}")
        return qc.table1(), qc.table2()
    if not args.h0:
        raise UsageError("give --preset or --h0 (and optionally --h1)")
    p0 = qc.PrototypeMatrix.load(args.h0)
    if args.h1:
        p1 = qc.PrototypeMatrix.load(args.h1)
    else:
        p1 = qc.derive_h1(p0, _intlist(args.A1), _intlist(args.A2))
    return p0, p1


def cmd_lift(args):
    p0, p1 = _protos(args)
    H0, H1 = qc.lift(p0), qc.lift(p1)
    out = _outdir(args)
    save_binary(H0, os.path.join(out, "H0.txt"))
    save_binary(H1, os.path.join(out, "H1.txt"))
    files = ["H0.txt", "H1.txt"]
    report = {"n": H0.shape[1], "H0_rows": H0.shape[0], "H1_rows": H1.shape[0]}
    if not args.no_family:
        fam = qc.build_family(H0, H1, seed=args.seed)
        save_family(fam, os.path.join(out, "family.txt"))
        files.append("family.txt")
        report.update({"k": list(fam.k), "gap": fam.g})
    report["files"] = files
    _write_json(os.path.join(out, "lift.json"), report)
    _emit(report)


def _girth(H):
    ok, shortest = qc.girth_check(H, 8)
    # shortest is None when no cycle of length <= 8 exists
    return {"girth_at_least_8": bool(ok), "shortest_cycle_up_to_8": shortest}


def cmd_verify(args):
    p0, p1 = _protos(args)
    H0, H1 = qc.lift(p0), qc.lift(p1)
    try:
        fam = table1_family() if args.preset == "table1" else qc.build_family(H0, H1, seed=args.seed)
    except DPrimeError:
        fam = None
    n = H0.shape[1]
    r0, r1 = gf2.rank(H0), gf2.rank(H1)
    g0, g1 = _girth(H0), _girth(H1)
    nested = qc.verify_nested(H0, H1)
    unimodular, log2v = False, None
    if fam is not None:
        try:
            log2v = log2_volume(build_lattice(fam))
            unimodular = True
        except DPrimeError:
            pass
    report = {"n": n, "rank": [r0, r1], "rate": [(n - r0) / n, (n - r1) / n],
              "girth": {"H0": g0, "H1": g1}, "nested": nested,
              "unimodular": unimodular, "log2_volume": log2v}
    ok = g0["girth_at_least_8"] and g1["girth_at_least_8"] and nested and unimodular
    report["ok"] = bool(ok)
    out = _outdir(args)
    _write_json(os.path.join(out, "verify.json"), report)
    print(f"n: {n}")
    print(f"rank: {r0}/{r1}")
    print(f"girth >= 8: {'yes' if g0['girth_at_least_8'] and g1['girth_at_least_8'] else 'no'}")
    print(f"nested: {'yes' if nested else 'no'}")
    print(f"unimodular: {'yes' if unimodular else 'no'}")
    if not ok:
        raise DPrimeError("verification failed")


# -- encode / decode ------------------------------------------------------------

def _system(source):
    try:
        return get_system(source)
    except KeyError:
        pass
    if not os.path.exists(source):
        raise UsageError(f"unknown lattice {source!r}")
    return build_lattice(load_family(source))


def _read_messages(path, sys_):
    with open(path) as f:
        obj = json.load(f)
    recs = obj if isinstance(obj, list) else [obj]
    msgs = []
    for r in recs:
        m = LevelMessages([np.asarray(u, dtype=np.int64) for u in r["u"]],
                          np.asarray(r["z"], dtype=np.int64))
        m.validate(sys_)
        msgs.append(m)
    return msgs


def cmd_encode(args):
    sys_ = _system(args.lattice)
    if args.messages:
        msgs = _read_messages(args.messages, sys_)
    else:
        rng = np.random.default_rng(args.seed)
        msgs = [random_messages(sys_, rng, zmax=args.zmax) for _ in range(args.random)]
    B = np.stack([pack_b(sys_, m) for m in msgs], axis=1)
    X = sys_.generate(B)
    out = _outdir(args)
    np.savetxt(os.path.join(out, "points.txt"), X.T, fmt="%d")
    recs = [{"u": [u.tolist() for u in m.u], "z": m.z.tolist()} for m in msgs]
    _write_json(os.path.join(out, "messages.json"), recs)
    report = {"lattice": args.lattice, "count": len(msgs), "seed": args.seed,
              "files": ["points.txt", "messages.json"]}
    _write_json(os.path.join(out, "encode.json"), report)
    _emit(report)


def cmd_decode(args):
    sys_ = _system(args.lattice)
    Y = np.loadtxt(args.input, ndmin=2)
    if Y.shape[1] != sys_.n:
        raise UsageError(f"each input row needs {sys_.n} values, got {Y.shape[1]}")
    tr = multistage_decode(sys_, Y.T, sigma=args.sigma, max_flips=args.max_flips,
                           keep_trace=False)
    out = _outdir(args)
    np.savetxt(os.path.join(out, "decoded.txt"), tr.x.T, fmt="%d")
    recs = []
    for j in range(Y.shape[0]):
        if tr.failed[j]:
            recs.append(None)
            continue
        m = recover_messages(sys_, tr.x[:, j])
        recs.append({"u": [u.tolist() for u in m.u], "z": m.z.tolist()})
    _write_json(os.path.join(out, "decoded_messages.json"), recs)
    report = {"lattice": args.lattice, "count": int(Y.shape[0]), "sigma": args.sigma,
              "failures": int(tr.failed.sum()),
              "files": ["decoded.txt", "decoded_messages.json"]}
    _write_json(os.path.join(out, "decode.json"), report)
    _emit(report)


# -- simulate / shaping-gain ----------------------------------------------------

def _progress(pi, trials, errors):
    print(f"point {pi}: {trials} trials, {errors} errors", file=sys.stderr)


def cmd_simulate(args):
    if not args.config:
        raise UsageError("simulate needs --config")
    cfg = sim.load_config(args.config, _overrides(args.set))
    curve = sim.run_wer(cfg, progress=_progress if args.verbose else None)
    out = _outdir(args)
    sim.write_csv(curve, os.path.join(out, f"{cfg.name}.csv"))
    sim.write_json(curve, os.path.join(out, f"{cfg.name}.json"))
    sys.stdout.write(sim.csv_text(curve))


def _shaping_for(name: str) -> ShapingLattice:
    name = name.lower()
    if name in ("hypercube", "z"):
        return hypercube(8, 8)
    b = base_lattice(name)
    return direct_sum(name, (1, b.q), b.dim)


def cmd_shaping_gain(args):
    s = _shaping_for(args.lattice)
    samples = int(float(args.samples))
    if samples <= 0:
        raise UsageError("--samples must be positive")
    gain, se = estimate_shaping_gain(s, samples=samples, seed=args.seed, return_stderr=True)
    report = {"lattice": args.lattice, "samples": samples, "seed": args.seed,
              "gain_db": gain, "stderr_db": se}
    out = _outdir(args)
    _write_json(os.path.join(out, f"shaping_gain_{args.lattice}.json"), report)
    _emit(report)


# -- entry point ----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dprime", description="Construction D' lattice toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def common(sp_):
        sp_.add_argument("--out", default="results", help="results directory")
        return sp_

    d = common(sub.add_parser("design", help="placement search and shift assignment"))
    d.add_argument("--config")
    d.add_argument("--set", action="append", metavar="KEY=VALUE")

    for verb in ("lift", "verify"):
        q = common(sub.add_parser(verb, help="lift prototypes" if verb == "lift"
                                  else "girth, rank, nesting and unimodularity report"))
        q.add_argument("--preset")
        q.add_argument("--h0", help="H0 prototype file")
        q.add_argument("--h1", help="H1 prototype file (default: derived from --A1/--A2)")
        q.add_argument("--A1", default="5,7,9,11")
        q.add_argument("--A2", default="6,8,10,12")
        q.add_argument("--seed", type=int, default=0)
        if verb == "lift":
            q.add_argument("--no-family", action="store_true",
                           help="skip the unimodular completion")

    e = common(sub.add_parser("encode", help="messages to lattice points"))
    e.add_argument("--lattice", default="table1")
    e.add_argument("--messages", help="JSON file holding a list of {u: [...], z: [...]}")
    e.add_argument("--random", type=int, default=1)
    e.add_argument("--zmax", type=int, default=4)
    e.add_argument("--seed", type=int, default=0)

    c = common(sub.add_parser("decode", help="multistage decoding of received vectors"))
    c.add_argument("--lattice", default="table1")
    c.add_argument("--input", required=True, help="text file, one received vector per row")
    c.add_argument("--sigma", type=float, default=0.25)
    c.add_argument("--max-flips", type=int, default=50)

    s = common(sub.add_parser("simulate", help="WER curve from a config file"))
    s.add_argument("--config")
    s.add_argument("--set", action="append", metavar="KEY=VALUE")
    s.add_argument("-v", "--verbose", action="store_true")

    g = common(sub.add_parser("shaping-gain", help="Monte-Carlo shaping gain"))
    g.add_argument("--lattice", default="e8")
    g.add_argument("--samples", default="1e6")
    g.add_argument("--seed", type=int, default=0)
    return p


COMMANDS = {"design": cmd_design, "lift": cmd_lift, "verify": cmd_verify,
            "encode": cmd_encode, "decode": cmd_decode, "simulate": cmd_simulate,
            "shaping-gain": cmd_shaping_gain}


def _error_record(kind, exc):
    if isinstance(exc, OSError) or not exc.args:
        msg = str(exc)
    else:
        msg = str(exc.args[0])
    rec = {"error": kind, "message": msg}
    for attr in ("line", "field"):
        v = getattr(exc, attr, None)
        if v is not None:
            rec[attr] = v
    return rec


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.verb](args)
        return 0
    except UsageError as e:
        print(json.dumps(_error_record("UsageError", e)), file=sys.stderr)
        return 2
    except DPrimeError as e:
        print(json.dumps(_error_record(e.code, e)), file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as e:
        print(json.dumps(_error_record(type(e).__name__, e)), file=sys.stderr)
        return 1
