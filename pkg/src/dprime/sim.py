"""AWGN Monte-Carlo simulation of shaped Construction D' lattice codes.

Transmitter: random rectangular message ``b``, Voronoi point ``x'``, dither
``U`` uniform over the shaping Voronoi region, transmitted
``t = (x' - U) mod Lambda_s``.  Receiver: ``y_hat = alpha y + U`` with the
MMSE factor ``alpha = SNR / (1 + SNR)``, multistage decoding, and an error
whenever the decoded point is not in the coset ``x' + Lambda_s``.

Trials run in chunks seeded by ``(seed, point, chunk)`` and are aggregated in
chunk order, so results do not depend on the number of worker processes.
"""
import concurrent.futures as cf
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .decoder import default_decoders, multistage_decode
from .errors import ConfigError
from .lattice import LatticeSystem, build_lattice, load_family
from .presets import get_system
from .shaping import (NestedLatticeCode, code_rate, contains, estimate_shaping_gain,
                      parse_shaping, quantize)

CSV_HEADER = ["ebn0_db", "snr_db", "trials", "errors", "wer", "power", "seconds"]

__all__ = ["SimConfig", "WERCurve", "parse_config", "load_config", "build_context",
           "transmit_trial", "run_wer", "estimate_shaping_gain", "write_csv", "write_json"]


@dataclass
class SimConfig:
    """Flat key=value simulation configuration."""
    lattice: str = "table1"
    shaping: str = "hypercube:8"
    ebn0_db: list = None
    snr_db: list = None
    trials: int = 10000
    stop_errors: int = 100
    stop_wer: float = 0.0
    seed: int = 0
    max_iters: int = 50
    dither: str = "on"
    mmse: str = "on"
    batch: int = 250
    workers: int = 1
    calibration: int = 2000
    llr_clip: float = 30.0
    demap: str = "gaussian"
    record_time: str = "off"
    name: str = "wer"

    def validate(self):
        def bad(fld, msg):
            raise ConfigError(msg, line=None, field=fld)
        if self.trials <= 0:
            bad("trials", "trials must be positive")
        if self.stop_errors < 0:
            bad("stop_errors", "stop_errors must be non-negative")
        if not 0.0 <= self.stop_wer < 1.0:
            bad("stop_wer", "stop_wer must be in [0, 1)")
        grids = [g for g in (self.ebn0_db, self.snr_db) if g]
        if len(grids) != 1:
            bad("ebn0_db", "exactly one non-empty grid of ebn0_db or snr_db is required")
        if self.dither not in ("on", "zero"):
            bad("dither", "dither must be 'on' or 'zero'")
        if self.mmse not in ("on", "off"):
            bad("mmse", "mmse must be 'on' or 'off'")
        if self.record_time not in ("on", "off"):
            bad("record_time", "record_time must be 'on' or 'off'")
        if self.demap not in ("gaussian", "wrapped"):
            bad("demap", "demap must be 'gaussian' or 'wrapped'")
        for f in ("max_iters", "batch", "workers", "calibration"):
            if getattr(self, f) <= 0:
                bad(f, f"{f} must be positive")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form; identifies cached results."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _parse_grid(text: str) -> list:
    """``a,b,c`` or ``start:stop:step`` (inclusive stop)."""
    text = text.strip()
    if ":" in text:
        a, b, s = (float(t) for t in text.split(":"))
        if s <= 0 or b < a:
            raise ValueError("grid needs start <= stop and a positive step")
        k = int(math.floor((b - a) / s + 1e-9))
        return [round(a + i * s, 10) for i in range(k + 1)]
    return [float(t) for t in text.split(",") if t.strip()]


_FIELDS = {f.name: f for f in dataclasses.fields(SimConfig)}


def _coerce(key, value):
    if key in ("ebn0_db", "snr_db"):
        return _parse_grid(value)
    default = _FIELDS[key].default
    if isinstance(default, bool):
        return value.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(float(value)) if "e" in value.lower() else int(value)
    if isinstance(default, float):
        return float(value)
    return value.strip()


def parse_config(text: str, overrides: dict = None) -> SimConfig:
    """Parse ``key = value`` lines (``#`` comments); ``overrides`` win over the file."""
    cfg = SimConfig()
    items = []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {raw.strip()!r}", line=ln, field=None)
        k, v = (t.strip() for t in line.split("=", 1))
        items.append((ln, k, v))
    for k, v in (overrides or {}).items():
        items.append((None, k, str(v)))
    for ln, k, v in items:
        if k not in _FIELDS:
            raise ConfigError(f"unknown key {k!r}", line=ln, field=k)
        try:
            setattr(cfg, k, _coerce(k, v))
        except ValueError as e:
            raise ConfigError(f"bad value {v!r}: {e}", line=ln, field=k) from e
    try:
        return cfg.validate()
    except ConfigError as e:
        lines = {k: ln for ln, k, _ in items}
        raise ConfigError(str(e.args[0]), line=lines.get(e.field), field=e.field) from None


def load_config(path, overrides: dict = None) -> SimConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}", line=None, field=None)
    with open(path) as f:
        return parse_config(f.read(), overrides)


def format_config(cfg: SimConfig) -> str:
    out = []
    for k, v in cfg.to_dict().items():
        if v is None:
            continue
        if isinstance(v, list):
            v = ",".join(repr(x) for x in v)
        out.append(f"{k} = {v}")
    return "\n".join(out) + "\n"


# -- simulation context ----------------------------------------------------------

def load_lattice(source: str) -> LatticeSystem:
    """Preset name (``table1``, ``toy``) or a family file path."""
    try:
        return get_system(source)
    except KeyError:
        pass
    if not os.path.exists(source):
        raise ConfigError(f"unknown lattice source {source!r}", line=None, field="lattice")
    return build_lattice(load_family(source))


@dataclass
class SimContext:
    cfg: SimConfig
    code: NestedLatticeCode
    decoders: list
    rate: float
    rate_check: float
    power: float = None
    extra: dict = field(default_factory=dict)


def build_context(cfg: SimConfig) -> SimContext:
    sys = load_lattice(cfg.lattice)
    try:
        s = parse_shaping(cfg.shaping, sys.n)
    except (ValueError, KeyError) as e:
        raise ConfigError(str(e), line=None, field="shaping") from None
    code = NestedLatticeCode(sys, s)
    R, Rc = code_rate(code)
    decs = default_decoders(sys, max_iters=cfg.max_iters, llr_clip=cfg.llr_clip)
    ctx = SimContext(cfg, code, decs, R, Rc)
    ctx.power = calibrate_power(ctx)
    return ctx


def _shape_batch(code: NestedLatticeCode, rng, B: int, dither: bool):
    """Random messages, Voronoi points, dithers and transmitted vectors."""
    s = code.shaping
    b = code.random_b(rng, B)
    x = code.coding.generate(b)
    xp = x - np.rint(quantize(s, x.astype(np.float64))).astype(np.int64)
    if dither:
        d = s.base.dim
        c = s.K_value / math.sqrt(s.base.q)
        u = rng.random((s.copies * B, d)) @ s.base.basis.astype(np.float64) * c
        v = u.reshape(s.copies, B, d).transpose(0, 2, 1).reshape(s.n, B)
        U = v - quantize(s, v)
        w = xp - U
        t = w - quantize(s, w)
    else:
        U = np.zeros(xp.shape)
        t = xp.astype(np.float64)
    return b, xp, U, t


def calibrate_power(ctx: SimContext) -> float:
    """Average transmit power per dimension from pilot frames (no decoding)."""
    rng = np.random.default_rng([ctx.cfg.seed, 2 ** 31 - 1])
    tot, cnt = 0.0, 0
    while cnt < ctx.cfg.calibration:
        B = min(ctx.cfg.batch, ctx.cfg.calibration - cnt)
        _, _, _, t = _shape_batch(ctx.code, rng, B, ctx.cfg.dither == "on")
        tot += float((t * t).sum())
        cnt += B
    return tot / (cnt * ctx.code.n)


def _channel(ctx: SimContext, snr: float):
    """``(sigma2, alpha, sigma_eff)`` for a target SNR = P / sigma^2."""
    P = ctx.power
    sigma2 = P / snr
    alpha = snr / (1 + snr) if ctx.cfg.mmse == "on" else 1.0
    var = alpha ** 2 * sigma2 + (1 - alpha) ** 2 * P
    return sigma2, alpha, math.sqrt(var)


def _run_batch(ctx: SimContext, rng, B: int, snr: float):
    """``(errors, failures, power_sum)`` for ``B`` frames."""
    sigma2, alpha, seff = _channel(ctx, snr)
    dither = ctx.cfg.dither == "on"
    _, xp, U, t = _shape_batch(ctx.code, rng, B, dither)
    y = t + rng.normal(0.0, math.sqrt(sigma2), t.shape)
    yh = alpha * y + U
    tr = multistage_decode(ctx.code.coding, yh, ctx.decoders, sigma=seff,
                           demap_mode=ctx.cfg.demap, keep_trace=False)
    ok = contains(ctx.code.shaping, tr.x - xp) & ~tr.failed
    return int((~ok).sum()), int(tr.failed.sum()), float((t * t).sum())


def transmit_trial(ctx: SimContext, rng, sigma2: float):
    """One frame at noise variance ``sigma2``: ``(error, power)``."""
    snr = ctx.power / sigma2
    err, _, p = _run_batch(ctx, rng, 1, snr)
    return bool(err), p / ctx.code.n


@dataclass
class WERCurve:
    """Per-point records plus run metadata."""
    points: list
    meta: dict

    def rows(self):
        return [[p[k] for k in CSV_HEADER] for p in self.points]


_WORKER_CTX = None


def _init_worker(cfg_dict):
    global _WORKER_CTX
    _WORKER_CTX = build_context(SimConfig(**cfg_dict))


def _chunk_job(args):
    point, chunk, B, snr, seed = args
    rng = np.random.default_rng([seed, point, chunk])
    return _run_batch(_WORKER_CTX, rng, B, snr)


def run_wer(cfg: SimConfig, ctx: SimContext = None, progress=None) -> WERCurve:
    """Run grid points until ``trials`` frames or ``stop_errors`` errors each.

    With ``stop_wer > 0`` the remaining grid is skipped once a point has a
    WER at or below ``stop_wer`` (grids are expected in increasing SNR).
    """
    global _WORKER_CTX
    cfg.validate()
    if ctx is None:
        ctx = build_context(cfg)
    R = ctx.rate
    if cfg.ebn0_db:
        grid = [(e, 10 * math.log10(2 * R * 10 ** (e / 10))) for e in cfg.ebn0_db]
    else:
        grid = [(10 * math.log10(10 ** (s / 10) / (2 * R)), s) for s in cfg.snr_db]
    pool = None
    if cfg.workers > 1:
        pool = cf.ProcessPoolExecutor(cfg.workers, initializer=_init_worker,
                                      initargs=(cfg.to_dict(),))
    else:
        _WORKER_CTX = ctx
    points, chunk_log = [], []
    try:
        for pi, (ebn0, snr_db) in enumerate(grid):
            snr = 10 ** (snr_db / 10)
            t0 = time.perf_counter()
            trials = errors = fails = 0
            psum = 0.0
            chunks = []
            c = 0
            while trials < cfg.trials and (cfg.stop_errors == 0 or errors < cfg.stop_errors):
                wave = max(1, cfg.workers)
                jobs = []
                left = cfg.trials - trials
                for j in range(wave):
                    B = min(cfg.batch, left - j * cfg.batch)
                    if B <= 0:
                        break
                    jobs.append((pi, c + j, B, snr, cfg.seed))
                res = list(pool.map(_chunk_job, jobs)) if pool else [_chunk_job(jb) for jb in jobs]
                for jb, (e, f, p) in zip(jobs, res):
                    if trials >= cfg.trials or (cfg.stop_errors and errors >= cfg.stop_errors):
                        break
                    trials += jb[2]
                    errors += e
                    fails += f
                    psum += p
                    chunks.append(e)
                c += len(jobs)
                if progress:
                    progress(pi, trials, errors)
            secs = time.perf_counter() - t0
            points.append({
                "ebn0_db": ebn0, "snr_db": snr_db, "trials": trials, "errors": errors,
                "wer": errors / trials, "power": psum / (trials * ctx.code.n),
                "seconds": secs if cfg.record_time == "on" else 0.0,
            })
            chunk_log.append({"chunk_errors": chunks, "level_failures": fails,
                              "seconds": secs, "batch": cfg.batch})
            if cfg.stop_wer and errors / trials <= cfg.stop_wer:
                break
    finally:
        if pool:
            pool.shutdown()
    meta = {
        "artifact_version": __version__,
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "rate": R, "rate_check": ctx.rate_check,
        "calibrated_power": ctx.power,
        "shaping": str(ctx.code.shaping),
        "seeds": {"chunk": "default_rng([seed, point, chunk])",
                  "calibration": "default_rng([seed, 2**31 - 1])", "seed": cfg.seed},
        "receiver": {"mmse": cfg.mmse, "dither": cfg.dither, "demap": cfg.demap,
                     "llr": "(1 - 2 y') / (2 sigma_i^2), sigma_i = sigma_eff / 2^i",
                     "error": "decoded point outside x' + Lambda_s, or a level failure"},
        "points": chunk_log,
    }
    return WERCurve(points, meta)


def _fmt(k, v):
    if k in ("trials", "errors"):
        return str(int(v))
    if k == "wer":
        return f"{v:.6e}"
    if k == "seconds":
        return f"{v:.3f}"
    return f"{v:.6f}"


def csv_text(curve: WERCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for p in curve.points:
        w.writerow([_fmt(k, p[k]) for k in CSV_HEADER])
    return buf.getvalue()


def write_csv(curve: WERCurve, path):
    with open(path, "w") as f:
        f.write(csv_text(curve))


def write_json(curve: WERCurve, path):
    with open(path, "w") as f:
        json.dump(curve.meta, f, indent=1, sort_keys=True)


def read_csv(path) -> list:
    with open(path) as f:
        r = csv.DictReader(f)
        if r.fieldnames != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {r.fieldnames}")
        return [{k: (int(v) if k in ("trials", "errors") else float(v)) for k, v in row.items()}
                for row in r]


def crossing(points: list, target: float = 1e-3, key: str = "ebn0_db"):
    """``key`` value where log10(WER) crosses ``target`` (linear interpolation)."""
    pts = sorted(points, key=lambda p: p[key])
    for a, b in zip(pts, pts[1:]):
        if a["wer"] >= target > b["wer"] or a["wer"] > target >= b["wer"]:
            if b["wer"] == 0:
                return None
            la, lb, lt = (math.log10(v) for v in (a["wer"], b["wer"], target))
            return a[key] + (la - lt) / (la - lb) * (b[key] - a[key])
    return None
