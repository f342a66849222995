"""Command-line front end: config parsing, subcommands and CSV/SVG output.

Usage::

    piezobeam derive   --config run.conf --out out/
    piezobeam simulate --model rn-static --N 64 --T 0.5 --dt 1e-4 --plot
    piezobeam spectrum --model mm-static --gains 1 --sweep G2:1e5:1e6:8
    piezobeam verify
    piezobeam table

Exit codes: 0 success, 2 configuration error, 3 assembly or invariant
violation (including a failed acceptance criterion), 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import acceptance
from .control import DEFAULT_VARIANT, LAW_CHANNELS, FeedbackLaw, close_loop
from .errors import ConfigError, PiezoBeamError
from .materials import CompositeSpec, DEFAULT_SPEC, check_definiteness, derive_mm
from .models import ModelKind, assemble, energy
from .operators import build_grid
from .simulate import default_dt, fit_decay, integrate
from .spectral import (coupled_resonance_search, open_loop_frequencies, resonance_search,
                       spectrum, verify_undamped_mode)

__all__ = ["RunConfig", "parse_config", "main", "run", "format_float", "SPEC_KEYS"]

# config key -> CompositeSpec field
SPEC_KEYS = {
    "beam.length": "L",
    "layers.1.thickness": "h1",
    "layers.2.thickness": "h2",
    "layers.3.thickness": "h3",
    "layers.1.density": "rho1",
    "layers.2.density": "rho2",
    "layers.3.density": "rho3",
    "layers.1.stiffness": "alpha1",
    "layers.2.stiffness": "alpha2",
    "layers.3.stiffness": "alpha3_1",
    "layers.2.shear_modulus": "G2",
    "piezo.coupling": "gamma",
    "piezo.impermittivity": "beta",
    "piezo.permeability": "mu",
}
RUN_KEYS = {
    "model": str,
    "grid.N": int,
    "time.T": float,
    "time.dt": float,
    "time.stride": int,
    "feedback.gains": str,
    "feedback.variant": str,
    "shear_damping": float,
    "init": str,
    "resonance.n": int,
    "resonance.m": int,
    "resonance.knob": str,
    "output.dir": str,
    "sweep": str,
}


@dataclass
class Sweep:
    knob: str
    lo: float
    hi: float
    count: int

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


@dataclass
class RunConfig:
    """Everything a subcommand needs; ``None`` means "use the default"."""

    spec: CompositeSpec = DEFAULT_SPEC
    model: ModelKind = ModelKind.RN_STATIC
    N: int = 64
    T: Optional[float] = None
    dt: Optional[float] = None
    stride: int = 1
    gains: Optional[List[float]] = None
    variant: str = ""
    shear_damping: float = 0.0
    init: str = "mode:1"
    resonance_n: int = 1
    resonance_m: int = 3
    resonance_knob: str = "mu"
    out: str = "out"
    sweep: Optional[Sweep] = None
    plot: bool = False
    sources: Dict[str, int] = field(default_factory=dict)

    def law(self) -> FeedbackLaw:
        if self.gains is None:
            return FeedbackLaw.unit(self.model, self.variant)
        return FeedbackLaw.from_list(self.model, self.gains, self.variant)

    @property
    def step(self) -> float:
        return self.dt if self.dt is not None else default_dt(self.spec)

    @property
    def horizon(self) -> float:
        return self.T if self.T is not None else 1e4 * self.step


def _parse_gains(text: str) -> List[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"gains must be comma-separated numbers: {text!r}") from exc


def _parse_sweep(text: str) -> Sweep:
    parts = text.split(":")
    if len(parts) != 4:
        raise ConfigError(f"sweep must be knob:lo:hi:count, got {text!r}")
    knob = parts[0]
    if knob not in {f.name for f in dataclasses.fields(CompositeSpec)}:
        raise ConfigError(f"sweep knob {knob!r} is not a material parameter")
    try:
        lo, hi, count = float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError as exc:
        raise ConfigError(f"bad sweep range in {text!r}") from exc
    if count < 1:
        raise ConfigError("sweep count must be >= 1")
    return Sweep(knob, lo, hi, count)


def _apply(cfg: RunConfig, key: str, value: str, where: str) -> None:
    try:
        if key in SPEC_KEYS:
            cfg.spec = cfg.spec.replace(**{SPEC_KEYS[key]: float(value)})
        elif key == "model":
            cfg.model = ModelKind.parse(value)
        elif key == "grid.N":
            cfg.N = int(value)
        elif key == "time.T":
            cfg.T = float(value)
        elif key == "time.dt":
            cfg.dt = float(value)
        elif key == "time.stride":
            cfg.stride = int(value)
        elif key == "feedback.gains":
            cfg.gains = _parse_gains(value)
        elif key == "feedback.variant":
            cfg.variant = value
        elif key == "shear_damping":
            cfg.shear_damping = float(value)
        elif key == "init":
            cfg.init = value
        elif key == "resonance.n":
            cfg.resonance_n = int(value)
        elif key == "resonance.m":
            cfg.resonance_m = int(value)
        elif key == "resonance.knob":
            cfg.resonance_knob = value
        elif key == "output.dir":
            cfg.out = value
        elif key == "sweep":
            cfg.sweep = _parse_sweep(value)
        else:
            raise ConfigError(f"unknown key {key!r}")
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {value!r}") from exc


def parse_config(path) -> RunConfig:
    """Read a ``key = value`` file.

    Blank lines and text after ``#`` are ignored. Unknown keys, duplicate
    keys, lines without ``=`` and keys without a value raise
    :class:`ConfigError` naming the key and line number.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = RunConfig()
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        where = f"{path}:{lineno}"
        if "=" not in text:
            raise ConfigError(f"{where}: expected 'key = value', got {text!r}")
        key, value = (s.strip() for s in text.split("=", 1))
        if not key:
            raise ConfigError(f"{where}: missing key")
        if key not in SPEC_KEYS and key not in RUN_KEYS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if not value:
            raise ConfigError(f"{where}: missing value for {key!r}")
        if key in cfg.sources:
            raise ConfigError(f"{where}: duplicate key {key!r} (first set on line {cfg.sources[key]})")
        cfg.sources[key] = lineno
        _apply(cfg, key, value, where)
    cfg.spec.validate()
    return cfg


# --------------------------------------------------------------------------
# output

def format_float(x) -> str:
    """Shortest round-trip text of a number; other values via ``str``."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path: str, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format_float(v) for v in r])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def write_svg(path: str, t: np.ndarray, y: np.ndarray, xlabel="t [s]", ylabel="log10 E") -> None:
    """Minimal line plot: one polyline, a frame and four ticks per axis."""
    W, H, pad = 640, 400, 60
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(y)
    t, y = t[ok], y[ok]
    t0, t1 = (t.min(), t.max()) if t.size else (0.0, 1.0)
    y0, y1 = (y.min(), y.max()) if y.size else (0.0, 1.0)
    if t1 == t0:
        t1 = t0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    sx = lambda v: pad + (v - t0) / (t1 - t0) * (W - 2 * pad)
    sy = lambda v: H - pad - (v - y0) / (y1 - y0) * (H - 2 * pad)
    pts = " ".join("%.2f,%.2f" % (sx(a), sy(b)) for a, b in zip(t, y))
    out = ['<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d">' % (W, H),
           '<rect x="%d" y="%d" width="%d" height="%d" fill="none" stroke="black"/>'
           % (pad, pad, W - 2 * pad, H - 2 * pad)]
    for k in range(5):
        tv = t0 + k * (t1 - t0) / 4
        yv = y0 + k * (y1 - y0) / 4
        out.append('<text x="%.1f" y="%d" font-size="11" text-anchor="middle">%.3g</text>'
                   % (sx(tv), H - pad + 16, tv))
        out.append('<text x="%d" y="%.1f" font-size="11" text-anchor="end">%.3g</text>'
                   % (pad - 6, sy(yv) + 4, yv))
    out.append('<text x="%d" y="%d" font-size="12" text-anchor="middle">%s</text>'
               % (W // 2, H - 12, xlabel))
    out.append('<text x="16" y="%d" font-size="12" transform="rotate(-90 16 %d)" '
               'text-anchor="middle">%s</text>' % (H // 2, H // 2, ylabel))
    out.append('<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="%s"/>' % pts)
    out.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(out) + "\n")


# --------------------------------------------------------------------------
# subcommands; each returns (rows-for-sweep-summary, exit code)

def _system(cfg: RunConfig, spec=None):
    spec = cfg.spec if spec is None else spec
    return assemble(cfg.model, spec, build_grid(spec.L, cfg.N), shear_damping=cfg.shear_damping)


def _initial_state(cfg: RunConfig, sys_) -> np.ndarray:
    kind, _, arg = cfg.init.partition(":")
    if kind == "zero":
        return np.zeros(sys_.dim)
    if kind == "mode":
        k = int(arg or 1)
        if not 1 <= k <= sys_.n:
            raise ConfigError(f"init mode must be in 1..{sys_.n}, got {k}")
        _, V = open_loop_frequencies(sys_, k)
        return np.concatenate([V[:, k - 1], np.zeros(sys_.n)])
    if kind == "random":
        from .simulate import EnergyCoordinates
        rng = np.random.default_rng(int(arg or 0))
        return EnergyCoordinates(sys_).from_energy(rng.standard_normal(sys_.dim))
    raise ConfigError(f"init must be zero, mode:K or random:SEED, got {cfg.init!r}")


def cmd_derive(cfg: RunConfig, spec=None, write=True):
    spec = cfg.spec if spec is None else spec
    c = derive_mm(spec)
    rep = check_definiteness(spec)
    rows = list(c.items()) + sorted(rep.items())
    if write:
        write_csv(os.path.join(cfg.out, "coefficients.csv"), ("name", "value"), rows)
    return dict(rows)


def cmd_assemble(cfg: RunConfig, spec=None, write=True):
    s = _system(cfg, spec)
    G = s.G
    ev = np.linalg.eigvalsh(G)
    A = s.generator()
    GA = G @ A
    rows = [("model", s.kind.value), ("N", s.grid.N), ("n", s.n), ("dim", s.dim)]
    rows += [("dof_" + k, v) for k, v in s.dof_counts().items()]
    rows += [("norm_M", float(np.linalg.norm(s.M))), ("norm_K", float(np.linalg.norm(s.K))),
             ("norm_D", float(np.linalg.norm(s.D))),
             ("gram_min_eig", float(ev[0])), ("gram_max_eig", float(ev[-1])),
             ("skew_ratio", float(np.linalg.norm(A.T @ G + GA) / np.linalg.norm(GA)))]
    rows += [("channel_" + ch, "input") for ch in s.channels]
    if write:
        write_csv(os.path.join(cfg.out, "system.meta.csv"), ("key", "value"), rows)
    return dict(rows)


def cmd_simulate(cfg: RunConfig, spec=None, write=True):
    s = _system(cfg, spec)
    cl = close_loop(s, cfg.law())
    x0 = _initial_state(cfg, cl)
    tr, _ = integrate(cl, x0, cfg.horizon, cfg.step, stride=cfg.stride)
    if write:
        cols = tr.columns()
        write_csv(os.path.join(cfg.out, "trace.csv"), list(cols), zip(*cols.values()))
        if cfg.plot:
            with np.errstate(divide="ignore"):
                write_svg(os.path.join(cfg.out, "trace.svg"), tr.t, np.log10(tr.total))
    E0 = tr.total[0]
    out = {"E0": float(E0), "E_final": float(tr.total[-1]),
           "ratio": float(tr.total[-1] / E0) if E0 > 0 else float("nan")}
    if E0 > 0 and np.all(tr.total > 0) and len(tr.t) > 1:
        out.update({"decay_" + k: v for k, v in fit_decay(tr).items()})
    return out


def cmd_spectrum(cfg: RunConfig, spec=None, write=True):
    cl = close_loop(_system(cfg, spec), cfg.law())
    sp = spectrum(cl)
    if write:
        write_csv(os.path.join(cfg.out, "spectrum.csv"), ("re", "im"),
                  ((v.real, v.imag) for v in sp.values))
    return {"abscissa": sp.abscissa, "max_modulus": sp.max_modulus,
            "min_modulus": sp.min_modulus, "on_axis": int(len(sp.on_axis))}


def cmd_resonance(cfg: RunConfig, spec=None, write=True):
    spec = cfg.spec if spec is None else spec
    cert = resonance_search(spec, cfg.resonance_n, cfg.resonance_m, cfg.resonance_knob)
    rows = [("two_sine." + k, v) for k, v in cert.as_rows()]
    grid = build_grid(spec.L, cfg.N)
    found = coupled_resonance_search(spec, grid, cfg.resonance_knob, max_hits=1)
    if found:
        cc = found[0]
        cl = close_loop(assemble(ModelKind.MM_DYNAMIC, cc.spec, grid),
                        FeedbackLaw.unit(ModelKind.MM_DYNAMIC))
        rep = verify_undamped_mode(cl, cc)
        rows += [("coupled." + k, v) for k, v in cc.as_rows()]
        rows += [("coupled.eigenvalue_re", rep["eigenvalue"].real),
                 ("coupled.eigenvalue_im", rep["eigenvalue"].imag),
                 ("coupled.energy_ratio_mode", rep["energy_ratio_mode"]),
                 ("coupled.energy_ratio_random", rep["energy_ratio_random"]),
                 ("coupled.verified", rep["passed"])]
    else:
        rows.append(("coupled.found", False))
    if write:
        write_csv(os.path.join(cfg.out, "resonance.csv"), ("field", "value"), rows)
    return dict(rows)


def cmd_verify(cfg: RunConfig, select=None, stream=None):
    stream = sys.stdout if stream is None else stream
    res = acceptance.run_all(select, report=lambda r: print(acceptance.format_line(r),
                                                            file=stream, flush=True))
    write_csv(os.path.join(cfg.out, "verify.csv"), ("criterion", "name", "passed", "seconds", "detail"),
              ((r.number, r.name, r.passed, round(r.seconds, 3), r.detail) for r in res))
    passed = sum(r.passed for r in res)
    print(f"{passed}/{len(res)} criteria passed", file=stream)
    return 0 if passed == len(res) else 3


def cmd_table(cfg: RunConfig, stream=None):
    stream = sys.stdout if stream is None else stream
    cache: dict = {}
    r = acceptance.run_one(11, cache)
    rows = r.data["rows"]
    write_csv(os.path.join(cfg.out, "table.csv"),
              ("model", "feedback", "verdict", "expected", "match", "evidence"),
              ((x["model"], x["feedback"], x["verdict"], x["expected"], x["match"], x["evidence"])
               for x in rows))
    width = max(len(x["model"]) for x in rows)
    for x in rows:
        print(f"{x['model']:<{width}}  {x['verdict']:<10} (expected {x['expected']}; {x['evidence']})",
              file=stream)
    return 0 if r.passed else 3


SWEEPABLE = {"derive": cmd_derive, "assemble": cmd_assemble, "simulate": cmd_simulate,
             "spectrum": cmd_spectrum, "resonance": cmd_resonance}


def run_sweep(cfg: RunConfig, command: str, workers: Optional[int] = None) -> str:
    """Evaluate a subcommand over the sweep values in a thread pool and
    write one summary row per value to ``sweep.csv``, sorted by knob value."""
    fn = SWEEPABLE[command]
    sw = cfg.sweep
    specs = [cfg.spec.replace(**{sw.knob: float(v)}) for v in sw.values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda s: fn(cfg, s, write=False), specs))
    pairs = sorted(zip((float(v) for v in sw.values), results), key=lambda p: p[0])
    names = sorted({k for _, r in pairs for k in r})
    path = os.path.join(cfg.out, "sweep.csv")
    write_csv(path, [sw.knob] + names, ([v] + [r.get(k, "") for k in names] for v, r in pairs))
    return path


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="piezobeam", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=["derive", "assemble", "simulate", "spectrum",
                                       "resonance", "verify", "table"])
    p.add_argument("--config", help="key = value run file")
    p.add_argument("--model", help="full, rn-dynamic, rn-static, mm-dynamic or mm-static")
    p.add_argument("--N", type=int, help="number of elements")
    p.add_argument("--T", type=float, help="time horizon [s]")
    p.add_argument("--dt", type=float, help="time step [s]")
    p.add_argument("--stride", type=int, help="sample every STRIDE steps")
    p.add_argument("--gains", help="comma-separated gains in the law's channel order")
    p.add_argument("--variant", help="named feedback law of the model")
    p.add_argument("--out", help="output directory")
    p.add_argument("--plot", action="store_true", help="also write trace.svg")
    p.add_argument("--sweep", help="knob:lo:hi:count")
    p.add_argument("--criteria", help="comma-separated criterion numbers for verify")
    return p


def configure(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    if args.model:
        cfg.model = ModelKind.parse(args.model)
    for name in ("N", "T", "dt", "stride"):
        v = getattr(args, name)
        if v is not None:
            setattr(cfg, name, v)
    if args.gains is not None:
        cfg.gains = _parse_gains(args.gains)
    if args.variant:
        cfg.variant = args.variant
    if args.out:
        cfg.out = args.out
    if args.sweep:
        cfg.sweep = _parse_sweep(args.sweep)
    cfg.plot = cfg.plot or args.plot
    cfg.law()           # validates gains against the model before any work
    build_grid(cfg.spec.L, cfg.N)
    return cfg


def run(command: str, cfg: RunConfig, criteria=None) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    if command == "verify":
        return cmd_verify(cfg, criteria)
    if command == "table":
        return cmd_table(cfg)
    if cfg.sweep is not None:
        print(run_sweep(cfg, command))
        return 0
    SWEEPABLE[command](cfg)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = configure(args)
        criteria = None
        if args.criteria:
            try:
                criteria = [int(t) for t in args.criteria.split(",")]
            except ValueError as exc:
                raise ConfigError(f"bad --criteria {args.criteria!r}") from exc
        return run(args.command, cfg, criteria)
    except PiezoBeamError as exc:
        print(f"piezobeam: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:      # e.g. unknown model or criterion number
        print(f"piezobeam: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
