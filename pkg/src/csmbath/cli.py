"""Batch front-end: configure a run, dispatch an engine, write CSV.

Subcommands: ieom | classical | exact | frozen | coeffs | compare.  A run is
described by a flat key=value config file plus command-line overrides; every
physics-affecting field is echoed into the CSV metadata header.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__, classical, couplings, exactqm, heff, kernels, opbasis, propagate, reference
from .errors import CapacityError, ChainBreakdownError, ParameterError, UnsupportedModeError
from .series import TimeSeries, read_csv, write_csv


@dataclass
class RunConfig:
    engine: str = "ieom"
    gamma: float = 1.0 / 18.0
    n_bath: float = couplings.INFINITE
    n_tr: int = 3
    n_max: tuple = (25, 4, 1)
    dt: float = 0.01
    t_max: float = 50.0
    stride: int = 10
    h: tuple = (0.0, 0.0, 0.0)
    z_nuclear: float = heff.DEFAULT_Z_NUCLEAR
    enable_nuclear_zeeman: bool = False
    enable_chain: bool = True
    representation: str = "chain"
    coeff_mode: str = "auto"      # auto: exact for finite baths, analytic otherwise
    trace_mode: str = "auto"      # exact engine: full | stochastic | auto
    # ensemble samples / random trace vectors; None picks the engine default
    # (10^6 configurations for classical, 100 vectors for the exact engine)
    samples: int | None = None
    seed: int = 0
    single_precision: bool = False
    reachable_filter: bool = False  # evolve on the seed's reachability closure
    max_states: int = opbasis.DEFAULT_MAX_STATES
    mode: str = "dynamic"         # classical engine: dynamic | frozen
    out: str = "run.csv"
    progress: bool = False

    def __post_init__(self):
        # the truncation list is authoritative for the chain length
        self.n_max = tuple(self.n_max)
        self.n_tr = len(self.n_max)

    def coupling_set(self) -> couplings.CouplingSet:
        return couplings.build_coupling_set(self.gamma, self.n_bath)

    def chain(self, cs, n_tr=None) -> couplings.LanczosChain:
        n_tr = self.n_tr if n_tr is None else n_tr
        mode = self.coeff_mode
        if mode == "auto":
            mode = "exact" if cs.finite else "analytic"
        if mode == "exact":
            return couplings.lanczos_exact(cs, n_tr)
        if mode == "analytic":
            return couplings.lanczos_analytic(self.gamma, n_tr)
        raise ParameterError(f"unknown coeff_mode {self.coeff_mode}")


def _base_meta(cfg: RunConfig, cs) -> dict:
    return {
        "csmbath_version": __version__,
        "engine": cfg.engine,
        "gamma": repr(cfg.gamma),
        "n_bath": "inf" if not cs.finite else str(int(cs.n_bath)),
        "j_q": repr(cs.j_q),
        "n_eff": repr(cs.n_eff),
        "dt": repr(cfg.dt),
        "t_max": repr(cfg.t_max),
        "stride": str(cfg.stride),
        "h": ",".join(repr(v) for v in cfg.h),
        "seed": str(cfg.seed),
    }


def _run_ieom(cfg: RunConfig) -> TimeSeries:
    cs = cfg.coupling_set()
    chain = cfg.chain(cs)
    trunc = opbasis.TruncationSpec(tuple(cfg.n_max))
    rep = heff.Representation(cfg.representation)
    eig = couplings.diagonalize_chain(chain) if rep is heff.Representation.DIAGONAL else None
    params = heff.HamiltonianParams(
        chain=chain,
        trunc=trunc,
        eig=eig,
        h_central=np.array(cfg.h, dtype=float),
        z_nuclear=cfg.z_nuclear,
        enable_nuclear_zeeman=cfg.enable_nuclear_zeeman,
        enable_chain=cfg.enable_chain,
        representation=rep,
    )
    basis = opbasis.enumerate_basis(trunc, max_states=cfg.max_states)
    seed_id = opbasis.seed_state(basis)
    filtered_size = None
    if cfg.reachable_filter:
        # exact restriction to the seed's closure; needs the explicit matrix
        full_op = heff.assemble_total(params, basis)
        keep = heff.reachable_ids(full_op, seed_id)
        op, position = heff.restrict_operator(full_op, keep)
        seed_id = int(position[seed_id])
        filtered_size = op.dimension
    else:
        op = heff.MatrixFreeOperator(params, basis)
    dtype = np.complex64 if cfg.single_precision else np.complex128
    psi0 = propagate.seed_ket(op.dimension, seed_id, dtype=dtype)
    hint = 2.0 * float(np.max(np.abs(chain.alphas))) * math.sqrt(trunc.n_max[0])
    hint += float(np.linalg.norm(cfg.h)) + 1.0
    run = propagate.rk4_evolve(op, psi0, cfg.dt, cfg.t_max, cfg.stride, scale_hint=hint)
    if cfg.progress:
        run = _with_progress(run, cfg.t_max)
    ts = propagate.autocorrelation(run, seed_id)
    ts.meta.update(_base_meta(cfg, cs))
    ts.meta.update(
        {
            "n_tr": str(cfg.n_tr),
            "n_max": ",".join(str(c) for c in cfg.n_max),
            "representation": rep.value,
            "coeff_mode": chain.mode.value,
            "enable_chain": str(cfg.enable_chain),
            "enable_nuclear_zeeman": str(cfg.enable_nuclear_zeeman),
            "z_nuclear": repr(cfg.z_nuclear),
            "basis_size": str(basis.size if filtered_size is None else filtered_size),
            "reachable_filter": str(cfg.reachable_filter),
            "dtype": "complex64" if cfg.single_precision else "complex128",
        }
    )
    return ts


def _run_classical(cfg: RunConfig) -> TimeSeries:
    cs = cfg.coupling_set()
    ecfg = classical.EnsembleConfig(
        samples=cfg.samples if cfg.samples is not None else 1_000_000,
        seed=cfg.seed,
        dt=cfg.dt,
        t_max=cfg.t_max,
        stride=cfg.stride,
        mode=classical.ClassicalMode(cfg.mode),
        h_central=np.array(cfg.h, dtype=float),
    )
    ts = classical.simulate_autocorrelation(ecfg, cs)
    ts.meta.update(_base_meta(cfg, cs))
    ts.meta.update({"mode": cfg.mode, "samples": str(ecfg.samples)})
    return ts


def _run_exact(cfg: RunConfig) -> TimeSeries:
    cs = cfg.coupling_set()
    op = exactqm.build_full_hamiltonian(cs, h=np.array(cfg.h, dtype=float))
    dtype = np.complex64 if cfg.single_precision else np.complex128
    ts = exactqm.infinite_T_autocorrelation(
        op,
        dt=cfg.dt,
        t_max=cfg.t_max,
        stride=cfg.stride,
        n_vectors=cfg.samples,
        seed=cfg.seed,
        mode=cfg.trace_mode,
        dtype=dtype,
    )
    ts.meta.update(_base_meta(cfg, cs))
    ts.meta["dtype"] = "complex64" if cfg.single_precision else "complex128"
    return ts


def _run_frozen(cfg: RunConfig) -> TimeSeries:
    cs = cfg.coupling_set()
    n_steps = int(round(cfg.t_max / cfg.dt))
    times = cfg.dt * cfg.stride * np.arange(n_steps // cfg.stride + 1)
    ts = TimeSeries(
        times=times,
        values=reference.s_frozen(times, cs.j_q) + 0j,
        norm_drift=np.zeros_like(times),
    )
    ts.meta.update(_base_meta(cfg, cs))
    return ts


_ENGINES = {
    "ieom": _run_ieom,
    "classical": _run_classical,
    "exact": _run_exact,
    "frozen": _run_frozen,
}


def run(cfg: RunConfig) -> TimeSeries:
    """Execute one engine run and write its CSV."""
    if cfg.engine not in _ENGINES:
        raise ParameterError(f"unknown engine {cfg.engine}")
    ts = _ENGINES[cfg.engine](cfg)
    write_csv(ts, cfg.out)
    return ts


def _with_progress(sampler, t_max):
    t_last = time.time()
    for t, psi in sampler:
        now = time.time()
        if now - t_last > 30.0:
            print(f"  ... t={t:.1f}/{t_max:g}", file=sys.stderr, flush=True)
            t_last = now
        yield t, psi


# ----------------------------------------------------------------- compare


def peak_stats(ts: TimeSeries, window=None):
    """Local maxima of Re S (parabolic refinement) and the fitted period."""
    t, y = ts.times, ts.values.real
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, y = t[keep], y[keep]
    peaks = []
    for i in range(1, len(y) - 1):
        if y[i] >= y[i - 1] and y[i] > y[i + 1]:
            denom = y[i - 1] - 2 * y[i] + y[i + 1]
            if denom != 0:
                shift = 0.5 * (y[i - 1] - y[i + 1]) / denom
                dt_loc = t[i + 1] - t[i]
                peaks.append(
                    (t[i] + shift * dt_loc, y[i] - 0.25 * (y[i - 1] - y[i + 1]) * shift)
                )
            else:
                peaks.append((t[i], y[i]))
    period = None
    if len(peaks) >= 3:
        idx = np.arange(len(peaks))
        times = np.array([p[0] for p in peaks])
        period = float(np.polyfit(idx, times, 1)[0])
    return peaks, period


def compare(file_a, file_b, t_window=None) -> dict:
    """Deviation statistics between two runs on their common time span."""
    a = read_csv(file_a)
    b = read_csv(file_b)
    lo = max(a.times[0], b.times[0])
    hi = min(a.times[-1], b.times[-1])
    if t_window is not None:
        lo, hi = max(lo, t_window[0]), min(hi, t_window[1])
    if hi <= lo:
        raise ParameterError("time grids do not overlap")
    # evaluate on the coarser grid, interpolating the finer curve
    coarse, fine = (a, b) if len(a) <= len(b) else (b, a)
    keep = (coarse.times >= lo) & (coarse.times <= hi)
    grid = coarse.times[keep]
    if len(grid) == 0:
        raise ParameterError("no samples inside the window")
    yc = coarse.values.real[keep]
    yf = np.interp(grid, fine.times, fine.values.real)
    dev = yc - yf
    wa = (a.times >= lo) & (a.times <= hi)
    wb = (b.times >= lo) & (b.times <= hi)
    stats = {
        "t_lo": float(lo),
        "t_hi": float(hi),
        "n_common": int(len(grid)),
        "max_abs_dev_real": float(np.abs(dev).max()),
        "rms_dev_real": float(np.sqrt(np.mean(dev * dev))),
        "dip_t_a": float(a.times[wa][np.argmin(a.values.real[wa])]),
        "dip_t_b": float(b.times[wb][np.argmin(b.values.real[wb])]),
        "dip_val_a": float(a.values.real[wa].min()),
        "dip_val_b": float(b.values.real[wb].min()),
    }
    for name, ts in (("a", a), ("b", b)):
        peaks, period = peak_stats(ts, (lo, hi))
        stats[f"n_peaks_{name}"] = len(peaks)
        if period is not None:
            stats[f"period_{name}"] = period
    return stats


# ----------------------------------------------------------------- parsing


def _parse_n_bath(text: str):
    if text.lower() in ("inf", "infinite"):
        return couplings.INFINITE
    return int(text)


def _int_tuple(text: str):
    return tuple(int(v) for v in text.split(","))


def _float_tuple(text: str):
    return tuple(float(v) for v in text.split(","))


def _load_config_file(path) -> dict:
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"bad config line: {raw!r}")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


_CONFIG_PARSERS = {
    "engine": str,
    "gamma": float,
    "n_bath": _parse_n_bath,
    "n_max": _int_tuple,
    "dt": float,
    "t_max": float,
    "stride": int,
    "h": _float_tuple,
    "z_nuclear": float,
    "enable_nuclear_zeeman": lambda s: s.lower() in ("1", "true", "yes"),
    "enable_chain": lambda s: s.lower() in ("1", "true", "yes"),
    "representation": str,
    "coeff_mode": str,
    "trace_mode": str,
    "samples": int,
    "seed": int,
    "single_precision": lambda s: s.lower() in ("1", "true", "yes"),
    "reachable_filter": lambda s: s.lower() in ("1", "true", "yes"),
    "max_states": int,
    "mode": str,
    "out": str,
}


def config_from_sources(engine: str, file_path=None, overrides=None) -> RunConfig:
    values = {"engine": engine}
    if file_path:
        for key, raw in _load_config_file(file_path).items():
            if key not in _CONFIG_PARSERS:
                raise ParameterError(f"unknown config key {key}")
            values[key] = _CONFIG_PARSERS[key](raw)
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    values.pop("n_tr", None)  # derived from n_max
    return RunConfig(**values)


def _add_run_flags(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--gamma", type=float)
    p.add_argument("--n-bath", dest="n_bath", type=_parse_n_bath, help='integer or "inf"')
    p.add_argument("--n-max", dest="n_max", type=_int_tuple, help="comma list, e.g. 181,8,1")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--stride", type=int)
    p.add_argument("--h", type=_float_tuple, help="field on the central spin, e.g. 10,0,0")
    p.add_argument("--z-nuclear", dest="z_nuclear", type=float)
    p.add_argument("--nuclear-zeeman", dest="enable_nuclear_zeeman", action="store_true", default=None)
    p.add_argument("--no-chain", dest="enable_chain", action="store_false", default=None)
    p.add_argument("--representation", choices=["chain", "diagonal"])
    p.add_argument("--coeff-mode", dest="coeff_mode", choices=["auto", "exact", "analytic"])
    p.add_argument("--trace-mode", dest="trace_mode", choices=["auto", "full", "stochastic"])
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--single", dest="single_precision", action="store_true", default=None)
    p.add_argument("--reachable-filter", dest="reachable_filter", action="store_true", default=None)
    p.add_argument("--max-states", dest="max_states", type=int)
    p.add_argument("--mode", choices=["dynamic", "frozen"])
    p.add_argument("--progress", action="store_true", default=None)
    p.add_argument("--out", required=True)


def main(argv=None) -> int:
    kernels.set_threads_from_env()
    parser = argparse.ArgumentParser(prog="csmbath", description=__doc__)
    parser.add_argument("--deterministic", action="store_true",
                        help="single-threaded kernels (results are identical either way)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("ieom", "classical", "exact", "frozen"):
        _add_run_flags(sub.add_parser(name))
    pc = sub.add_parser("coeffs")
    pc.add_argument("--gamma", type=float, required=True)
    pc.add_argument("--n-bath", dest="n_bath", type=_parse_n_bath, default=couplings.INFINITE)
    pc.add_argument("--n-tr", dest="n_tr", type=int, required=True)
    pc.add_argument("--coeff-mode", dest="coeff_mode", choices=["auto", "exact", "analytic"], default="auto")
    pc.add_argument("--out", required=True)
    pm = sub.add_parser("compare")
    pm.add_argument("file_a")
    pm.add_argument("file_b")
    pm.add_argument("--window", type=_float_tuple)
    pm.add_argument("--out")
    args = parser.parse_args(argv)
    if args.deterministic:
        import numba

        numba.set_num_threads(1)

    if args.command == "compare":
        stats = compare(args.file_a, args.file_b, args.window)
        lines = [f"{k}={v}" for k, v in stats.items()]
        text = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        sys.stdout.write(text)
        return 0

    if args.command == "coeffs":
        cfg = RunConfig(engine="coeffs", gamma=args.gamma, n_bath=args.n_bath,
                        coeff_mode=args.coeff_mode)
        cs = cfg.coupling_set()
        chain = cfg.chain(cs, n_tr=args.n_tr)
        eig = couplings.diagonalize_chain(chain)
        with open(args.out, "w") as fh:
            fh.write(f"# csmbath_version={__version__}\n# gamma={args.gamma!r}\n")
            fh.write(f"# n_bath={'inf' if not cs.finite else int(cs.n_bath)}\n")
            fh.write(f"# coeff_mode={chain.mode.value}\n# n_eff={cs.n_eff!r}\n")
            fh.write("j,alpha,beta,epsilon,q1\n")
            for j in range(chain.n_tr):
                beta = chain.betas[j] if j < chain.n_tr - 1 else 0.0
                fh.write(
                    f"{j + 1},{chain.alphas[j]:.17g},{beta:.17g},"
                    f"{eig.energies[j]:.17g},{eig.head_weights[j]:.17g}\n"
                )
        return 0

    overrides = {
        key: getattr(args, key)
        for key in list(_CONFIG_PARSERS) + ["progress"]
        if key not in ("engine",) and hasattr(args, key)
    }
    try:
        cfg = config_from_sources(args.command, args.config, overrides)
        run(cfg)
    except (ParameterError, CapacityError, UnsupportedModeError, ChainBreakdownError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
