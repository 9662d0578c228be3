"""Command-line entry point: ``entsim <command> [--config FILE] [options]``.

Every command reads an optional JSON config, evaluates a table and writes it
as CSV (default) or JSON. Exit status 0 on success, 2 on configuration
errors, 3 when a numerical validity check fails.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bridge, cavity, distill, fock, jumpmc
from .errors import ConfigError, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
THREADS_ENV = "ENTSIM_THREADS"


# -- output -----------------------------------------------------------------

def format_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return "%.17g" % x


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits."""
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent, _level + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


class Table:
    def __init__(self, columns, rows=None, meta=None):
        self.columns = list(columns)
        self.rows = [] if rows is None else list(rows)
        self.meta = {} if meta is None else dict(meta)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        return dumps({"columns": self.columns, "rows": self.rows, "meta": self.meta}) + "\n"


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if v is None:
        return ""
    if isinstance(v, (list, dict)):
        return dumps(v, indent=0).replace("\n", "")
    return v


# -- config helpers ---------------------------------------------------------

def load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def take(cfg: dict, defaults: dict, where: str = "config") -> dict:
    """Merge ``cfg`` over ``defaults``; unknown keys are an error."""
    if not isinstance(cfg, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(cfg) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in {where}")
    out = dict(defaults)
    out.update(cfg)
    missing = [k for k, v in out.items() if v is _REQUIRED]
    if missing:
        raise ConfigError(f"missing key {missing[0]!r} in {where}")
    return out


_REQUIRED = object()


def _num(cfg, key, where, lo=None, hi=None, integer=False):
    v = cfg[key]
    ok = isinstance(v, (int, float)) and not isinstance(v, bool)
    if integer:
        ok = ok and float(v).is_integer()
    if not ok:
        raise ConfigError(f"key {key!r} in {where} must be a{'n integer' if integer else ' number'}")
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"key {key!r} in {where} out of range [{lo}, {hi}]")
    return int(v) if integer else float(v)


def _set_path(cfg: dict, dotted: str, value):
    parts = dotted.split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {} if p not in node else node[p]
            if not isinstance(node[p], dict):
                raise ConfigError(f"sweep key {dotted!r} does not address a config section")
        node = node[p]
    node[parts[-1]] = value


def expand_sweep(cfg: dict):
    """(value, config) pairs for a ``sweep`` block {"key": path or [paths], "values": [...]}.

    Every listed dotted path receives the same value. Without a sweep the
    config is returned once with value None.
    """
    sweep = cfg.get("sweep")
    base = {k: v for k, v in cfg.items() if k != "sweep"}
    if sweep is None:
        return [(None, base)]
    sweep = take(sweep, {"key": _REQUIRED, "values": _REQUIRED}, "sweep")
    if not isinstance(sweep["values"], list) or not sweep["values"]:
        raise ConfigError("key 'values' in sweep must be a non-empty list")
    keys = sweep["key"] if isinstance(sweep["key"], list) else [sweep["key"]]
    if not keys or not all(isinstance(k, str) and k for k in keys):
        raise ConfigError("key 'key' in sweep must be a dotted path or a list of them")
    out = []
    for v in sweep["values"]:
        c = copy.deepcopy(base)
        for k in keys:
            _set_path(c, k, v)
        out.append((v, c))
    return out


# -- state specifications ---------------------------------------------------

STATE_KINDS = {
    "schmidt": {"kind": None, "alphas": _REQUIRED},
    "elements": {"kind": None, "entries": _REQUIRED, "cutoff": None, "n_modes": 2},
    "procrustean": {"kind": None, "r": _REQUIRED, "T": _REQUIRED, "tau": 1.0},
    "gaussian": {"kind": None, "gamma": _REQUIRED, "d": None},
    "tmss": {"kind": None, "r": _REQUIRED, "phi": 0.0},
    "mixed_example": {"kind": None, "lam": _REQUIRED, "tau": _REQUIRED},
    "topure": {"kind": None, "eps": _REQUIRED},
    "file": {"kind": None, "path": _REQUIRED},
}


def _complex_list(v, where):
    out = []
    for x in v:
        if isinstance(x, (list, tuple)) and len(x) == 2:
            out.append(complex(float(x[0]), float(x[1])))
        elif isinstance(x, (int, float)) and not isinstance(x, bool):
            out.append(complex(x))
        else:
            raise ConfigError(f"key {where!r} entries must be numbers or [re, im] pairs")
    return out


def build_state(spec, cutoff: int) -> fock.FockDensityMatrix:
    """Normalized density matrix from a state specification object."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("state specification needs a 'kind' key")
    kind = spec["kind"]
    if kind not in STATE_KINDS:
        raise ConfigError(f"key 'kind' has unknown value {kind!r}")
    where = f"state ({kind})"
    s = take(spec, STATE_KINDS[kind], where)
    if kind == "schmidt":
        alphas = _complex_list(s["alphas"], "alphas")
        if not alphas:
            raise ConfigError("key 'alphas' must be non-empty")
        return distill.schmidt_density(alphas, max(cutoff, len(alphas) - 1))
    if kind == "elements":
        n = s["cutoff"] if s["cutoff"] is not None else max(
            [max(int(i) for i in row[:-2]) for row in s["entries"]] + [0])
        rho = fock.from_dump({"n_modes": s["n_modes"], "cutoff": int(n), "entries": s["entries"]})
        return rho.with_cutoff(max(cutoff, rho.cutoff)).normalized()
    if kind == "procrustean":
        r, T, tau = (_num(s, k, where) for k in ("r", "T", "tau"))
        if tau == 1.0:
            vec, _ = distill.procrustean_pure(r, T, 1, cutoff)
            return vec.to_density().normalized()
        return distill.procrustean_mixed_elements(r, tau, T).with_cutoff(cutoff).normalized()
    if kind == "gaussian":
        gamma = np.asarray(s["gamma"], dtype=float)
        if gamma.shape != (4, 4):
            raise ConfigError("key 'gamma' must be a 4x4 matrix")
        if s["d"] is not None and np.any(np.asarray(s["d"], dtype=float) != 0):
            raise ConfigError("key 'd' must be zero: only centred Gaussian states convert to Fock")
        return bridge.gaussian_to_fock(gamma, cutoff).normalized()
    if kind == "tmss":
        return fock.tmss_fock(_num(s, "r", where), _num(s, "phi", where), cutoff).to_density().normalized()
    if kind == "mixed_example":
        return distill.mixed_example_state(_num(s, "lam", where), _num(s, "tau", where, 0.0, 1.0)).with_cutoff(cutoff)
    if kind == "topure":
        return distill.topure_example_state(_num(s, "eps", where)).with_cutoff(cutoff)
    with open(s["path"]) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"state file {s['path']} is not valid JSON: {exc}") from None
    return fock.from_dump(data).normalized()


# -- commands ---------------------------------------------------------------

def cmd_cavity_ideal(cfg, args) -> Table:
    c = take(cfg, {"gtau_min": 0.0, "gtau_max": 1.0, "n_points": 101})
    g = np.linspace(_num(c, "gtau_min", "config"), _num(c, "gtau_max", "config"),
                    _num(c, "n_points", "config", 1, integer=True))
    return Table(["gtau", "fidelity", "p_success"],
                 [[float(x), float(cavity.fidelity_ideal(x)), float(cavity.success_probability(x))] for x in g])


def _geometry(spec) -> cavity.CavityGeometry:
    s = take(spec, {"lam": _REQUIRED, "D0": _REQUIRED, "D1": _REQUIRED, "L": None, "R_curv": None, "w0": None},
             "geometry")
    return cavity.CavityGeometry(**s)


def cmd_cavity_path(cfg, args) -> Table:
    mode = cfg.get("mode", "epsilon")
    if mode == "epsilon":
        c = take(cfg, {"mode": "epsilon", "gtau": 0.5, "eps_min": -0.5, "eps_max": 0.5, "n_points": 101})
        gtau = _num(c, "gtau", "config")
        eps = np.linspace(_num(c, "eps_min", "config", hi=1.0), _num(c, "eps_max", "config", hi=1.0),
                          _num(c, "n_points", "config", 1, integer=True))
        rows = []
        for e in eps:
            log_term = float(np.log(1 - e)) if e < 1 else float("-inf")
            rows.append([float(e), log_term, float(cavity.fidelity_asymmetric(gtau, e)),
                         float(cavity.success_probability_asymmetric(gtau, e))])
        return Table(["epsilon", "log_one_minus_epsilon", "fidelity", "p_success"], rows, {"gtau": gtau})
    if mode != "geometry":
        raise ConfigError(f"key 'mode' must be 'epsilon' or 'geometry', got {mode!r}")
    rows = []
    for value, c in expand_sweep(cfg):
        c = take(c, {"mode": "geometry", "gtau": 0.5, "geometry": _REQUIRED, "path": {}})
        geo = _geometry(c["geometry"])
        path = cavity.AtomPath(**take(c["path"], {"y0": 0.0, "z0": 0.0, "phi": 0.0, "theta": 0.0, "v": 500.0},
                                      "path"))
        ta = cavity.effective_interaction_time(geo, path, 0)
        tb = cavity.effective_interaction_time(geo, path, 1)
        ex, est = cavity.epsilon_exact(geo, path), cavity.epsilon_estimate(geo, path)
        gtau = _num(c, "gtau", "config")
        rows.append([value, path.y0, path.z0, path.phi, path.theta, ta, tb, ex, est,
                     float(cavity.fidelity_asymmetric(gtau, ex))])
    return Table(["sweep", "y0", "z0", "phi", "theta", "tau_A", "tau_B", "epsilon_exact",
                  "epsilon_estimate", "fidelity"], rows)


MC_PARAMS = {"g": 1.0, "Omega": 2.0, "Delta": 20.0, "kappa": 10.0, "gamma_A": 0.0, "gamma_B": 0.0}
MC_DEFAULTS = {"params": {}, "cutoff": 2, "dt": None, "T_wait": 100.0, "eta": 1.0, "dark_rate": 0.0,
               "n_traj": 1000, "model": "full", "stop_at_first_click": False, "log": None}


def cmd_mc(cfg, args) -> Table:
    rows = []
    for value, c in expand_sweep(cfg):
        c = take(c, MC_DEFAULTS)
        params = jumpmc.IonCavityParams(**take(c["params"], MC_PARAMS, "params"))
        jc = jumpmc.JumpConfig(
            params=params, cutoff=c["cutoff"], dt=c["dt"], T_wait=c["T_wait"], eta=c["eta"],
            dark_rate=c["dark_rate"], n_traj=c["n_traj"], seed=args.seed, model=c["model"],
            stop_at_first_click=c["stop_at_first_click"])
        log = None
        if c["log"]:
            log = open(c["log"], "a")
        try:
            _, st = jumpmc.run_trajectories(jc, threads=args.threads, log=log)
        finally:
            if log is not None:
                log.close()
        rows.append([value, st.n_traj, st.p_success, st.p_success_err, st.mean_fidelity, st.mean_fidelity_err,
                     1.0 - st.mean_fidelity, st.mean_first_click_time, st.mean_first_click_time_err,
                     st.mean_fidelity_single_click, jumpmc.t_av(params)])
    return Table(["sweep", "n_traj", "p_success", "p_success_err", "mean_fidelity", "mean_fidelity_err",
                  "infidelity", "mean_first_click_time", "mean_first_click_time_err",
                  "mean_fidelity_single_click", "t_av"], rows, {"seed": args.seed})


DISTILL_DEFAULTS = {"state": _REQUIRED, "iterations": 3, "eta": 1.0, "channel": {"kind": "none", "param": 0.0},
                    "channel_both": False, "cutoff": None, "max_truncation": 1e-3}


def _run_distill_point(value, c, args):
    c = take(c, DISTILL_DEFAULTS)
    cutoff = args.cutoff or c["cutoff"] or fock.DEFAULT_CUTOFF
    rho = build_state(c["state"], cutoff)
    ch = take(c["channel"], {"kind": "none", "param": 0.0}, "channel")
    try:
        spec = distill.ChannelSpec(ch["kind"], ch["param"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    tr = distill.run_protocol(rho, _num(c, "iterations", "config", 1, integer=True),
                              eta=_num(c, "eta", "config", 0.0, 1.0), channel=spec, cutoff=cutoff,
                              channel_both=bool(c["channel_both"]), max_truncation=c["max_truncation"])
    return [[value, r.iteration, r.log_negativity, r.entropy, r.probability, r.distance_to_limit,
             r.truncated_weight] for r in tr.records]


def cmd_distill(cfg, args) -> Table:
    points = expand_sweep(cfg)
    if args.threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as ex:
            chunks = list(ex.map(lambda p: _run_distill_point(p[0], p[1], args), points))
    else:
        chunks = [_run_distill_point(v, c, args) for v, c in points]
    rows = [row for chunk in chunks for row in chunk]
    return Table(["sweep", "iteration", "log_negativity", "entropy", "probability", "distance_to_limit",
                  "truncated_weight"], rows)


def cmd_wigner(cfg, args) -> Table:
    c = take(cfg, {"state": {"kind": "schmidt", "alphas": [1.0]}, "iterations": 0, "mode_kept": 0,
                   "xmax": 4.0, "n_points": 81, "eta_max": 10.0, "eta_points": 201})
    cutoff = args.cutoff or fock.DEFAULT_CUTOFF
    rho = build_state(c["state"], cutoff)
    for _ in range(_num(c, "iterations", "config", 0, integer=True)):
        rho = distill.gaussify_mixed_step(rho, rho.cutoff, max_truncation=1e-3).state
    if c["mode_kept"] not in (0, 1):
        raise ConfigError("key 'mode_kept' must be 0 or 1")
    single = fock.partial_trace(rho, 1 - c["mode_kept"]) if rho.n_modes == 2 else rho
    grid = dict(xmax=_num(c, "xmax", "config", 0.0), n_points=_num(c, "n_points", "config", 2, integer=True),
                eta_max=_num(c, "eta_max", "config", 0.0),
                eta_points=_num(c, "eta_points", "config", 2, integer=True))
    x, p, W = bridge.wigner(single, **grid)
    rows = [[float(x[i]), float(p[j]), float(W[i, j])] for i in range(len(x)) for j in range(len(p))]
    return Table(["X", "P", "W"], rows, {"nongaussianity": bridge.nongaussianity(single, **grid)})


def measure(rho: fock.FockDensityMatrix) -> dict:
    out = {"n_modes": rho.n_modes, "cutoff": rho.cutoff, "trace": rho.trace, "purity": rho.normalized().purity,
           "truncated_weight": rho.truncated_weight}
    if rho.n_modes == 2:
        out["log_negativity"] = fock.log_negativity_fock(rho)
        out["entropy"] = fock.vn_entropy_fock(fock.partial_trace(rho, 1))
        out["mean_photons_A"], out["mean_photons_B"] = map(float, fock.mean_photon_numbers(rho))
    else:
        out["mean_photons"] = float(fock.mean_photon_numbers(rho)[0])
    return out


def cmd_state(cfg, args):
    action = args.action
    if action == "save":
        c = take(cfg, {"state": _REQUIRED, "cutoff": None})
        rho = build_state(c["state"], args.cutoff or c["cutoff"] or fock.DEFAULT_CUTOFF)
        return dumps(fock.to_dump(rho)) + "\n"
    if action == "measure":
        if args.path is None:
            c = take(cfg, {"state": _REQUIRED, "cutoff": None})
            rho = build_state(c["state"], args.cutoff or c["cutoff"] or fock.DEFAULT_CUTOFF)
        else:
            try:
                with open(args.path) as fh:
                    data = json.load(fh)
            except FileNotFoundError:
                raise ConfigError(f"state file not found: {args.path}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"state file {args.path} is not valid JSON: {exc}") from None
            rho = fock.from_dump(data)
        m = measure(rho)
        return Table(list(m), [list(m.values())])
    raise ConfigError(f"unknown state action {action!r}")


COMMANDS = {
    "cavity-ideal": (cmd_cavity_ideal, "fidelity and success probability against g tau"),
    "cavity-path": (cmd_cavity_path, "asymmetric interaction times and atomic-path geometry"),
    "mc": (cmd_mc, "quantum-jump Monte Carlo of the two-ion scheme"),
    "distill": (cmd_distill, "iterate the Gaussification protocol"),
    "wigner": (cmd_wigner, "Wigner function of one mode"),
    "state": (cmd_state, "save or measure a Fock-space state"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--cutoff", type=int, default=None, help="Fock cutoff override")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default ${THREADS_ENV} or 1)")
    p = argparse.ArgumentParser(prog="entsim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_text)
        if name == "state":
            sp.add_argument("action", choices=("save", "measure"))
            sp.add_argument("path", nargs="?", help="state file for 'measure'")
    return p


def _threads(value) -> int:
    if value is None:
        env = os.environ.get(THREADS_ENV)
        if env is None:
            return 1
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    if value < 1:
        raise ConfigError("thread count must be at least 1")
    return value


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.threads = _threads(args.threads)
        if args.cutoff is not None and args.cutoff < 1:
            raise ConfigError("--cutoff must be at least 1")
        cfg = load_config(args.config)
        result = COMMANDS[args.command][0](cfg, args)
        if isinstance(result, Table):
            text = result.to_json() if args.format == "json" else result.to_csv()
        else:
            text = result
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except NumericalError as exc:
        print(f"entsim: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, TypeError, KeyError, OSError) as exc:
        # ConfigError is a ValueError; malformed values surface as the others
        print(f"entsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))
