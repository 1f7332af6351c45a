"""Command line entry point: ``asl <command> --config FILE``.

Every command writes its outputs atomically into the output directory
(``--out-dir``, else ``$ASL_OUT_DIR``, else the working directory).  Output
files start with a comment header holding the version and the config hash, so
two runs with the same config give byte-identical files.
"""
import argparse
import json
import math
import os
import sys
import tempfile
from functools import partial
from importlib import resources

import numpy as np

from . import __version__
from .config import load_config, parse_config
from .errors import ConfigError, ConstructionError, DomainError

COMMANDS = ("certify", "sweep", "simulate", "blowup", "ccf", "rough", "kernel-table")

# {{{ helpers


def build_modulus(family, params):
    from . import moduli
    fam = family.lower()
    if fam == "burgers":
        w = moduli.BurgersCritical(params["K"])
    elif fam == "sqg":
        w = moduli.SqgCritical(params["delta"], params["gamma"])
    elif fam == "beta":
        w = moduli.BetaCritical(params["alpha"], params["delta"], params["gamma"])
    elif fam == "power":
        w = moduli.PowerLaw(params["beta"])
    elif fam == "linear":
        w = moduli.Linear()
    else:
        raise DomainError(f"unknown modulus family {family!r}")
    B = params.get("B", 1.0)
    return w if B == 1.0 else w.scaled(B)


def _swept_modulus(family, params, key, value):
    return build_modulus(family, {**params, key: value})


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if v is None or isinstance(v, str):
        return v
    return str(v)


def atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Outputs:
    def __init__(self, out_dir, cfg, command, seed):
        self.dir = out_dir
        self.cfg = cfg
        self.command = command
        self.header = cfg.header_lines(__version__, command) + [f"seed {seed}"]
        self.written = []

    def path(self, suffix):
        return os.path.join(self.dir, f"{self.cfg['output']['name']}_{suffix}")

    def csv(self, suffix, body_fn):
        p = self.path(suffix)
        atomic_write(p, body_fn(self.header))
        self.written.append(p)

    def json(self, suffix, payload):
        p = self.path(suffix)
        payload = {"version": __version__, "command": self.command,
                   "config_sha256": self.cfg.digest(), **_jsonable(payload)}
        atomic_write(p, json.dumps(payload, indent=1, sort_keys=True) + "\n")
        self.written.append(p)

# }}}

# {{{ commands


def cmd_certify(cfg, out, args):
    from .certifier import NmpConstants, certify, log_grid
    m, n = cfg["modulus"], cfg["nmp"]
    omega = build_modulus(m["family"], m)
    ell = omega.length_scale
    grid = log_grid(n["grid_lo"] * ell, n["grid_hi"] * ell, n["per_decade"])
    c = NmpConstants(c_alpha=n["c_alpha"], A=n["A"], margin=n["margin"])
    rep = certify(omega, n["alpha"], n["flow"], grid=grid, c=c, flow_multiplier=n["flow_multiplier"])
    p = out.path("certificate.json")
    payload = json.loads(rep.to_json())
    payload.update({"version": __version__, "config_sha256": cfg.digest()})
    atomic_write(p, json.dumps(payload, indent=1, sort_keys=True) + "\n")
    out.written.append(p)
    print(f"certify {omega!r}: {'pass' if rep.passed else 'fail'} "
          f"(worst {rep.worst_total:.6e} at xi={rep.worst_xi:.6e})")
    return 0 if rep.passed else 1


def cmd_sweep(cfg, out, args):
    from .certifier import NmpConstants, parameter_sweep
    m, n = cfg["modulus"], cfg["nmp"]
    key = n["sweep_param"]
    if key not in m:
        raise ConfigError(f"sweep_param {key!r} is not a [modulus] key")
    template = partial(_swept_modulus, m["family"], dict(m), key)
    c = NmpConstants(c_alpha=n["c_alpha"], A=n["A"], margin=n["margin"])
    res = parameter_sweep(template, n["alpha"], n["flow"], c=c,
                          search=(n["sweep_lo"], n["sweep_hi"]), direction=n["sweep_direction"],
                          flow_multiplier=n["flow_multiplier"], n_scan=n["n_scan"],
                          rel_resolution=n["rel_resolution"], per_decade=n["per_decade"],
                          workers=args.workers)
    out.json("sweep.json", {"found": res.found, "parameter": res.parameter, "key": key,
                            "bracketed": res.bracketed, "evaluations": res.evaluations,
                            "worst_total": res.report.worst_total if res.report else None})
    print(f"sweep {key}: {'found ' + format(res.parameter, '.6g') if res.found else 'none passing'}")
    return 0 if res.found else 1


def _initial_field(s, grid):
    from .spectral import Field
    A, k = s["amplitude"], math.pi / s["L"]
    kind = s["initial"]
    if grid.dim == 1:
        fns = {"sin": lambda x: A * np.sin(k * x), "cos": lambda x: A * np.cos(k * x),
               "bump": lambda x: A * np.exp(-2.0 * np.sin(0.5 * k * x) ** 2 / 0.1)}
    else:
        fns = {"sin": lambda x, y: A * (np.sin(k * x) * np.cos(k * y) + 0.5 * np.cos(2 * k * x + k * y)),
               "shear": lambda x, y: A * (np.cos(k * x) + 0.5 * np.sin(k * y))}
    if kind not in fns:
        raise ConfigError(f"initial {kind!r} not available in {grid.dim}D")
    return Field.from_function(grid, fns[kind])


def cmd_simulate(cfg, out, args):
    from .spectral import PeriodicGrid, Probes, SolverConfig, evolve
    s = cfg["solver"]
    grid = PeriodicGrid(s["dim"], s["n"], s["L"])
    scfg = SolverConfig(alpha=s["alpha"], velocity=s["velocity"], dt=s["dt"], scheme=s["scheme"],
                        dealias=s["dealias"], cfl_safety=s["cfl_safety"], beta=s["beta"])
    theta0 = _initial_field(s, grid)
    probes = Probes(lp=(2, math.inf), grad=True, every=s["every"], grad_factor=s["grad_factor"],
                    tail_threshold=s["tail_threshold"])
    rec = evolve(theta0, scfg, s["T"], probes)
    out.csv("simulate.csv", rec.to_csv)
    verdict = {"steps": rec.steps, "blowup_flag": rec.blowup_flag, "flag_reason": rec.flag_reason,
               "flag_time": rec.flag_time, "max_increase": rec.max_increase,
               "min_decrease": rec.min_decrease,
               "max_principle_ok": rec.max_increase <= 1e-6,
               "final_Linf": rec.final.norm(math.inf)}
    out.json("simulate.json", verdict)
    print(f"simulate {s['velocity']}: {rec.steps} steps, max increase {rec.max_increase:.3e}")
    return 0 if verdict["max_principle_ok"] else 1


def cmd_blowup(cfg, out, args):
    from .blowup import BlowupConfig, blowup_experiment
    b = dict(cfg["blowup"])
    mc = b.pop("max_checkpoints")
    res = blowup_experiment(BlowupConfig(**b), max_checkpoints=mc or None)
    out.csv("blowup.csv", res.to_csv)
    out.json("blowup.json", res.verdict)
    print(f"blowup: success={res.verdict.get('success')} flag_time={res.verdict.get('blowup_flag_time')}")
    return 0 if res.verdict.get("success") else 1


def cmd_ccf(cfg, out, args):
    from .ccf import ccf_experiment
    c = cfg["ccf"]
    res = ccf_experiment(**c)
    v = dict(res.verdict)
    v["pass"] = bool(v["J_growth"] >= 5.0 and v["J_nondecreasing"] and v["monitors_ok"])
    out.csv("ccf.csv", res.record.to_csv)
    out.json("ccf.json", v)
    print(f"ccf: J growth {v['J_growth']:.4f}, nondecreasing={v['J_nondecreasing']}, "
          f"monitors_ok={v['monitors_ok']}")
    return 0 if v["pass"] else 1


def cmd_rough(cfg, out, args):
    from .moduli import BurgersCritical
    from .rough import reference_decay, schedule_build, timedep_certify
    r = cfg["rough"]
    verdict = {"decay": [], "timedep": None}
    ok = True
    for p in r["p"]:
        for wc in r["width_cells"]:
            rep = reference_decay(p, n=r["n"], width_cells=wc, T=r["T"], t_min=r["t_min"],
                                  C_check=r["C_check"], tail_threshold=r["tail_threshold"])
            tag = f"p{p:g}_w{wc:g}"
            out.csv(f"rough_{tag}.csv", rep.to_csv)
            verdict["decay"].append({"p": p, "width_cells": wc, "sup_scaled": rep.sup_scaled,
                                     "M0": rep.M[0], "passed": rep.passed,
                                     "truncated": rep.truncated})
            ok &= rep.passed
    if r["timedep"]:
        omega = BurgersCritical(r["K"])
        sched = schedule_build(r["p"][0], r["C_inf"], omega)
        out.csv("rough_schedule.csv", sched.to_csv)
        td = timedep_certify(sched)
        verdict["timedep"] = {"passed": td.passed, "worst_margin": td.worst_margin,
                              "worst_t": td.worst_t, "points": td.n_checked}
        ok &= td.passed
    verdict["pass"] = bool(ok)
    out.json("rough.json", verdict)
    print(f"rough: {'pass' if ok else 'fail'}")
    return 0 if ok else 1


def cmd_kernel_table(cfg, out, args):
    from .splitting import kernel_report
    k = cfg["kernel"]
    rows = [kernel_report(a, x_max=k["x_max"], n=k["n"]) for a in k["alphas"]]

    def body(header):
        lines = [f"# {h}" for h in header] + ["alpha,K,positive,even_residual,mass,envelope_ok,worst_x"]
        for r in rows:
            lines.append(f"{r.alpha:.12e},{r.K:.12e},{int(r.positive)},{r.even_residual:.12e},"
                         f"{r.mass:.12e},{int(r.envelope_ok)},{r.worst_x:.12e}")
        return "\n".join(lines) + "\n"

    out.csv("kernel_table.csv", body)
    print("kernel-table: " + ", ".join(f"alpha={r.alpha:g} K={r.K:.6g}" for r in rows))
    return 0 if all(r.positive and r.envelope_ok for r in rows) else 1


HANDLERS = {"certify": cmd_certify, "sweep": cmd_sweep, "simulate": cmd_simulate,
            "blowup": cmd_blowup, "ccf": cmd_ccf, "rough": cmd_rough,
            "kernel-table": cmd_kernel_table}

# }}}


def bundled_config(name):
    """Path of a config shipped with the package (``name`` with or without .cfg)."""
    name = name if name.endswith(".cfg") else name + ".cfg"
    return resources.files(__package__).joinpath("configs", name)


def _resolve_config(spec):
    if spec is None:
        return parse_config("", "<defaults>")
    if os.path.exists(spec):
        return load_config(spec)
    p = bundled_config(os.path.basename(spec))
    if p.is_file():
        return parse_config(p.read_text(encoding="utf-8"), str(spec))
    raise FileNotFoundError(spec)


def build_parser():
    ap = argparse.ArgumentParser(prog="asl", description="Active scalar numerical laboratory.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="config file, or the name of a bundled config")
        sp.add_argument("--out-dir", default=None)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config not found: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out_dir or os.environ.get("ASL_OUT_DIR") or os.getcwd()
    out = Outputs(out_dir, cfg, args.command, args.seed)
    try:
        code = HANDLERS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, ConstructionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for p in out.written:
        print(f"wrote {p}")
    return code


if __name__ == "__main__":
    sys.exit(main())
