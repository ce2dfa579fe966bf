"""Command-line front end.

Input data is a long-format CSV with header ``group,value``.  Every command
writes a JSON report; ``simulate-data`` additionally writes a CSV.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .bootstrap import BootstrapConfig
from .criterion import MinimizeOptions, minimize_u_n
from .deformation import FAMILIES, ThetaVector, get_family
from .empirical import SampleSet, make_sample
from .errors import (DomainError, FormatError, ParseError, UsageError, WarpGofError)
from .inference import PhiMatrix, estimate, simulate_limit_null
from .criterion import Objective
from .synthetic import TEMPLATES, null_limit_inputs, simulate_groups
from .testing import test_nonparametric_delta0, test_parametric_null, test_vn_normal
from .transport import barycenter_quantile

COMMANDS = ("fit", "test-null", "test-delta0", "test-vn", "barycenter", "simulate-data",
            "limit-sim")


@dataclass
class Dataset:
    groups: list
    samples: SampleSet
    source: str
    rows: int


@dataclass
class RunConfig:
    family: str = "location"
    box_lower: list | None = None
    box_upper: list | None = None
    anchor: str | None = "default"
    anchor_value: list | None = None
    alpha: float = 0.05
    delta0: float | None = None
    mn_rule: str | None = None
    mn: int | None = None
    B: int = 500
    seed: int = 0
    points_per_coord: int = 3
    optimizer: str = "nelder-mead"
    sigma_strategy: str = "bootstrap"
    input: str | None = None
    out: str | None = None
    aligned: bool = False
    # simulate-data / limit-sim
    n: int = 1000
    theta: list = field(default_factory=list)
    template: str = "uniform"
    square_groups: list = field(default_factory=list)
    group_names: list | None = None
    K: int = 1024
    draws: int = 2000
    # not part of the recorded configuration
    workers: int = 1

    def validate(self):
        if not 0.0 < self.alpha < 1.0:
            raise UsageError("--alpha must lie in (0, 1)")
        if self.B < 1:
            raise UsageError("--B must be >= 1")
        if self.family not in FAMILIES:
            raise UsageError(f"--family must be one of {sorted(FAMILIES)}")

    def recorded(self) -> dict:
        d = asdict(self)
        d.pop("workers")
        return d


def resolve_seed(seed: int) -> int:
    """Seed 0 means: draw a fresh 63-bit seed from OS entropy."""
    if seed:
        return int(seed)
    return int(np.random.SeedSequence().entropy % (2**63 - 1)) + 1


# ---------------------------------------------------------------------------
# input / output


def load_dataset(path: str, anchor: str | None = None) -> Dataset:
    """Parse a ``group,value`` CSV; groups keep their order of first appearance."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["group", "value"]:
            raise FormatError(f"{path}: expected header 'group,value', got {header!r}")
        values: dict[str, list] = {}
        rows = 0
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(f"{path}: row {lineno}: expected 2 fields, got {len(row)}", lineno)
            g, raw = row[0].strip(), row[1].strip()
            try:
                v = float(raw)
            except ValueError:
                raise ParseError(f"{path}: row {lineno}: cannot parse value {raw!r}", lineno) from None
            if not math.isfinite(v):
                raise ParseError(f"{path}: row {lineno}: non-finite value {raw!r}", lineno)
            values.setdefault(g, []).append(v)
            rows += 1
    if len(values) < 2:
        raise DomainError(f"{path}: need at least two groups, found {len(values)}")
    if anchor not in (None, "default", "none") and anchor not in values:
        raise DomainError(f"{path}: anchor group {anchor!r} not present")
    groups = list(values)
    samples = SampleSet(tuple(make_sample(values[g]) for g in groups))
    return Dataset(groups, samples, path, rows)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_report(report: dict, path: str | None) -> None:
    text = dumps_report(report)
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w") as fh:
        fh.write(text)


def read_report(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# commands


def _family(cfg: RunConfig):
    return get_family(cfg.family, cfg.box_lower, cfg.box_upper)


def _theta0(cfg: RunConfig, fam, groups: list) -> ThetaVector:
    J = len(groups)
    if cfg.anchor == "default":
        anchor = J - 1 if fam.anchored_by_default else None
    elif cfg.anchor in (None, "none"):
        anchor = None
    else:
        if cfg.anchor not in groups:
            raise DomainError(f"anchor group {cfg.anchor!r} not present")
        anchor = groups.index(cfg.anchor)
    tv = ThetaVector.identity(fam, J, anchor=anchor)
    if anchor is not None and cfg.anchor_value is not None:
        tv.values[anchor] = fam.check_param(cfg.anchor_value)
    return tv


def _options(cfg: RunConfig) -> MinimizeOptions:
    return MinimizeOptions(method=cfg.optimizer, points_per_coord=cfg.points_per_coord,
                           workers=cfg.workers)


def _boot(cfg: RunConfig, default_mode: str) -> BootstrapConfig:
    mode = {"param": "parametric-null", "nonparam": "nonparametric"}.get(cfg.mn_rule, default_mode)
    return BootstrapConfig(m_n=cfg.mn, B=cfg.B, master_seed=cfg.seed, mode=mode,
                           workers=cfg.workers)


def _theta_dict(groups, theta: ThetaVector) -> dict:
    return {g: [float(v) for v in theta.values[j]] for j, g in enumerate(groups)}


def _load(cfg: RunConfig) -> Dataset:
    if not cfg.input:
        raise UsageError("--input is required for this command")
    return load_dataset(cfg.input, cfg.anchor)


def cmd_fit(cfg: RunConfig) -> dict:
    ds = _load(cfg)
    fam = _family(cfg)
    theta0 = _theta0(cfg, fam, ds.groups)
    res = minimize_u_n(ds.samples, fam, theta0, options=_options(cfg))
    out = {
        "groups": ds.groups,
        "sizes": list(ds.samples.sizes),
        "theta_hat": _theta_dict(ds.groups, res.theta_hat),
        "anchor": None if theta0.anchor is None else ds.groups[theta0.anchor],
        "inf_u_n": res.value,
        "converged": res.converged,
        "iterations": res.iterations,
        "restarts_used": res.restarts_used,
        "phi_tilde": None,
        "phi_invertible": None,
    }
    if ds.samples.equal_sizes:
        phi = PhiMatrix.from_full(Objective(ds.samples, fam).hessian(res.theta_hat.values),
                                  res.theta_hat)
        out["phi_tilde"] = phi.anchored.tolist()
        out["phi_invertible"] = phi.invertible
    return out


def cmd_test(cfg: RunConfig, kind: str) -> dict:
    ds = _load(cfg)
    fam = _family(cfg)
    theta0 = _theta0(cfg, fam, ds.groups)
    opts = _options(cfg)
    if kind == "test-null":
        rep = test_parametric_null(ds.samples, fam, cfg.alpha, _boot(cfg, "parametric-null"),
                                   theta0, opts)
    else:
        if cfg.delta0 is None:
            raise UsageError(f"{kind} requires --delta0")
        if kind == "test-delta0":
            rep = test_nonparametric_delta0(ds.samples, fam, cfg.delta0, cfg.alpha,
                                            _boot(cfg, "nonparametric"), theta0, opts)
        else:
            rep = test_vn_normal(ds.samples, fam, cfg.delta0, cfg.alpha,
                                 _boot(cfg, "nonparametric"), theta0, opts, cfg.sigma_strategy)
    out = rep.to_dict()
    out["groups"] = ds.groups
    return out


def cmd_barycenter(cfg: RunConfig) -> dict:
    ds = _load(cfg)
    qs = ds.samples.quantile_fns()
    out = {"groups": ds.groups, "aligned": cfg.aligned}
    if cfg.aligned:
        fam = _family(cfg)
        res = minimize_u_n(ds.samples, fam, _theta0(cfg, fam, ds.groups), options=_options(cfg))
        warped = [make_sample(fam.value(res.theta_hat.values[j], s.values))
                  for j, s in enumerate(ds.samples)]
        qs = [s.quantile_fn for s in warped]
        out["theta_hat"] = _theta_dict(ds.groups, res.theta_hat)
    bary = barycenter_quantile(qs)
    out["atoms"] = bary.atoms.tolist()
    out["weights"] = bary.weights.tolist()
    return out


def _parse_theta(cfg: RunConfig, fam) -> np.ndarray:
    if not cfg.theta:
        raise UsageError("--theta is required (one per group)")
    rows = []
    for item in cfg.theta:
        vals = [float(v) for v in str(item).split(",")] if isinstance(item, str) else list(item)
        if len(vals) != fam.param_dim:
            raise UsageError(f"each --theta needs {fam.param_dim} comma-separated values")
        rows.append(fam.check_param(vals))
    if len(rows) < 2:
        raise UsageError("need --theta for at least two groups")
    return np.array(rows)


def simulate_csv(cfg: RunConfig) -> tuple[str, list]:
    fam = _family(cfg)
    theta = _parse_theta(cfg, fam)
    J = theta.shape[0]
    names = cfg.group_names or [f"g{j + 1}" for j in range(J)]
    if len(names) != J:
        raise UsageError("number of group names must match number of --theta values")
    squared = [names.index(g) for g in cfg.square_groups]
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    groups = simulate_groups(fam, theta, cfg.n, cfg.template, rng, squared_groups=squared)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["group", "value"])
    for name, xs in zip(names, groups):
        for x in xs:
            w.writerow([name, repr(float(x))])
    return buf.getvalue(), names


def cmd_simulate(cfg: RunConfig) -> dict:
    text, names = simulate_csv(cfg)
    if cfg.out and cfg.out != "-":
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return {"groups": names, "n": cfg.n, "template": cfg.template, "path": cfg.out,
            "rows": text.count("\n") - 1}


def cmd_limit_sim(cfg: RunConfig) -> dict:
    fam = _family(cfg)
    theta = _parse_theta(cfg, fam)
    J = theta.shape[0]
    anchor = None if cfg.anchor in (None, "none") else -1
    if cfg.anchor not in ("default", None, "none"):
        names = cfg.group_names or [f"g{j + 1}" for j in range(J)]
        anchor = names.index(cfg.anchor)
    if cfg.anchor == "default" and not fam.anchored_by_default:
        anchor = None
    R, gq, phi_tilde = null_limit_inputs(fam, theta, cfg.template, anchor=anchor)
    sample = simulate_limit_null(R, gq, phi_tilde, K=cfg.K, n_draws=cfg.draws,
                                 rng=cfg.seed, anchor=anchor, workers=cfg.workers)
    out = sample.summary()
    out["phi_tilde"] = phi_tilde.tolist()
    return out


def run_command(cmd: str, cfg: RunConfig) -> tuple[int, dict]:
    """Run one command; returns ``(exit status, report)``.

    Exit status is 0 on success (whatever the test decision), 2 for usage
    and input errors and 1 for any other failure.
    """
    if cmd not in COMMANDS:
        raise UsageError(f"unknown command {cmd!r}; choose from {', '.join(COMMANDS)}")
    cfg.validate()
    cfg.seed = resolve_seed(cfg.seed)
    report = {
        "command": cmd,
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.recorded(),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    try:
        if cmd == "fit":
            result = cmd_fit(cfg)
        elif cmd.startswith("test-"):
            result = cmd_test(cfg, cmd)
        elif cmd == "barycenter":
            result = cmd_barycenter(cfg)
        elif cmd == "simulate-data":
            result = cmd_simulate(cfg)
        else:
            result = cmd_limit_sim(cfg)
    except (UsageError, FormatError, ParseError, DomainError, OSError) as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        return 2, report
    except WarpGofError as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        return 1, report
    report["result"] = result
    return 0, report


# ---------------------------------------------------------------------------
# argument parsing


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="warpgof", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--family", choices=sorted(FAMILIES), default="location")
    common.add_argument("--box-lower", type=_floats, help="comma-separated lower bounds")
    common.add_argument("--box-upper", type=_floats, help="comma-separated upper bounds")
    common.add_argument("--anchor", default="default",
                        help="group whose warp is fixed ('none' disables anchoring)")
    common.add_argument("--anchor-value", type=_floats)
    common.add_argument("--seed", type=int, default=0, help="master seed; 0 draws one")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", help="output path (default stdout)")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", required=True)
    data.add_argument("--points-per-coord", type=int, default=3)
    data.add_argument("--optimizer", choices=("nelder-mead", "gradient"), default="nelder-mead")

    boot = argparse.ArgumentParser(add_help=False)
    boot.add_argument("--alpha", type=float, default=0.05)
    boot.add_argument("--mn-rule", choices=("param", "nonparam"))
    boot.add_argument("--mn", type=int)
    boot.add_argument("--B", type=int, default=500)

    sub.add_parser("fit", parents=[common, data], help="estimate warps and Phi")
    sub.add_parser("test-null", parents=[common, data, boot], help="test inf U = 0")
    for name in ("test-delta0", "test-vn"):
        sp = sub.add_parser(name, parents=[common, data, boot])
        sp.add_argument("--delta0", type=float, required=True)
        if name == "test-vn":
            sp.add_argument("--sigma-strategy", choices=("bootstrap", "plugin-L"),
                            default="bootstrap")
    sp = sub.add_parser("barycenter", parents=[common, data])
    sp.add_argument("--aligned", action="store_true", help="warp groups by the fitted theta first")

    gen = argparse.ArgumentParser(add_help=False)
    gen.add_argument("--theta", action="append", default=[],
                     help="per-group warp parameters, comma-separated; repeat per group")
    gen.add_argument("--template", choices=sorted(TEMPLATES), default="uniform")
    sp = sub.add_parser("simulate-data", parents=[common, gen])
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--group-names", type=lambda s: s.split(","))
    sp.add_argument("--square-group", dest="square_groups", action="append", default=[])
    sp.add_argument("--report", help="where to write the JSON report (default stderr)")
    sp = sub.add_parser("limit-sim", parents=[common, gen])
    sp.add_argument("--K", type=int, default=1024)
    sp.add_argument("--draws", type=int, default=2000)
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    for key, val in vars(ns).items():
        if key in ("command", "report"):
            continue
        if hasattr(cfg, key) and val is not None:
            setattr(cfg, key, val)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    cfg = config_from_args(ns)
    try:
        status, report = run_command(ns.command, cfg)
    except UsageError as exc:
        parser.error(str(exc))
    if ns.command == "simulate-data":
        target = getattr(ns, "report", None)
        if target:
            write_report(report, target)
        else:
            sys.stderr.write(dumps_report(report))
    else:
        write_report(report, cfg.out)
    if "error" in report:
        print(f"warpgof: {report['error']['type']}: {report['error']['message']}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
