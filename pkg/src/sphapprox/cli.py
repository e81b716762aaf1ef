"""Command-line front end: build | jackson | bernstein | bmo | frame-check | atoms-demo.

Configuration is resolved as command defaults, then a flat ``key = value``
file (``--config``), then per-field flags, then a JSON object (``--set``).
Every output carries a sha256 fingerprint of the resolved configuration.
The exit code is 0 only if the command's invariant checks pass.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    d: int | None = None
    b: int = 4
    betaw: float = 1.0 / 12.0
    gamma: float | None = None
    J: int | None = None
    tau: float | None = None
    s: float | None = None
    q: float = 1.0
    n_grid: str = "1-64"
    trials: int = 20
    seed: int = 0
    output_dir: str = "out"
    tree: str = "sphere"
    input: str = "random"
    n: int = 10
    n_tilde: int = 3
    strict_cubature: bool = False

    def n_values(self) -> list[int]:
        return parse_n_grid(self.n_grid)

    def fingerprint(self) -> str:
        payload = {k: v for k, v in asdict(self).items() if k != "output_dir"}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


# tree gamma is delta_j = gamma b^{-j}; needlet systems use gamma_bar = 2 gamma
COMMAND_DEFAULTS = {
    "build": {"d": 3, "J": 4, "gamma": 8.0},
    "jackson": {"d": 3, "J": 4, "gamma": 8.0, "tau": 1.0},
    "bernstein": {"d": 3, "J": 3, "gamma": 8.0, "tau": 1.0, "n_grid": "1,2,4,8,16", "trials": 50},
    "bmo": {"d": 2, "J": 4, "gamma": 1.0},
    "frame-check": {"d": 3, "J": 2, "gamma": 0.5},
    "atoms-demo": {"d": 3, "J": 2, "gamma": 1.0, "tau": 1.0, "q": 2.0},
}

_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def parse_n_grid(text: str) -> list[int]:
    """'1-64' (inclusive range) or '1,2,4,8'."""
    text = str(text).strip()
    if "-" in text and "," not in text:
        lo, hi = text.split("-")
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",") if t.strip()]


def _coerce(name: str, value):
    if value is None:
        return None
    kind = _FIELD_TYPES[name]
    if "bool" in kind:
        if isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return bool(value)
    if kind.startswith("int"):
        return int(value)
    if kind.startswith("float"):
        return float(value)
    return str(value)


def read_config_file(path: str | Path) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        k, v = (t.strip() for t in line.split("=", 1))
        if k not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {k!r}")
        out[k] = v
    return out


def resolve_config(command: str, file_values: dict | None = None, flags: dict | None = None,
                   override: dict | None = None) -> ExperimentConfig:
    merged: dict = {}
    for layer in (COMMAND_DEFAULTS.get(command, {}), file_values or {}, flags or {}, override or {}):
        for k, v in layer.items():
            if k not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key {k!r}")
            if v is not None:
                merged[k] = _coerce(k, v)
    cfg = replace(ExperimentConfig(), **merged)
    return validate_config(cfg)


def _dim(cfg: ExperimentConfig) -> int:
    return 1 if cfg.tree == "dyadic" else cfg.d - 1


def validate_config(cfg: ExperimentConfig) -> ExperimentConfig:
    from .tree import TreeParams

    if cfg.d not in (2, 3):
        raise ConfigError(f"d must be 2 or 3, got {cfg.d}")
    if cfg.tree not in ("sphere", "dyadic"):
        raise ConfigError(f"tree must be 'sphere' or 'dyadic', got {cfg.tree!r}")
    if cfg.input not in ("random", "zero"):
        raise ConfigError(f"input must be 'random' or 'zero', got {cfg.input!r}")
    try:
        TreeParams(b=cfg.b, betaw=cfg.betaw, gamma=cfg.gamma, J=cfg.J)
    except ValueError as exc:
        raise ConfigError(f"invalid tree parameters: {exc}") from exc
    dim = _dim(cfg)
    tau, s = cfg.tau, cfg.s
    if s is not None and tau is None:
        tau = dim / s
    elif tau is not None and s is None:
        s = dim / tau
    elif tau is not None and s is not None and not np.isclose(1.0 / tau, s / dim):
        raise ConfigError(f"tau={tau} and s={s} violate 1/tau = s/{dim}")
    if tau is not None and tau <= 0:
        raise ConfigError("tau must be positive")
    if cfg.q <= 0:
        raise ConfigError("q must be positive")
    return replace(cfg, tau=tau, s=s)


# --------------------------------------------------------------------------
# output helpers


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["NA" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for v in r])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _outdir(cfg: ExperimentConfig) -> Path:
    p = Path(cfg.output_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _summary(cfg: ExperimentConfig, command: str, passed: bool, **extra) -> dict:
    config = {k: v for k, v in asdict(cfg).items() if k != "output_dir"}
    return {"command": command, "config": config, "fingerprint": cfg.fingerprint(), "pass": bool(passed), **extra}


def _tree_params(cfg: ExperimentConfig):
    from .tree import TreeParams

    return TreeParams(b=cfg.b, betaw=cfg.betaw, gamma=cfg.gamma, J=cfg.J)


def _build_tree(cfg: ExperimentConfig):
    from .tree import build_sphere_tree, dyadic_cube_oracle

    if cfg.tree == "dyadic":
        return dyadic_cube_oracle(1, cfg.J)
    return build_sphere_tree(cfg.d, _tree_params(cfg), cfg.seed)


def _system(cfg: ExperimentConfig):
    from .needlets import build_needlet_system

    return build_needlet_system(cfg.d, cfg.J, cfg.b, 2.0 * cfg.gamma, cfg.betaw, cfg.seed)


# --------------------------------------------------------------------------
# commands


def cmd_build(cfg: ExperimentConfig) -> int:
    """Nets, tree and per-level cubature rules of degree 2 b^j.

    Levels whose net has fewer nodes than the polynomial space dimension are
    reported as skipped unless strict_cubature is set.
    """
    from .cubature import CubatureError, moment_residual, root_rule, solve_weights
    from .harmonics import poly_space_dim
    from .nets import LevelNet
    from .tree import check_tree

    out = _outdir(cfg)
    tree = _build_tree(replace(cfg, tree="sphere"))
    report = check_tree(tree)
    params = _tree_params(cfg)
    nets = [LevelNet(tree.deltas[j], tree.points[tree.level_slice(j)], j).to_json() for j in range(tree.n_levels)]
    rules, cub_diag, cub_ok = [root_rule(cfg.d).to_json()], [], True
    for j in range(1, tree.n_levels):
        deg = 2 * cfg.b**j
        n_pts = int(tree.level_sizes()[j])
        need = poly_space_dim(deg, cfg.d)
        entry = {"level": j, "degree": deg, "nodes": n_pts, "dimension": need}
        if n_pts < need:
            entry["status"] = "skipped: fewer nodes than polynomial dimension"
            cub_ok = cub_ok and not cfg.strict_cubature
        else:
            try:
                net = LevelNet(params.delta(j), tree.points[tree.level_slice(j)], j)
                rule = solve_weights(net, deg, level=j)
                entry.update(status="ok", residual=moment_residual(rule), min_weight=float(rule.weights.min()))
                rules.append(rule.to_json())
            except CubatureError as exc:
                entry.update(status="failed", error=str(exc))
                cub_ok = False
        cub_diag.append(entry)
    _write_json(out / "nets.json", {"fingerprint": cfg.fingerprint(), "levels": nets})
    _write_json(out / "tree.json", {"fingerprint": cfg.fingerprint(), "tree": tree.to_json()})
    _write_json(out / "rules.json", {"fingerprint": cfg.fingerprint(), "rules": rules})
    passed = report.passes() and cub_ok
    rep = asdict(report)
    _write_json(out / "summary.json", _summary(cfg, "build", passed, tree_report=rep, cubature=cub_diag,
                                               level_sizes=tree.level_sizes().tolist()))
    return EXIT_OK if passed else EXIT_FAIL


def cmd_jackson(cfg: ExperimentConfig) -> int:
    from .nterm import jackson_rate_experiment

    out = _outdir(cfg)
    tree = _build_tree(cfg)
    ng = cfg.n_values()
    if cfg.input == "zero":
        rows = [(t, n, 0.0, None) for t in range(cfg.trials) for n in ng]
        slope = intercept = c_est = None
        passed = True
    else:
        table = jackson_rate_experiment(tree, cfg.tau, cfg.q, ng, cfg.trials, cfg.seed)
        rows, slope, intercept, c_est = table.rows, table.slope, table.intercept, table.c_estimate
        passed = bool(slope <= -1.0 / cfg.tau + 0.15)
    _write_csv(out / "jackson_rates.csv", ["trial", "n", "sigma_greedy", "sigma_oracle_or_NA"], rows)
    _write_json(out / "jackson_summary.json", _summary(
        cfg, "jackson", passed, tau=cfg.tau, q=cfg.q, slope=slope, intercept=intercept,
        c_estimate=c_est, slope_target=-1.0 / cfg.tau + 0.15))
    return EXIT_OK if passed else EXIT_FAIL


def cmd_bernstein(cfg: ExperimentConfig) -> int:
    from .nterm import bernstein_check, random_sparse
    from .seqnorms import norm_ell_tau, norm_g_q

    out = _outdir(cfg)
    tree = _build_tree(cfg)
    rng = np.random.default_rng(cfg.seed)
    rows, failures = [], 0
    for n in cfg.n_values():
        for t in range(cfg.trials):
            h = random_sparse(tree, n, rng)
            if cfg.input == "zero":
                h = h.scaled(0.0)
            lhs = norm_ell_tau(h, cfg.tau)
            rhs = max(h.nnz, 1) ** (1.0 / cfg.tau) * norm_g_q(h, cfg.q)
            ok = bernstein_check(h, cfg.tau, cfg.q)
            failures += not ok
            rows.append((t, n, lhs, rhs, int(ok)))
    _write_csv(out / "bernstein.csv", ["trial", "n", "ell_tau", "bound", "ok"], rows)
    passed = failures == 0
    _write_json(out / "bernstein_summary.json", _summary(cfg, "bernstein", passed, failures=failures, checked=len(rows)))
    return EXIT_OK if passed else EXIT_FAIL


BMO_BAND_LIMIT = 3.0


def cmd_bmo(cfg: ExperimentConfig) -> int:
    from .bmo import bmo_f02_equivalence_experiment, circle_test_suite
    from .harmonics import SphericalPolynomial

    if cfg.d != 2:
        raise ConfigError("the BMO experiment runs on the circle (d = 2)")
    out = _outdir(cfg)
    sys_ = _system(cfg)
    suite = circle_test_suite(cfg.J, cfg.b, cfg.seed)
    if cfg.input == "zero":
        suite = [(name, SphericalPolynomial(2, f.L, np.zeros_like(f.coeffs))) for name, f in suite]
        from .bmo import bmo_norm_discrete, default_cap_grid, dense_rule, f02_norm_via_coeffs

        rule = dense_rule(2, suite[0][1].L)
        caps = default_cap_grid(2, rule)
        vals = [(n, bmo_norm_discrete(f, rule, caps).value_q2, f02_norm_via_coeffs(sys_, f)) for n, f in suite]
        _write_csv(out / "bmo_ratios.csv", ["name", "bmo", "f02", "ratio"], [(n, a, c, None) for n, a, c in vals])
        passed = all(a == 0.0 and c == 0.0 for _, a, c in vals)
        _write_json(out / "bmo_summary.json", _summary(cfg, "bmo", passed, band=None))
        return EXIT_OK if passed else EXIT_FAIL
    table = bmo_f02_equivalence_experiment(sys_, suite)
    (out / "bmo_ratios.csv").write_text(table.to_csv(), encoding="utf-8")
    passed = table.band <= BMO_BAND_LIMIT
    _write_json(out / "bmo_summary.json", _summary(cfg, "bmo", passed, band=table.band, band_limit=BMO_BAND_LIMIT,
                                                   ratios=dict(zip(table.names, map(float, table.ratios)))))
    return EXIT_OK if passed else EXIT_FAIL


def cmd_frame_check(cfg: ExperimentConfig) -> int:
    from .harmonics import SphericalPolynomial
    from .needlets import analyze, reconstruction_error

    out = _outdir(cfg)
    sys_ = _system(cfg)
    L = max(sys_.reproduced_degree() - 1, 0)
    f = SphericalPolynomial.random(cfg.d, L, cfg.seed)
    if cfg.input == "zero":
        f = SphericalPolynomial(cfg.d, L, np.zeros_like(f.coeffs))
        h = analyze(sys_, f)
        err, parseval = 0.0, None
        passed = bool(np.all(h.values == 0.0))
    else:
        err, parseval = reconstruction_error(sys_, f)
        passed = err <= 1e-8 and abs(parseval - 1.0) <= 1e-6
    _write_json(out / "frame_check.json", _summary(cfg, "frame-check", passed, degree=L, rel_l2_error=err,
                                                   parseval_ratio=parseval, n_nodes=int(sys_.tree.n_nodes)))
    return EXIT_OK if passed else EXIT_FAIL


def cmd_atoms_demo(cfg: ExperimentConfig) -> int:
    from .harmonics import SphericalPolynomial
    from .newton import atoms_demo

    out = _outdir(cfg)
    sys_ = _system(cfg)
    L = max(sys_.reproduced_degree() - 1, 0)
    f = SphericalPolynomial.random(cfg.d, L, cfg.seed)
    if cfg.input == "zero":
        f = SphericalPolynomial(cfg.d, L, np.zeros_like(f.coeffs))
    res = atoms_demo(sys_, f, cfg.n, cfg.n_tilde, cfg.tau, cfg.q, seed=cfg.seed)
    passed = len(res.selected) <= cfg.n and np.isfinite(res.boundary_error)
    _write_json(out / "atoms_demo.json", _summary(cfg, "atoms-demo", passed, **res.to_json()))
    _write_json(out / "atom.json", res.atom.to_json())
    return EXIT_OK if passed else EXIT_FAIL


COMMANDS = {
    "build": cmd_build,
    "jackson": cmd_jackson,
    "bernstein": cmd_bernstein,
    "bmo": cmd_bmo,
    "frame-check": cmd_frame_check,
    "atoms-demo": cmd_atoms_demo,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sphapprox", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--set", dest="override", help="JSON object overriding configuration fields")
    for f in fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        if "bool" in f.type:
            parser.add_argument(flag, dest=f.name, action="store_const", const=True, default=None)
        else:
            parser.add_argument(flag, dest=f.name, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    flags = {f.name: getattr(args, f.name) for f in fields(ExperimentConfig)}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        override = json.loads(args.override) if args.override else {}
        if not isinstance(override, dict):
            raise ConfigError("--set expects a JSON object")
        cfg = resolve_config(args.command, file_values, flags, override)
        code = COMMANDS[args.command](cfg)
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{args.command}: {'pass' if code == EXIT_OK else 'FAIL'} (fingerprint {cfg.fingerprint()[:12]})")
    return code


if __name__ == "__main__":
    sys.exit(main())
