"""Config-driven batch front end.

A run configuration is one YAML document naming either a catalog model or
inline banded block tables, the solver variant and its options, optional
baseline comparisons, and output paths.  ``run`` writes the distribution
as CSV and a machine-parseable YAML report; ``inspect`` dumps the full
per-checkpoint state at one level; ``validate`` checks the generator for
proper-Q-matrix violations.  Identical configs produce byte-identical
distribution files; phase labels in all output are 1-indexed.

Exit codes: 0 converged, 2 not converged, 1 error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import baseline
from .errors import BhmcError, ConfigError
from .generator import BlockGenerator, lbcl_augment, principal_submatrix, validate_proper_q
from .lfp import DriftCertificate, incoming_support, outgoing_support, select_pivot
from .models import MODEL_IDS, ModelSpec, build_model
from .recursions import advance, init_state, u_star_K_direct
from .solver import (
    Approximation,
    CheckpointSchedule,
    FixedDirection,
    SolverOptions,
    residual_q_norm,
    solve,
    tv_distance,
)

BASELINE_NAMES = ("lbcl_direct", "bright_taylor", "brute_force")


@dataclass
class RunConfig:
    """Parsed and validated run configuration."""

    generator: BlockGenerator
    options: SolverOptions
    cert: DriftCertificate | None
    direction: FixedDirection | None
    compare: tuple[str, ...]
    distribution_path: str | None
    report_path: str | None
    validate_levels: int
    validate_tol: float
    raw: dict


def _expect_mapping(node: Any, where: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigError(f"{where} must be a mapping, got {type(node).__name__}")
    return node


def _reject_unknown(node: dict, allowed: set[str], where: str) -> None:
    extra = set(node) - allowed
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)} in {where}")


def _matrix(node: Any, where: str) -> np.ndarray:
    try:
        m = np.asarray(node, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where} is not a numeric matrix: {exc}") from exc
    if m.ndim != 2:
        raise ConfigError(f"{where} must be a nested (row-major) array of rows")
    return m


def _inline_generator(node: dict) -> BlockGenerator:
    """Generator from explicit per-level block tables plus a repeating tail.

    ``levels[k]`` maps column offsets (as strings or ints, e.g. ``"-1"``,
    ``"0"``, ``"1"``) to blocks.  Levels beyond the explicit list reuse the
    ``tail`` table (default: the last explicit level's table), which forces
    a constant phase count in the tail.
    """
    _reject_unknown(node, {"bandwidth", "levels", "tail"}, "model.inline")
    if "bandwidth" not in node or "levels" not in node:
        raise ConfigError("model.inline needs 'bandwidth' and 'levels'")
    bandwidth = int(node["bandwidth"])
    if bandwidth < 1:
        raise ConfigError(f"inline bandwidth must be >= 1, got {bandwidth}")
    raw_levels = node["levels"]
    if not isinstance(raw_levels, list) or not raw_levels:
        raise ConfigError("model.inline.levels must be a nonempty list")

    def parse_table(table: Any, where: str) -> dict[int, np.ndarray]:
        table = _expect_mapping(table, where)
        out = {}
        for key, value in table.items():
            try:
                offset = int(key)
            except (TypeError, ValueError):
                raise ConfigError(f"{where}: offset {key!r} is not an integer")
            if offset < -1 or offset > bandwidth:
                raise ConfigError(
                    f"{where}: offset {offset} outside -1..{bandwidth}"
                )
            out[offset] = _matrix(value, f"{where}[{key}]")
        if 0 not in out:
            raise ConfigError(f"{where} must include the diagonal block '0'")
        return out

    tables = [parse_table(t, f"model.inline.levels[{k}]") for k, t in enumerate(raw_levels)]
    tail = parse_table(node["tail"], "model.inline.tail") if "tail" in node else tables[-1]
    counts = [t[0].shape[0] for t in tables]
    tail_m = tail[0].shape[0]
    if counts[-1] != tail_m:
        raise ConfigError(
            f"last explicit level has {counts[-1]} phases but tail has {tail_m}"
        )
    explicit = len(tables)

    def phase_count(k: int) -> int:
        return counts[k] if k < explicit else tail_m

    def block(k: int, l: int) -> np.ndarray:
        table = tables[k] if k < explicit else tail
        b = table.get(l - k)
        if b is None or l < 0 or (k == 0 and l - k == -1):
            return np.zeros((phase_count(k), phase_count(l)))
        return b

    gen = BlockGenerator(phase_count, block, bandwidth=bandwidth)
    for k in range(explicit + 1):  # shape consistency across the seam
        for l in range(max(0, k - 1), k + bandwidth + 1):
            gen.block_array(k, l)
    return gen


def _build_generator(node: dict) -> BlockGenerator:
    node = _expect_mapping(node, "model")
    if ("name" in node) == ("inline" in node):
        raise ConfigError("model needs exactly one of 'name' or 'inline'")
    if "inline" in node:
        _reject_unknown(node, {"inline"}, "model")
        return _inline_generator(_expect_mapping(node["inline"], "model.inline"))
    _reject_unknown(node, {"name", "params"}, "model")
    name = node["name"]
    if name not in MODEL_IDS:
        raise ConfigError(f"unknown model {name!r}; expected one of {MODEL_IDS}")
    params = _expect_mapping(node.get("params", {}), "model.params")
    return build_model(ModelSpec(name, params))


def _build_schedule(node: Any) -> CheckpointSchedule:
    if node is None:
        return CheckpointSchedule()
    node = _expect_mapping(node, "solver.schedule")
    _reject_unknown(node, {"kind", "stride", "factor", "levels"}, "solver.schedule")
    kind = node.get("kind", "every")
    kwargs: dict[str, Any] = {"kind": kind}
    if "stride" in node:
        kwargs["stride"] = int(node["stride"])
    if "factor" in node:
        kwargs["factor"] = float(node["factor"])
    if "levels" in node:
        kwargs["levels"] = tuple(int(x) for x in node["levels"])
    return CheckpointSchedule(**kwargs)


def _build_cert(node: Any, gen: BlockGenerator) -> DriftCertificate:
    node = _expect_mapping(node, "solver.drift")
    _reject_unknown(node, {"v", "b", "finite_set"}, "solver.drift")
    v_node = _expect_mapping(node.get("v"), "solver.drift.v")
    _reject_unknown(v_node, {"affine", "vectors"}, "solver.drift.v")
    if ("affine" in v_node) == ("vectors" in v_node):
        raise ConfigError("solver.drift.v needs exactly one of 'affine' or 'vectors'")
    if "affine" in v_node:
        aff = _expect_mapping(v_node["affine"], "solver.drift.v.affine")
        _reject_unknown(aff, {"intercept", "slope"}, "solver.drift.v.affine")
        intercept = float(aff.get("intercept", 1.0))
        slope = float(aff.get("slope", 1.0))

        def v_blocks(l: int) -> np.ndarray:
            return np.full(gen.phase_count(l), intercept + slope * l)

    else:
        vectors = [np.asarray(v, dtype=float).ravel() for v in v_node["vectors"]]
        if not vectors:
            raise ConfigError("solver.drift.v.vectors must be nonempty")
        for l, vec in enumerate(vectors):
            if vec.shape != (gen.phase_count(l),):
                raise ConfigError(
                    f"drift vector for level {l} has length {vec.size}, "
                    f"expected {gen.phase_count(l)}"
                )

        def v_blocks(l: int) -> np.ndarray:
            if l >= len(vectors):
                raise ConfigError(
                    f"drift vectors cover levels 0..{len(vectors) - 1}, "
                    f"but level {l} was reached; supply more or raise max_level"
                )
            return vectors[l]

    finite = frozenset(
        (int(lv), int(ph)) for lv, ph in node.get("finite_set", [[0, 0]])
    )
    return DriftCertificate(v_blocks=v_blocks, b=float(node.get("b", 1.0)), C=finite)


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate one YAML run configuration."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    raw = _expect_mapping(raw, "config")
    _reject_unknown(raw, {"model", "solver", "compare", "output", "validate"}, "config")
    if "model" not in raw:
        raise ConfigError("config needs a 'model' section")
    gen = _build_generator(raw["model"])

    sol = _expect_mapping(raw.get("solver", {}), "solver")
    _reject_unknown(
        sol,
        {"variant", "epsilon", "k_set", "max_level", "schedule", "drift", "varpi"},
        "solver",
    )
    variant = sol.get("variant", "mip_new")
    kwargs: dict[str, Any] = {"variant": variant}
    if "epsilon" in sol:
        kwargs["epsilon"] = float(sol["epsilon"])
    if "k_set" in sol:
        ks = sol["k_set"]
        if not isinstance(ks, list):
            raise ConfigError("solver.k_set must be a list of levels")
        kwargs["K_set"] = frozenset(int(x) for x in ks)
    if "max_level" in sol:
        kwargs["max_level"] = int(sol["max_level"])
    kwargs["checkpoint_schedule"] = _build_schedule(sol.get("schedule"))
    options = SolverOptions(**kwargs)

    cert = _build_cert(sol["drift"], gen) if "drift" in sol else None
    if variant == "mip_drift" and cert is None:
        raise ConfigError("variant mip_drift needs a solver.drift section")
    direction = None
    if "varpi" in sol:
        direction = FixedDirection(np.asarray(sol["varpi"], dtype=float))
    if variant == "fixed_direction" and direction is None:
        raise ConfigError("variant fixed_direction needs solver.varpi")

    compare = raw.get("compare", [])
    if not isinstance(compare, list):
        raise ConfigError("compare must be a list of baseline names")
    for name in compare:
        if name not in BASELINE_NAMES:
            raise ConfigError(
                f"unknown baseline {name!r}; expected one of {BASELINE_NAMES}"
            )

    out = _expect_mapping(raw.get("output", {}), "output")
    _reject_unknown(out, {"distribution", "report"}, "output")
    val = _expect_mapping(raw.get("validate", {}), "validate")
    _reject_unknown(val, {"levels", "tol"}, "validate")

    return RunConfig(
        generator=gen,
        options=options,
        cert=cert,
        direction=direction,
        compare=tuple(compare),
        distribution_path=out.get("distribution"),
        report_path=out.get("report"),
        validate_levels=int(val.get("levels", 20)),
        validate_tol=float(val.get("tol", 1e-12)),
        raw=raw,
    )


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    kwargs: dict[str, Any] = {}
    if args.epsilon is not None:
        kwargs["epsilon"] = args.epsilon
    if args.k_set is not None:
        try:
            kwargs["K_set"] = frozenset(int(x) for x in args.k_set.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad --k-set {args.k_set!r}: {exc}") from exc
    if args.max_level is not None:
        kwargs["max_level"] = args.max_level
    if args.schedule is not None:
        kwargs["checkpoint_schedule"] = _parse_schedule_flag(args.schedule)
    if not kwargs:
        return cfg
    base = cfg.options
    cfg.options = SolverOptions(
        epsilon=kwargs.get("epsilon", base.epsilon),
        K_set=kwargs.get("K_set", base.K_set),
        checkpoint_schedule=kwargs.get("checkpoint_schedule", base.checkpoint_schedule),
        max_level=kwargs.get("max_level", base.max_level),
        variant=base.variant,
    )
    return cfg


def _parse_schedule_flag(text: str) -> CheckpointSchedule:
    kind, _, rest = text.partition(":")
    try:
        if kind == "every":
            return CheckpointSchedule()
        if kind == "arithmetic":
            return CheckpointSchedule(kind="arithmetic", stride=int(rest))
        if kind == "geometric":
            return CheckpointSchedule(kind="geometric", factor=float(rest))
        if kind == "explicit":
            return CheckpointSchedule(
                kind="explicit", levels=tuple(int(x) for x in rest.split(","))
            )
    except ValueError as exc:
        raise ConfigError(f"bad --schedule {text!r}: {exc}") from exc
    raise ConfigError(f"bad --schedule {text!r}")


def _write_distribution(path: str, approx: Approximation) -> None:
    lines = ["level,phase,probability"]
    for k, blk in enumerate(approx.blocks):
        for i, p in enumerate(blk):
            lines.append(f"{k},{i + 1},{p:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def _trace_payload(approx: Approximation) -> list[dict]:
    out = []
    for rec in approx.pivot_trace:
        entry = {
            "level": rec.level,
            "pivot": None if rec.pivot is None else rec.pivot + 1,
            "ratio": None if rec.ratio is None else float(rec.ratio),
            "residual": float(rec.residual),
        }
        if rec.step_distance is not None:
            entry["step_distance"] = float(rec.step_distance)
        out.append(entry)
    return out


def _comparisons(cfg: RunConfig, approx: Approximation) -> dict[str, dict]:
    """Pairwise distances between the primary answer and requested baselines."""
    results: dict[str, dict] = {}
    flat = approx.flatten()
    alpha = None
    last = approx.pivot_trace[-1] if approx.pivot_trace else None
    if last is not None and last.pivot is not None:
        alpha = np.zeros(len(approx.blocks[approx.n]))
        alpha[last.pivot] = 1.0
    elif cfg.direction is not None:
        alpha = cfg.direction.varpi
    for name in cfg.compare:
        if name == "lbcl_direct":
            other = baseline.lbcl_direct(cfg.generator, approx.n, alpha)
            results[name] = {
                "depth": approx.n,
                "tv_distance": float(tv_distance(flat, other)),
            }
        elif name == "brute_force":
            sub = principal_submatrix(cfg.generator, approx.n)
            other = baseline.brute_force_stationary(lbcl_augment(sub, alpha))
            results[name] = {
                "depth": approx.n,
                "tv_distance": float(tv_distance(flat, other)),
            }
        else:  # bright_taylor
            k_star = 3 * approx.n
            other = baseline.bright_taylor(cfg.generator, k_star).flatten()
            results[name] = {
                "depth": k_star,
                "tv_distance": float(tv_distance(flat, other)),
            }
    return results


def run(config_path: str, args: argparse.Namespace | None = None) -> int:
    """Execute the configured solve; write distribution, report, comparisons."""
    cfg = load_config(config_path)
    if args is not None:
        cfg = _apply_overrides(cfg, args)
    started = time.perf_counter()
    approx = solve(cfg.generator, cfg.options, cert=cfg.cert, direction=cfg.direction)
    elapsed = time.perf_counter() - started
    comparisons = _comparisons(cfg, approx)
    if cfg.distribution_path:
        _write_distribution(cfg.distribution_path, approx)
    report = {
        "config": cfg.raw,
        "result": {
            "variant": approx.variant,
            "converged": bool(approx.converged),
            "stop_level": int(approx.n),
            "residual": float(approx.residual),
            "epsilon": float(cfg.options.epsilon),
            "total_mass": float(approx.flatten().sum()),
            "pivot_trace": _trace_payload(approx),
            "wall_time_s": elapsed,
        },
    }
    if comparisons:
        report["result"]["comparisons"] = comparisons
    if cfg.report_path:
        Path(cfg.report_path).write_text(yaml.safe_dump(report, sort_keys=False))
    status = "converged" if approx.converged else "NOT converged"
    print(
        f"{status} at level {approx.n}: residual {approx.residual:.6g} "
        f"(epsilon {cfg.options.epsilon:g}), {elapsed:.3f}s"
    )
    for name, info in comparisons.items():
        print(f"compare {name}: tv_distance {info['tv_distance']:.6g}")
    return 0 if approx.converged else 2


def _format_array(a: np.ndarray) -> str:
    return np.array2string(np.asarray(a), precision=12, suppress_small=False)


def inspect(config_path: str, level: int, args: argparse.Namespace | None = None) -> int:
    """Print the full checkpoint state at one level."""
    cfg = load_config(config_path)
    if args is not None:
        cfg = _apply_overrides(cfg, args)
    if level < 0 or level > cfg.options.max_level:
        raise ConfigError(f"level {level} outside 0..max_level={cfg.options.max_level}")
    state = init_state(cfg.generator, cfg.options.K_set)
    for _ in range(level):
        state = advance(state, cfg.generator)
    print(f"level: {state.n}")
    print(f"U_star:\n{_format_array(state.U_star)}")
    print(f"u_star: {_format_array(state.u_star)}")
    if state.u_star_K is None:
        print("u_star_K: (not yet defined: level below max(K_set))")
        return 0
    print(f"u_star_K: {_format_array(u_star_K_direct(state))}")
    inc = incoming_support(cfg.generator, state.n)
    if state.n >= 1:
        out = outgoing_support(state, cfg.generator)
    else:
        out = frozenset(range(state.u_star.shape[0]))
    sel = select_pivot(state, inc, out)
    print(f"I_plus: {sorted(i + 1 for i in inc)}")
    print(f"O_plus: {sorted(i + 1 for i in out)}")
    print(f"J_star: {[j + 1 for j in sel.J_star]}")
    print(f"pivot: {sel.pivot + 1}")
    print(f"ratio: {sel.ratio:.17g}")
    print(f"residual: {residual_q_norm(state, sel.pivot):.17g}")
    return 0


def validate(config_path: str) -> int:
    """Run proper-Q-matrix validation on the configured generator."""
    cfg = load_config(config_path)
    report = validate_proper_q(cfg.generator, cfg.validate_levels, cfg.validate_tol)
    if report.ok:
        print(
            f"OK: no violations over levels 0..{report.levels} at tol {report.tol:g}"
        )
        return 0
    for v in report.violations:
        print(f"{v.kind}: level {v.level} phase {v.phase + 1} value {v.value:.6g}")
    print(f"{len(report.violations)} violation(s)")
    return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bhmc",
        description="Stationary distributions of upper block-Hessenberg Markov chains",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("config", help="path to YAML run configuration")
        p.add_argument("--epsilon", type=float, default=None, help="override stopping tolerance")
        p.add_argument("--k-set", default=None, help="override index set, e.g. '0' or '0,1,2'")
        p.add_argument("--max-level", type=int, default=None, help="override level cap")
        p.add_argument(
            "--schedule",
            default=None,
            help="override checkpoint schedule: every | arithmetic:S | geometric:F | explicit:N1,N2,...",
        )

    p_run = sub.add_parser("run", help="solve and write distribution + report")
    add_common(p_run)
    p_ins = sub.add_parser("inspect", help="dump recursion state at one level")
    add_common(p_ins)
    p_ins.add_argument("--level", type=int, required=True, help="level to inspect")
    p_val = sub.add_parser("validate", help="check the generator for violations")
    p_val.add_argument("config", help="path to YAML run configuration")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return run(args.config, args)
        if args.command == "inspect":
            return inspect(args.config, args.level, args)
        return validate(args.config)
    except BhmcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
