"""Command-line entry point.

Subcommands: effect, importance, interaction, dependence, test, audit,
reproduce. Experiments are configured by a flat text file of dotted
`key = value` pairs ('#' starts a comment):

    dgp.id = fig5_masked
    dgp.n = 1000
    learner.kind = random_forest
    learner.params.n_trees = 200
    method.name = pdp
    method.params.feature = x2

No plots are rendered; every command writes tidy CSV plus a JSON report
with the run's config, seeds and audit findings. Exit code 0 iff every
acceptance assertion of the invoked run passed.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, dgp as dgp_mod
from .core import Dataset, build_grid, get_loss, spawn_seeds, train_test_split
from .dependence import dependence_matrix, extrapolation_score, perturbation_points
from .diagnostics import AuditPlan, audit, findings_to_json
from .effects import ale, ice, mplot, pdp, pdp_2d
from .experiments import FIGURES, reproduce
from .importance import cfi, fit_conditional_sampler, grouped_pfi, pfi, sage, shap_importance
from .inference import adjust_pvalues, pimp
from .interactions import dice_screen, h_pairwise, h_total
from .learners import LEARNER_KINDS, LearnerSpec, fit


class ConfigError(ValueError):
    pass


_KNOWN_PREFIXES = ("data.", "dgp.", "learner.", "method.", "split.", "groups.",
                   "audit.", "target")
_KNOWN_BARE = {"seed", "out", "target"}


def parse_config(path: str) -> dict:
    """Parse the flat dotted-key config grammar with line-anchored errors."""
    config: dict[str, object] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in config:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            if key not in _KNOWN_BARE and not key.startswith(_KNOWN_PREFIXES):
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            config[key] = _parse_value(value)
    return config


def _parse_value(text: str):
    if "," in text:
        return [_parse_value(part.strip()) for part in text.split(",")]
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if lowered in ("none", "null"):
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _load_data(config: dict, seed: int) -> Dataset:
    if "data.path" in config:
        return Dataset.from_csv(config["data.path"],
                                target=config.get("data.target", "target"))
    if "dgp.id" in config:
        dgp_id = config["dgp.id"]
        n = int(config.get("dgp.n", 1000))
        if dgp_id in dgp_mod.SCMS:
            return dgp_mod.sample_scm(dgp_mod.get_scm(dgp_id), n, seed)
        return dgp_mod.sample(dgp_id, n, seed, p=config.get("dgp.p"))
    raise ConfigError("config must set either data.path or dgp.id")


def _learner_spec(config: dict) -> LearnerSpec:
    kind = config.get("learner.kind")
    if kind is None:
        raise ConfigError("config key learner.kind is required")
    if kind not in LEARNER_KINDS:
        raise ConfigError(
            f"invalid learner.kind {kind!r}; expected one of {LEARNER_KINDS}"
        )
    prefix = "learner.params."
    params = {key[len(prefix):]: val for key, val in config.items()
              if key.startswith(prefix)}
    return LearnerSpec(kind, params)


def _method_params(config: dict) -> dict:
    prefix = "method.params."
    return {key[len(prefix):]: val for key, val in config.items()
            if key.startswith(prefix)}


def _feature_index(data: Dataset, value) -> int:
    if isinstance(value, int):
        return value
    try:
        return data.feature_index(str(value))
    except ValueError:
        raise ConfigError(f"unknown feature {value!r}") from None


def _prepare(config: dict, seed: int):
    """Shared setup: data, split, fitted model, audit findings."""
    data_seed, split_seed, fit_seed, audit_seed = spawn_seeds(seed, 4)
    data = _load_data(config, data_seed)
    frac = float(config.get("split.test_fraction", 0.3))
    train, test = train_test_split(data, frac, split_seed)
    model = fit(_learner_spec(config), train, fit_seed)
    return train, test, model, audit_seed


def _write_report(out: Path, payload: dict) -> None:
    with open(out / "report.json", "w") as fh:
        json.dump(payload, fh, indent=2)


def _base_report(command: str, config: dict, seed: int) -> dict:
    return {"command": command, "toolkit_version": __version__,
            "config": {k: v for k, v in config.items()}, "seed": seed,
            "results": {}, "findings": [], "status": "pass"}


def _attach_audit(report, train, test, model, plan, seed):
    findings = audit(train, model, plan, test=test, seed=seed)
    report["findings"] = json.loads(findings_to_json(findings))


def cmd_effect(config: dict, seed: int, out: Path) -> int:
    train, test, model, audit_seed = _prepare(config, seed)
    params = _method_params(config)
    name = config.get("method.name", "pdp")
    j = _feature_index(train, params.get("feature", 0))
    grid = build_grid(train, j, params.get("grid_strategy", "quantile"),
                      int(params.get("grid_size", 20)), seed=seed)
    if name in ("pdp", "ice"):
        curve = ice(model, train, grid)
        curve.to_csv(out / "ice.csv")
        pdp(model, train, grid).to_csv(out / "pdp.csv")
    elif name == "ale":
        ale(model, train, j, int(params.get("n_intervals", 20))).to_csv(out / "ale.csv")
    elif name == "mplot":
        mplot(model, train, grid,
              float(params.get("neighborhood_fraction", 0.1))).to_csv(out / "mplot.csv")
    elif name == "pdp_2d":
        k = _feature_index(train, params.get("feature_b", 1))
        grid_b = build_grid(train, k, params.get("grid_strategy", "quantile"),
                            int(params.get("grid_size", 20)), seed=seed)
        pdp_2d(model, train, grid, grid_b).to_csv(out / "pdp2d.csv")
    else:
        raise ConfigError(f"unknown effect method {name!r}")
    report = _base_report("effect", config, seed)
    plan = AuditPlan(method=name, feature_indices=[j],
                     grid_strategy=params.get("grid_strategy", "quantile"),
                     grid_size=int(params.get("grid_size", 20)))
    _attach_audit(report, train, test, model, plan, audit_seed)
    _write_report(out, report)
    return 0


def cmd_importance(config: dict, seed: int, out: Path) -> int:
    train, test, model, audit_seed = _prepare(config, seed)
    params = _method_params(config)
    name = config.get("method.name", "pfi")
    loss = get_loss(config.get("method.params.loss", "squared_error"))
    repeats = int(params.get("repeats", 10))
    if name == "pfi":
        result = pfi(model, test, loss, repeats, seed)
    elif name == "cfi":
        samplers = [fit_conditional_sampler(test, j,
                                            int(params.get("max_leaves", 30)), seed)
                    for j in range(test.p)]
        result = cfi(model, test, loss, samplers, repeats, seed)
    elif name == "shap":
        result = shap_importance(model, train, test,
                                 int(params.get("n_orderings", 30)), seed)
    elif name == "sage":
        result = sage(model, test, loss, params.get("mode", "marginal"),
                      int(params.get("n_orderings", 20)), seed)
    elif name == "grouped_pfi":
        groups = {key[len("groups."):]: [int(v) for v in np.atleast_1d(val)]
                  for key, val in config.items() if key.startswith("groups.")}
        result = grouped_pfi(model, test, loss, groups, repeats, seed)
    else:
        raise ConfigError(f"unknown importance method {name!r}")
    result.to_csv(out / "importance.csv")
    report = _base_report("importance", config, seed)
    report["results"]["scores"] = {n: float(s)
                                   for n, s in zip(result.names, result.scores)}
    plan = AuditPlan(method=name if name != "grouped_pfi" else "pfi",
                     n_replicates=repeats)
    _attach_audit(report, train, test, model, plan, audit_seed)
    _write_report(out, report)
    return 0


def cmd_interaction(config: dict, seed: int, out: Path) -> int:
    train, test, model, audit_seed = _prepare(config, seed)
    params = _method_params(config)
    name = config.get("method.name", "h_pairwise")
    import csv as _csv

    with open(out / "interactions.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        if name == "h_pairwise":
            writer.writerow(["feature_a", "feature_b", "h_squared"])
            for j in range(train.p):
                for k in range(j + 1, train.p):
                    res = h_pairwise(model, train, j, k, seed=seed)
                    writer.writerow([*res.names, repr(res.h_squared)])
        elif name == "h_total":
            writer.writerow(["feature", "h_squared"])
            for j in range(train.p):
                res = h_total(model, train, j, seed=seed)
                writer.writerow([res.names[0], repr(res.h_squared)])
        elif name == "dice":
            j = _feature_index(train, params.get("feature", 0))
            grid = build_grid(train, j, "quantile",
                              int(params.get("grid_size", 20)), seed=seed)
            std = dice_screen(model, train, j, grid)
            writer.writerow(["grid", "derivative_std"])
            for g, s in zip(grid.values, std):
                writer.writerow([repr(float(g)), repr(float(s))])
        else:
            raise ConfigError(f"unknown interaction method {name!r}")
    report = _base_report("interaction", config, seed)
    _attach_audit(report, train, test, model,
                  AuditPlan(method="pdp"), audit_seed)
    _write_report(out, report)
    return 0


def cmd_dependence(config: dict, seed: int, out: Path) -> int:
    data_seed, perm_seed = spawn_seeds(seed, 2)
    data = _load_data(config, data_seed)
    params = _method_params(config)
    rows = dependence_matrix(data, int(params.get("n_permutations", 199)), perm_seed)
    import csv as _csv

    with open(out / "dependence.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["feature_a", "feature_b", "pearson", "spearman",
                         "hsic", "hsic_p"])
        for row in rows:
            writer.writerow([row[0], row[1]] + [repr(float(v)) for v in row[2:]])
    strategy = params.get("strategy", "equidistant")
    j = _feature_index(data, params.get("feature", 0))
    pts = perturbation_points(data, j, strategy,
                              int(params.get("grid_size", 20)), seed=seed)
    extra = extrapolation_score(data, pts, strategy=strategy)
    report = _base_report("dependence", config, seed)
    report["results"]["extrapolation_score"] = extra.score
    report["results"]["threshold_distance"] = extra.threshold_distance
    _write_report(out, report)
    return 0


def cmd_test(config: dict, seed: int, out: Path) -> int:
    data_seed, test_seed = spawn_seeds(seed, 2)
    data = _load_data(config, data_seed)
    params = _method_params(config)
    loss = get_loss(params.get("loss", "squared_error"))
    tested = pimp(_learner_spec(config), data, loss,
                  int(params.get("n_target_permutations", 30)), test_seed)
    correction = params.get("correction", "bonferroni")
    adjusted = adjust_pvalues(tested.p_values_raw, correction,
                              float(params.get("alpha", 0.05)),
                              names=tested.names, observed=tested.observed)
    adjusted.to_csv(out / "tested_importance.csv")
    report = _base_report("test", config, seed)
    report["results"]["n_significant"] = int(adjusted.significant.sum())
    _write_report(out, report)
    return 0


def cmd_audit(config: dict, seed: int, out: Path) -> int:
    train, test, model, audit_seed = _prepare(config, seed)
    plan = AuditPlan(method=config.get("audit.method", "pdp"))
    findings = audit(train, model, plan, test=test, seed=audit_seed)
    findings_to_json(findings, out / "audit.json")
    report = _base_report("audit", config, seed)
    report["findings"] = json.loads(findings_to_json(findings))
    _write_report(out, report)
    return 0


COMMANDS = {
    "effect": cmd_effect,
    "importance": cmd_importance,
    "interaction": cmd_interaction,
    "dependence": cmd_dependence,
    "test": cmd_test,
    "audit": cmd_audit,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iml-toolkit",
        description="model-agnostic interpretability with pitfall diagnostics",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True)
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--out", default="out")
        cmd.add_argument("--threads", type=int, default=1)
    rep = sub.add_parser("reproduce")
    rep.add_argument("figure", choices=sorted(FIGURES))
    rep.add_argument("--seed", type=int, default=None)
    rep.add_argument("--out", default="out")
    rep.add_argument("--threads", type=int, default=1)
    return parser


def _resolve_seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("IML_TOOLKIT_SEED")
    return int(env) if env else None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    seed = _resolve_seed(args)
    out = Path(args.out)

    if args.command == "reproduce":
        # seed None lets each figure use its registered default
        report = reproduce(args.figure, seed=seed, out_dir=out)
        failing = [a["name"] for a in report["assertions"] if not a["passed"]]
        if failing:
            print(f"FAIL {args.figure}: {', '.join(failing)}", file=sys.stderr)
            return 1
        print(f"pass {args.figure} ({report['wall_clock_s']}s)")
        return 0

    if seed is None:
        seed = 0
    try:
        config = parse_config(args.config)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    created = not out.exists()
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        code = COMMANDS[args.command](config, seed, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if created:
            shutil.rmtree(out, ignore_errors=True)
        return 2
    except Exception as exc:
        print(f"error: {args.command} failed: {exc}", file=sys.stderr)
        if created:
            shutil.rmtree(out, ignore_errors=True)
        return 1
    print(f"{args.command} done in {time.perf_counter() - t0:.1f}s -> {out}")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
