"""Command-line interface: ``optdesign solve|benchmark|verify|sensitivity-grid``.

Exit codes: 0 success, 2 usage error, 3 I/O error, 4 numerical refusal
(singular information matrix).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from optdesign.criteria import (
    CriterionKind,
    GridSpec,
    SingularDesignError,
    efficiency_bound,
    sensitivity,
)
from optdesign.design import Design, DesignError
from optdesign.encoding import RepairConfig
from optdesign.engines import EngineConfig, Variant, run
from optdesign.harness import (
    ExperimentPlan,
    PlanError,
    comparison_matrix,
    default_max_fes,
    run_experiment,
)
from optdesign.models import ProblemNotFound, get_problem
from optdesign.objective import DesignObjective
from optdesign.operators import ConfigurationError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

SCHEMA_VERSION = "1"


class UsageError(Exception):
    pass


class IOFailure(Exception):
    pass


def fmt(x) -> str:
    """Scientific notation with 6 significant digits."""
    return format(float(x), ".5E")


@dataclass
class OutputRecord:
    schema_version: str
    problem: int
    criterion: str
    variant: str
    design: list
    criterion_value: float
    efficiency_bound: float
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> OutputRecord:
        fields = dict(data)
        fields["design"] = [[list(map(float, p)), float(w)] for p, w in fields["design"]]
        return cls(**fields)

    def to_csv(self) -> str:
        dim = len(self.design[0][0]) if self.design else 0
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["problem", "criterion", "variant", "seed", "criterion_value",
                    "efficiency_bound"] + [f"x{j + 1}" for j in range(dim)] + ["weight"])
        for point, weight in self.design:
            w.writerow([self.problem, self.criterion, self.variant, self.seed,
                        fmt(self.criterion_value), fmt(self.efficiency_bound)]
                       + [fmt(x) for x in point] + [fmt(weight)])
        return buf.getvalue()


def _problem(args):
    try:
        problem = get_problem(args.problem)
    except ProblemNotFound as exc:
        raise UsageError(str(exc.args[0])) from None
    path = getattr(args, "problem_file", None)
    if path:
        data = _read_json(path)
        try:
            problem = problem.with_overrides(
                theta=data.get("theta"), lower=data.get("lower"), upper=data.get("upper")
            )
        except (ValueError, DesignError) as exc:
            raise UsageError(f"invalid problem file {path}: {exc}") from None
    return problem


def _read_json(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None


def _load_design(path, problem) -> Design:
    data = _read_json(path)
    if not isinstance(data, dict):
        raise UsageError(f"{path}: expected a JSON object")
    try:
        design = Design.from_dict(data)
    except (DesignError, ValueError, TypeError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    if design.n_factors != problem.n_factors:
        raise UsageError(
            f"{path}: design has {design.n_factors} factors, problem {problem.id} "
            f"has {problem.n_factors}"
        )
    return design


def _write_text(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc.strerror}") from None


def cmd_solve(args) -> int:
    problem = _problem(args)
    criterion = CriterionKind.parse(args.criterion)
    try:
        variant = Variant.parse(args.variant)
        repair_cfg = RepairConfig.default_for(problem.space, args.merge_eps, args.min_weight)
        cfg = EngineConfig(
            variant=variant,
            max_fes=args.fes or default_max_fes(problem.id),
            np_init=args.np,
            seed=args.seed,
            code_third_bin=args.code_third_bin,
            store_repaired=args.store_repaired,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    objective = DesignObjective(problem, criterion, repair_cfg)
    record = run(objective, cfg)
    design = objective.design(record.best_vector).support()
    report = efficiency_bound(criterion, design, problem)
    out = OutputRecord(
        schema_version=SCHEMA_VERSION,
        problem=problem.id,
        criterion=criterion.value,
        variant=variant.value,
        design=[[list(map(float, x)), float(w)] for x, w in zip(design.points, design.weights)],
        criterion_value=float(record.best_value),
        efficiency_bound=float(report.efficiency_lower_bound),
        seed=int(args.seed),
    )
    if args.design_out:
        _write_text(args.design_out, json.dumps(design.to_dict()) + "\n")
    sys.stdout.write(out.to_json() + "\n" if args.out == "json" else out.to_csv())
    return EXIT_OK


def _parse_id_list(text):
    """``"1-7"``, ``"1,3,6"`` or a mix of both."""
    ids = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = (int(s) for s in part.split("-", 1))
                ids.extend(range(lo, hi + 1))
            else:
                ids.append(int(part))
        except ValueError:
            raise UsageError(f"invalid problem list {text!r}") from None
    return ids


def parse_plan_text(text) -> dict:
    """Flat ``key = value`` plan document; ``#`` starts a comment.

    Keys: problems, criterion, variants, runs, fes (all problems) or fes.<id>,
    seed, merge_eps, min_weight.
    """
    plan = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"plan line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        plan[key.lower()] = value
    return plan


def _plan_from(args) -> tuple:
    values = {}
    if args.plan:
        try:
            with open(args.plan) as fh:
                values = parse_plan_text(fh.read())
        except OSError as exc:
            raise IOFailure(f"cannot read plan {args.plan}: {exc.strerror}") from None
    for key in ("problems", "criterion", "variants", "runs", "fes", "seed"):
        flag = getattr(args, key)
        if flag is not None:
            values[key] = str(flag)
    missing = [k for k in ("problems", "criterion", "variants") if k not in values]
    if missing:
        raise UsageError(f"benchmark plan is missing {', '.join(missing)}")
    problems = _parse_id_list(values["problems"])
    try:
        runs = int(values.get("runs", 25))
        seed = int(values.get("seed", 0))
        fes = {}
        if "fes" in values:
            fes = {pid: int(float(values["fes"])) for pid in problems}
        for key, value in values.items():
            if key.startswith("fes."):
                fes[int(key[4:])] = int(float(value))
        options = {}
        for key in ("merge_eps", "min_weight"):
            if key in values:
                options[key] = float(values[key])
        plan = ExperimentPlan(
            problem_ids=problems,
            criterion=values["criterion"],
            variants=[v for v in values["variants"].split(",") if v.strip()],
            runs=runs,
            max_fes=fes,
            base_seed=seed,
            engine_options=options,
        )
    except ProblemNotFound as exc:
        raise UsageError(str(exc.args[0])) from None
    except (ValueError, PlanError) as exc:
        raise UsageError(f"invalid plan: {exc}") from None
    return plan


def summary_csv(plan, results, compare=False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["problem", "criterion", "variant", "runs", "best", "median", "worst", "mean",
                "std", "time", "partial"])
    for (pid, variant), (row, _) in results.items():
        w.writerow([pid, plan.criterion.value, variant, row.n_runs, fmt(row.best),
                    fmt(row.median), fmt(row.worst), fmt(row.mean), fmt(row.std),
                    fmt(row.mean_time), int(row.partial)])
    if compare:
        names = [v.value for v in plan.variants]
        matrix = comparison_matrix(results, names)
        w.writerow([])
        w.writerow(["target\\other"] + names)
        for t in names:
            w.writerow([t] + [str(matrix[(t, o)]) for o in names])
    return buf.getvalue()


def cmd_benchmark(args) -> int:
    plan = _plan_from(args)
    out_dir = args.out_dir
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create {out_dir}: {exc.strerror}") from None
    if not os.access(out_dir, os.W_OK):
        raise IOFailure(f"output directory {out_dir} is not writable")

    results = run_experiment(plan)
    text = summary_csv(plan, results, compare=args.compare)
    _write_text(os.path.join(out_dir, "summary.csv"), text)
    lines = []
    for (pid, variant), (_, records) in results.items():
        for i, rec in enumerate(records):
            entry = {"problem": pid, "criterion": plan.criterion.value, "run": i}
            entry.update(rec.to_dict())
            lines.append(json.dumps(entry))
    _write_text(os.path.join(out_dir, "traces.jsonl"), "".join(line + "\n" for line in lines))
    sys.stdout.write(text)
    return EXIT_OK


def _certify(args):
    problem = _problem(args)
    criterion = CriterionKind.parse(args.criterion)
    design = _load_design(args.design, problem)
    return problem, criterion, design


def cmd_verify(args) -> int:
    problem, criterion, design = _certify(args)
    grid = GridSpec(resolution=args.resolution)
    report = efficiency_bound(criterion, design, problem, grid)
    out = {"schema_version": SCHEMA_VERSION, "problem": problem.id}
    out.update(report.to_dict())
    sys.stdout.write(json.dumps(out) + "\n")
    return EXIT_OK


def _parse_slice(text, problem):
    """Values ``x3,x4,...`` (or ``x3=v,...``) fixing the factors after the first two."""
    extra = problem.n_factors - 2
    items = [s.strip() for s in text.split(",") if s.strip()]
    values = {}
    for pos, item in enumerate(items):
        if "=" in item:
            name, val = item.split("=", 1)
            name = name.strip().lower()
            if not name.startswith("x") or not name[1:].isdigit():
                raise UsageError(f"invalid slice coordinate {name!r}")
            values[int(name[1:]) - 1] = float(val)
        else:
            values[2 + pos] = float(item)
    if sorted(values) != list(range(2, problem.n_factors)):
        raise UsageError(f"--slice must fix exactly the {extra} factors x3..x{problem.n_factors}")
    return [values[j] for j in range(2, problem.n_factors)]


def cmd_sensitivity_grid(args) -> int:
    problem, criterion, design = _certify(args)
    if args.resolution < 2:
        raise UsageError("--resolution must be at least 2")
    space = problem.space
    free = min(2, problem.n_factors)
    fixed = []
    if problem.n_factors > 2:
        if not args.slice:
            raise UsageError("problems with more than two factors need --slice")
        try:
            fixed = _parse_slice(args.slice, problem)
        except ValueError:
            raise UsageError(f"invalid --slice {args.slice!r}") from None
    axes = [np.linspace(space.lower[j], space.upper[j], args.resolution) for j in range(free)]
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.column_stack([m.ravel() for m in mesh] + [np.full(mesh[0].size, v) for v in fixed])
    S = sensitivity(criterion, X, design.support(), problem)

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow([f"x{j + 1}" for j in range(problem.n_factors)] + ["S"])
    for x, s in zip(X, S):
        w.writerow([fmt(v) for v in x] + [fmt(s)])
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _criterion(text):
    try:
        return CriterionKind.parse(text).value
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="optdesign", description="D- and A-optimal designs by differential evolution")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def problem_args(p, with_design=False):
        p.add_argument("--problem", type=int, required=True, help="problem id 1-12")
        p.add_argument("--criterion", type=_criterion, required=True, help="d or a")
        p.add_argument("--problem-file", help="JSON with theta/lower/upper overrides")
        if with_design:
            p.add_argument("--design", required=True, help="design JSON file")

    s = sub.add_parser("solve", help="optimize one problem")
    problem_args(s)
    s.add_argument("--variant", default="LSHADE")
    s.add_argument("--fes", type=int, help="evaluation budget (default per problem)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--np", type=int, default=50, help="initial population size")
    s.add_argument("--merge-eps", type=float)
    s.add_argument("--min-weight", type=float)
    s.add_argument("--code-third-bin", action="store_true",
                   help="binomial crossover for CoDE's current-to-rand strategy")
    s.add_argument("--store-repaired", action="store_true",
                   help="write repaired vectors back into the population")
    s.add_argument("--out", choices=("json", "csv"), default="json")
    s.add_argument("--design-out", help="also write the design JSON here")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("benchmark", help="run a multi-run experiment plan")
    b.add_argument("--plan", help="key = value plan file")
    b.add_argument("--problems")
    b.add_argument("--criterion", type=_criterion)
    b.add_argument("--variants")
    b.add_argument("--runs", type=int)
    b.add_argument("--fes", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--out-dir", default=".")
    b.add_argument("--compare", action="store_true", help="append the Wilcoxon matrix")
    b.set_defaults(func=cmd_benchmark)

    v = sub.add_parser("verify", help="certify a design with the equivalence theorem")
    problem_args(v, with_design=True)
    v.add_argument("--resolution", type=int, help="grid points per factor")
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("sensitivity-grid", help="tabulate the sensitivity function")
    problem_args(g, with_design=True)
    g.add_argument("--resolution", type=int, required=True)
    g.add_argument("--slice", help="values of x3.. for problems with more factors")
    g.set_defaults(func=cmd_sensitivity_grid)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"optdesign: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"optdesign: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IOFailure as exc:
        print(f"optdesign: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SingularDesignError as exc:
        print(f"optdesign: singular information matrix: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
