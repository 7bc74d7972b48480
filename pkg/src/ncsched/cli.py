"""Command-line interface.

Subcommands::

    ncsched alpha CONFIG
    ncsched schedule CONFIG [--method M1|M2|M3] [--channels M]
    ncsched simulate CONFIG [--seed S] [--horizon H]
    ncsched bench [--section A|A_LARGE|B] [--n N] [--seed S] [--jobs J]

Exit codes: 0 success, 1 configuration error, 2 computation failure
(including constraint violations in a simulation), 3 undecided within budget.
"""
from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .geometry import GeometryError, Polytope
from .invariance import InvarianceStatus, invariant_set, safe_time_interval
from .models import AgentSpec, DynamicController, NetworkKind, build_mode_pair, lqr_gain, vehicle_model
from .online import P3Instance, beta_transform, loss_bounds_from_rate, loss_margin_check
from .patterns import (
    SECTION_A,
    SECTION_A_LARGE,
    SECTION_B,
    P1Instance,
    compare_methods,
    random_instance,
    run_method,
)
from .pinwheel import BudgetExceeded, CyclicSchedule
from .simulator import (
    AdversarialLoss,
    AgentRuntime,
    AssumptionViolation,
    NoLoss,
    Scenario,
    ScriptedLoss,
    simulate,
    violation_report,
)
from .windows import WspInstance, verify_wsp

EXIT_OK, EXIT_CONFIG, EXIT_FAILURE, EXIT_UNDECIDED = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_vector = {"type": "array", "items": {"type": "number"}}
_matrix_or_diag = {"oneOf": [_matrix, _vector, {"type": "number"}]}
_bounds = {"oneOf": [_vector, {"type": "object", "additionalProperties": False,
                               "required": ["lower", "upper"],
                               "properties": {"lower": _vector, "upper": _vector}}]}

AGENT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "network": {"enum": ["SC", "CA", "SCA"]},
        "vehicle": {"type": "object", "additionalProperties": False, "required": ["tau"],
                    "properties": {"tau": {"type": "number", "exclusiveMinimum": 0},
                                   "h": {"type": "number", "exclusiveMinimum": 0}}},
        "A": _matrix, "B": _matrix, "E": _matrix,
        "state_bounds": _bounds, "input_bounds": _bounds, "disturbance_bounds": _bounds,
        "K": _matrix,
        "lqr": {"type": "object", "additionalProperties": False, "required": ["Q", "R"],
                "properties": {"Q": _matrix_or_diag, "R": _matrix_or_diag}},
        "controller": {"type": "object", "additionalProperties": False,
                       "required": ["Ac", "Bc", "Cc"],
                       "properties": {"Ac": _matrix, "Bc": _matrix, "Cc": _matrix,
                                      "state_bounds": _bounds}},
    },
    "required": ["state_bounds", "input_bounds", "disturbance_bounds"],
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "agents": {"type": "array", "items": AGENT_SCHEMA},
        "alphas": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "patterns": {"type": "array", "items": {"type": "array", "minItems": 1,
                                                "items": {"type": "integer", "minimum": 1}}},
        "channels": {"type": "integer", "minimum": 1},
        "schedule": {"type": "string"},
        "loss": {"type": "object", "additionalProperties": False,
                 "properties": {"bounds": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                                "rate": {"type": "array", "items": {"type": "integer", "minimum": 0},
                                         "minItems": 2, "maxItems": 2}}},
        "policy": {"enum": ["fixed", "shifted", "online"]},
        "disturbance": {"enum": ["zero", "uniform", "worst"]},
        "loss_policy": {"enum": ["none", "adversarial", "scripted"]},
        "loss_script": {"type": "array", "items": {"enum": [0, 1]}},
        "lookahead": {"type": "integer", "minimum": 1},
        "deadline_source": {"enum": ["reach", "bound"]},
        "horizon": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
    },
}


# -- configuration --------------------------------------------------------------------


def load_config(path) -> dict:
    """Read a YAML (or JSON) config, falling back to the bundled fixtures by name."""
    p = Path(path)
    if not p.exists():
        bundled = resources.files("ncsched") / "data" / f"{path}.yaml"
        if not bundled.is_file():
            raise ConfigError(f"no such config: {path}")
        text = bundled.read_text()
    else:
        text = p.read_text()
    try:
        cfg = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"unparsable config: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from exc


def _box(b) -> Polytope:
    if isinstance(b, dict):
        return Polytope.box(b["lower"], b["upper"])
    return Polytope.symmetric_box(b)


def _weight(w, n) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim == 0:
        return np.eye(n) * w
    if w.ndim == 1:
        return np.diag(w)
    return w


def agent_spec(d: dict) -> AgentSpec:
    try:
        if "vehicle" in d:
            A, B, E = vehicle_model(d["vehicle"].get("h", 0.2), d["vehicle"]["tau"])
        else:
            A, B, E = np.asarray(d["A"], float), np.asarray(d["B"], float), np.asarray(d["E"], float)
        K = d.get("K")
        if K is None and "lqr" in d:
            K = lqr_gain(A, B, _weight(d["lqr"]["Q"], A.shape[0]), _weight(d["lqr"]["R"], B.shape[1]))
        ctrl = None
        if "controller" in d:
            c = d["controller"]
            ctrl = DynamicController(np.asarray(c["Ac"], float), np.asarray(c["Bc"], float),
                                     np.asarray(c["Cc"], float),
                                     _box(c["state_bounds"]) if "state_bounds" in c else None)
        return AgentSpec(A, B, E, _box(d["state_bounds"]), _box(d["input_bounds"]),
                         _box(d["disturbance_bounds"]), K=K, controller=ctrl,
                         network_kind=NetworkKind(d.get("network", "SC")), name=d.get("name", ""))
    except KeyError as exc:
        raise ConfigError(f"agent is missing {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


class ComputationFailure(RuntimeError):
    pass


def compute_agents(cfg: dict, out=None) -> list[AgentRuntime]:
    out = out or sys.stdout
    if not cfg.get("agents"):
        raise ConfigError("no agents configured")
    runtimes = []
    for k, d in enumerate(cfg["agents"], 1):
        spec = agent_spec(d)
        mp = build_mode_pair(spec)
        inv = invariant_set(mp)
        if inv.status is not InvarianceStatus.CONVERGED:
            raise ComputationFailure(f"agent {k}: invariant set computation ended with "
                                     f"{inv.status.value}")
        res = safe_time_interval(mp, inv.polytope)
        print(f"agent {k}{' (' + spec.name + ')' if spec.name else ''}: invariant set with "
              f"{inv.polytope.n_rows} constraints after {inv.iterations} iterations, "
              f"alpha = {res.alpha}{' (capped)' if res.capped else ''}", file=out)
        runtimes.append(AgentRuntime(mp, inv.polytope, res.alpha, spec.name, spec))
    return runtimes


def _alphas(cfg, agents=None) -> list[int]:
    if "alphas" in cfg:
        return list(cfg["alphas"])
    if agents is None:
        raise ConfigError("config needs 'alphas' or 'agents'")
    return [a.alpha for a in agents]


def build_instance(cfg: dict, alphas, channels=None):
    """Windows instance with channels, pattern instance with patterns, else
    a pattern instance with one singleton pattern per agent."""
    m_c = channels or cfg.get("channels")
    if m_c:
        return WspInstance(m_c, alphas)
    if "patterns" in cfg:
        pats = [tuple(a - 1 for a in p) for p in cfg["patterns"]]
        if any(a >= len(alphas) for p in pats for a in p):
            raise ConfigError("pattern refers to an unknown agent")
        return P1Instance(tuple(alphas), tuple(pats))
    return P1Instance.singletons(alphas)


def loss_bounds(cfg: dict, alphas):
    loss = cfg.get("loss")
    if not loss:
        return None
    if "bounds" in loss:
        if len(loss["bounds"]) != len(alphas):
            raise ConfigError("one loss bound per agent is required")
        return tuple(loss["bounds"])
    if "rate" in loss:
        n, w = loss["rate"]
        if w < 1:
            raise ConfigError("loss rate window must be positive")
        return loss_bounds_from_rate(alphas, n, w)
    raise ConfigError("loss needs 'bounds' or 'rate'")


def _schedule_kind(inst) -> str:
    if isinstance(inst, WspInstance):
        return "tuples"
    return "patterns"


def _verify(inst, sched) -> bool:
    if isinstance(inst, WspInstance):
        return verify_wsp(inst, sched)
    return inst.verify(sched)


def _as_pattern_instance(inst, sched: CyclicSchedule | None = None) -> P1Instance:
    """Pattern view of a windows instance (the tuples used by ``sched``)."""
    if isinstance(inst, P1Instance):
        return inst
    tuples = sorted({tuple(e) for e in (sched.prefix + sched.cycle)}) if sched else []
    return P1Instance(inst.alphas, tuple(tuples) or tuple((i,) for i in range(inst.q)))


# -- commands -------------------------------------------------------------------------


def cmd_alpha(cfg: dict, args, out=None) -> int:
    out = out or sys.stdout
    agents = compute_agents(cfg, out)
    print("alpha = " + " ".join(str(a.alpha) for a in agents), file=out)
    return EXIT_OK


def _budget(args) -> dict:
    b = {}
    if getattr(args, "budget_states", None):
        b["max_states"] = args.budget_states
    if getattr(args, "budget_ms", None):
        b["budget_ms"] = args.budget_ms
    return b


def solve(inst, method: str, budget: dict):
    """Returns ``(verdict, schedule)`` with verdict in feasible / infeasible / undecided."""
    sched, undecided = run_method(inst, method, budget)
    if undecided:
        return "undecided", None
    if sched is None:
        return "infeasible", None
    if not _verify(inst, sched):
        raise RuntimeError("internal error: emitted schedule failed verification")
    return "feasible", sched


def cmd_schedule(cfg: dict, args, out=None) -> int:
    out = out or sys.stdout
    agents = None if "alphas" in cfg else compute_agents(cfg, out)
    alphas = _alphas(cfg, agents)
    inst = build_instance(cfg, alphas, args.channels)
    lb = loss_bounds(cfg, alphas)
    target = inst
    if lb is not None:
        reduced = beta_transform(P3Instance(_as_pattern_instance(inst), lb))
        if reduced is None:
            print("verdict: infeasible (a loss bound fills a whole window)", file=out)
            return EXIT_OK
        print("shrunken windows: " + " ".join(map(str, reduced.alphas)), file=out)
        target = WspInstance(inst.m_c, reduced.alphas) if isinstance(inst, WspInstance) else reduced
    verdict, sched = solve(target, args.method, _budget(args))
    if verdict == "infeasible" and isinstance(target, WspInstance) and args.method in ("M2", "M3"):
        print("scaled single-channel instance has no schedule from this method", file=out)
    print(f"verdict: {verdict}", file=out)
    if sched is not None:
        if not _verify(inst, sched):
            raise RuntimeError("internal error: emitted schedule failed verification")
        text = sched.to_text()
        print(f"cycle length: {sched.period}", file=out)
        print(f"schedule: {text}", file=out)
        if args.out:
            Path(args.out).write_text(text + "\n")
    return EXIT_UNDECIDED if verdict == "undecided" else EXIT_OK


def _baseline(cfg, inst, args, out):
    if "schedule" in cfg:
        sched = CyclicSchedule.from_text(cfg["schedule"], _schedule_kind(inst))
        if not _verify(inst, sched):
            print("warning: configured schedule does not pass the verifier", file=out)
        return sched
    verdict, sched = solve(inst, args.method, _budget(args))
    if sched is None:
        raise ComputationFailure(f"no baseline schedule ({verdict})")
    return sched


def cmd_simulate(cfg: dict, args, out=None) -> int:
    out = out or sys.stdout
    log = sys.stderr if args.out is None else out
    agents = compute_agents(cfg, log)
    alphas = _alphas(cfg, agents)
    inst = build_instance(cfg, alphas, args.channels)
    lb = loss_bounds(cfg, alphas)
    baseline = _baseline(cfg, inst, args, log)
    p1 = _as_pattern_instance(inst, baseline)
    if baseline.kind == "tuples" and isinstance(inst, P1Instance):
        raise ConfigError("tuple schedules need 'channels'")
    instance = P3Instance(p1, lb) if lb is not None else p1
    if lb is not None:
        print(f"loss margin check: {'passed' if loss_margin_check(instance, baseline) else 'failed'}",
              file=log)
    lp = cfg.get("loss_policy", "none")
    if lp == "adversarial":
        if lb is None:
            raise ConfigError("an adversarial loss policy needs 'loss'")
        loss = AdversarialLoss(alphas, lb, cfg.get("lookahead", 1))
    elif lp == "scripted":
        loss = ScriptedLoss(cfg.get("loss_script", []))
    else:
        loss = NoLoss()
    horizon = args.horizon if args.horizon is not None else cfg.get("horizon", 100)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    sc = Scenario(agents, instance, baseline, cfg.get("policy", "fixed"),
                  cfg.get("disturbance", "uniform"), loss, horizon, seed,
                  cfg.get("deadline_source", "reach"))
    try:
        trace = simulate(sc)
    except AssumptionViolation as exc:
        raise ComputationFailure(str(exc)) from exc
    csv_text = trace.to_csv()
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    rep = violation_report(trace, agents)
    print(rep.summary(), file=log)
    return EXIT_FAILURE if rep.violations else EXIT_OK


SECTIONS = {"A": SECTION_A, "A_LARGE": SECTION_A_LARGE, "B": SECTION_B}


def cmd_bench(args, out=None) -> int:
    out = out or sys.stdout
    params = SECTIONS[args.section]
    instances = [random_instance(params, args.seed + k) for k in range(args.n)]
    report = compare_methods(instances, budget=_budget(args), jobs=args.jobs)
    text = report.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    counts = report.counts()
    summary = " ".join(f"{m}:{c['accepted']}/{c['rejected']}/{c['undecided']}" for m, c in counts.items())
    print(f"accepted/rejected/undecided {summary}; false positives {report.false_positives()}; "
          f"nesting {'holds' if report.nesting_holds() else 'violated'}", file=sys.stderr)
    return EXIT_FAILURE if report.false_positives() else EXIT_OK


# -- entry point ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ncsched", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("config", help="YAML/JSON config path or bundled fixture name")
        sp.add_argument("--out", help="write the main output to this path")
        sp.add_argument("--budget-states", type=int, dest="budget_states")
        sp.add_argument("--budget-ms", type=float, dest="budget_ms")

    common(sub.add_parser("alpha", help="invariant sets and safe time intervals"))
    sp = sub.add_parser("schedule", help="decide and construct a schedule")
    common(sp)
    sp.add_argument("--method", choices=["M1", "M2", "M3"], default="M2")
    sp.add_argument("--channels", type=int)
    sp = sub.add_parser("simulate", help="closed-loop simulation, trace as CSV")
    common(sp)
    sp.add_argument("--method", choices=["M1", "M2", "M3"], default="M2")
    sp.add_argument("--channels", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--horizon", type=int)
    sp = sub.add_parser("bench", help="compare methods on random instances")
    common(sp, config=False)
    sp.add_argument("--section", choices=sorted(SECTIONS), default="A")
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--jobs", type=int, default=1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "bench":
            if args.n < 0:
                raise ConfigError("--n must be non-negative")
            return cmd_bench(args)
        cfg = load_config(args.config)
        if args.command == "alpha":
            return cmd_alpha(cfg, args)
        if args.command == "schedule":
            return cmd_schedule(cfg, args)
        return cmd_simulate(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ComputationFailure, GeometryError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except BudgetExceeded as exc:
        print(f"undecided: {exc}", file=sys.stderr)
        return EXIT_UNDECIDED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
