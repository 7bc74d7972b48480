"""Scheduling agents that can only talk in fixed groups.

Each agent has a window: it must be served at least once in every run of
that many slots. A slot serves one group (pattern) of agents. The density
assignment picks one responsible pattern per agent; when the resulting
single-channel problem is schedulable we get a cycle, otherwise the exact
search over the pattern instance may still find one.
"""
from ncsched.cli import build_instance, load_config
from ncsched.patterns import algorithm1, assign_patterns, exact_p1

for name in ("example3", "example4"):
    cfg = load_config(name)
    inst = build_instance(cfg, cfg["alphas"])
    asg = assign_patterns(inst)
    print(f"{name}: windows {list(inst.alphas)}, {len(inst.patterns)} patterns")
    print(f"  assigned density {asg.total} ({float(asg.total):.3f})")
    fast = algorithm1(inst)
    print(f"  density route: {fast.to_text() if fast else 'no schedule'}")
    exact = exact_p1(inst)
    print(f"  exact search:  {exact.to_text() if exact else 'infeasible'}")
