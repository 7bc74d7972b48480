"""Two parallel channels: where the simple reductions stop working.

A schedule that pins every agent to one channel is called perfect. For the
first instance no perfect schedule exists, yet halving the windows and
scheduling on one channel yields a valid two-channel schedule. For the
second instance that reduction fails, while a hand-built cycle and the exact
search both show the instance is schedulable.
"""
from ncsched.cli import load_config
from ncsched.pinwheel import CyclicSchedule
from ncsched.windows import WspInstance, perfect_schedule_decide, reduce_to_pp, verify_wsp, wsp_exact, wsp_via_pp

for name in ("example6", "example5"):
    cfg = load_config(name)
    inst = WspInstance(cfg["channels"], tuple(cfg["alphas"]))
    print(f"{name}: windows {list(inst.alphas)} on {inst.m_c} channels")
    print(f"  perfect schedule: {'found' if perfect_schedule_decide(inst) else 'none'}")
    print(f"  single-channel reduction {reduce_to_pp(inst)}:", end=" ")
    s = wsp_via_pp(inst)
    print(s.to_text() if s else "no schedule")
    given = CyclicSchedule.from_text(cfg["schedule"], "tuples")
    print(f"  configured {given.period}-slot cycle verifies: {verify_wsp(inst, given)}")
    print(f"  exact search finds a schedule: {wsp_exact(inst) is not None}")
