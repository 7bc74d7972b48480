"""Five vehicles share two channels while an adversary drops packets.

Each packet loss wastes a whole slot. The shifted policy simply replays the
baseline cycle one slot later after each loss. The online policy instead
picks, in every slot, the rotation of the cycle that leaves the most slack
against the worst losses still allowed. Both stay safe; the online policy
keeps a larger margin.
"""
import io

from ncsched.cli import compute_agents, load_config
from ncsched.online import P3Instance, beta_transform, loss_bounds_from_rate, loss_margin_check
from ncsched.patterns import P1Instance
from ncsched.pinwheel import CyclicSchedule
from ncsched.simulator import AdversarialLoss, Scenario, simulate

cfg = load_config("example8")
log = io.StringIO()
agents = compute_agents(cfg, log)
print(log.getvalue(), end="")
alphas = [a.alpha for a in agents]
bounds = loss_bounds_from_rate(alphas, *cfg["loss"]["rate"])
base = CyclicSchedule.from_text(cfg["schedule"], "tuples")
inst = P3Instance(P1Instance(tuple(alphas), tuple(sorted(set(base.cycle)))), bounds)

print(f"loss budgets per window: {list(bounds)}")
print(f"windows left after reserving the losses: {list(beta_transform(inst).alphas)}")
print(f"baseline tolerates retransmission: {loss_margin_check(inst, base)}")

for policy in ("shifted", "online"):
    tr = simulate(Scenario(agents, inst, base, policy, "uniform",
                           AdversarialLoss(alphas, bounds), horizon=200, seed=1))
    floors = [min(tr.residual_floor(i)) for i in range(len(agents))]
    print(f"{policy:8s} losses={sum(tr.losses):3d} violations={tr.violations} "
          f"min robust residual={tr.min_residual} per agent={floors}")
