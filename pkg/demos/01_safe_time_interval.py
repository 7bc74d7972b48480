"""How long can a controlled oscillator run without its network link?

We compute the largest set of states the connected loop can keep robustly
invariant, then count how many disconnected steps the set reached after one
connected step survives before leaving it.
"""
from ncsched.cli import agent_spec, load_config
from ncsched.geometry import contains
from ncsched.invariance import invariant_set, reach, safe_time_interval
from ncsched.models import build_mode_pair

spec = agent_spec(load_config("example2")["agents"][0])
mp = build_mode_pair(spec)

inv = invariant_set(mp)
S = inv.polytope
print(f"invariant set: {inv.status.value}, {S.n_rows} constraints, {inv.iterations} iterations")

res = safe_time_interval(mp, S)
print(f"safe time interval: {res.alpha} slots")

# walk the reachable sets by hand to see where containment breaks
X = reach(S, mp.connected, mp.disturbance_set, 1)
for t in range(1, res.alpha + 2):
    print(f"  {t} slot(s) after connecting: inside = {contains(S, X)}")
    X = reach(X, mp.disconnected, mp.disturbance_set, 1)
