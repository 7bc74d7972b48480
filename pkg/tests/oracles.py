"""Small independent oracles shared by the tests."""
import itertools


def pinwheel_oracle(alphas, actions=None):
    """Plain-Python greatest fixed point over d-vectors.

    ``actions`` lists the agent sets that may be served together (default:
    one agent per slot). Returns True when an infinite feasible schedule exists.
    """
    q = len(alphas)
    actions = actions or [(i,) for i in range(q)]
    states = set(itertools.product(*[range(a) for a in alphas]))

    def nxt(d, act):
        return tuple(0 if i in act else d[i] + 1 for i in range(q))

    alive = set(states)
    while True:
        keep = {d for d in alive if any(nxt(d, a) in alive for a in actions)}
        if keep == alive:
            break
        alive = keep
    return tuple([0] * q) in alive


def wsp_oracle(m_c, alphas):
    q = len(alphas)
    k = min(m_c, q)
    return pinwheel_oracle(alphas, list(itertools.combinations(range(q), k)))
