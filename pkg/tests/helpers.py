"""Reference computations shared by the test modules.

These work from the functional model's response tables directly and do not
call the library's evaluation or polynomialization code.
"""

from __future__ import annotations

import itertools

import numpy as np


def world(m, u, intervention):
    """Values of all main variables when disturbances take indices ``u``."""
    g = m.graph
    vals = {}
    for v in g.main_topological_order():
        if v in intervention:
            vals[v] = int(intervention[v])
            continue
        args = [u[i.name] if i.latent else vals[i.name] for i in m.inputs[v]]
        vals[v] = m.response(m.governing[v], u[m.governing[v]], v)(*args)
    return vals


def holds(m, u, events):
    for e in events:
        # interventions on the event variable itself do not change it
        a = {k: x for k, x in e.intervention if k != e.variable}
        full = dict(world(m, u, a))
        if full[e.variable] != e.value:
            return False
    return True


def joint_assignments(m):
    names = list(m.disturbances)
    for combo in itertools.product(*(range(m.domain_size(u)) for u in names)):
        yield dict(zip(names, combo))


def enumeration_probability(m, events, xs):
    """``P(events)`` at each parameter vector in ``xs`` by summing over joint assignments."""
    xs = np.atleast_2d(xs)
    total = np.zeros(len(xs))
    for u in joint_assignments(m):
        if holds(m, u, events):
            term = np.ones(len(xs))
            for name, k in u.items():
                term = term * xs[:, m.parameters[name].start + k]
            total += term
    return total


def random_simplex_points(m, n, rng):
    out = np.empty((n, m.n_params))
    for u in m.disturbances:
        r = m.parameters[u]
        out[:, r.start:r.stop] = rng.dirichlet(np.ones(len(r)), size=n)
    return out
