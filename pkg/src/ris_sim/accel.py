"""Squared-extrapolation acceleration for monotone fixed-point solver maps.

Each cycle evaluates the one-iteration map twice, extrapolates with the
norm-ratio step length, re-projects onto the feasible set, and keeps the
extrapolated point only if it does not fall below the plain two-step value.
Emitted iterates are therefore always feasible with a nondecreasing
objective.
"""

from __future__ import annotations

import numpy as np

from .designs import IterationLog


def squarem_wrap(step, project, objective, x0, opts):
    """Accelerate the monotone map ``step`` starting from ``x0``.

    ``step`` performs one full outer iteration, ``project`` restores power
    scaling and unit-modulus phases after extrapolation, and ``objective``
    scores a design. Designs must support ``as_vector``/``with_vector``.
    Returns (design, IterationLog); the log counts map evaluations in
    ``extras["map_evals"]``.
    """
    log = IterationLog()
    log.start_clock()
    current = x0.copy()
    value = objective(current)
    log.record(value)
    map_evals = 0
    accepted_extrapolations = 0
    two_step_values = []
    for _ in range(opts.max_outer_iters):
        x1 = step(current)
        x2 = step(x1)
        map_evals += 2
        v0 = current.as_vector()
        r = x1.as_vector() - v0
        v = x2.as_vector() - x1.as_vector() - r
        vnorm = float(np.linalg.norm(v))
        plain_value = objective(x2)
        two_step_values.append(plain_value)
        if vnorm == 0.0:
            # fixed point reached
            log.record(plain_value, [plain_value])
            current = x2
            break
        alpha = -max(1.0, float(np.linalg.norm(r)) / vnorm)
        candidate = project(current.with_vector(
            v0 - 2.0 * alpha * r + alpha ** 2 * v))
        candidate_value = objective(candidate)
        if candidate_value >= plain_value:
            current = candidate
            new_value = candidate_value
            accepted_extrapolations += 1
        else:
            current = x2
            new_value = plain_value
        log.record(new_value, [new_value])
        if abs(new_value - value) < opts.rel_tol * max(1.0, abs(value)):
            value = new_value
            break
        value = new_value
    log.extras["map_evals"] = map_evals
    log.extras["accepted_extrapolations"] = accepted_extrapolations
    log.extras["plain_two_step"] = two_step_values
    return current, log
