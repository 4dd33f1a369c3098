import numpy as np

from flowmesd import FlowField


def random_flow(rng, height, width, invalid_frac=0.0, scale=3.0, dtype=np.float64):
    u = (rng.standard_normal((height, width)) * scale).astype(dtype)
    v = (rng.standard_normal((height, width)) * scale).astype(dtype)
    valid = rng.random((height, width)) >= invalid_frac
    return FlowField(u, v, valid)


def as_lists(flow):
    """(u, v, valid) as nested Python lists for the loop oracles."""
    return (flow.u.astype(float).tolist(), flow.v.astype(float).tolist(), flow.valid.tolist())


def enough_gradient_samples(flow, other=None, minimum=2):
    valid = flow.valid if other is None else flow.valid & other.valid
    nx = (valid[:, :-1] & valid[:, 1:]).sum()
    ny = (valid[:-1, :] & valid[1:, :]).sum()
    return nx >= minimum and ny >= minimum
