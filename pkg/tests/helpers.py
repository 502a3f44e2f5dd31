"""Shared schedule builders and small oracles for the test suite."""

import numpy as np

from consensuslab import WeightSchedule


def weights(n, *edges):
    """Dense symmetric weight matrix from (i, j, w) triples, 0-based."""
    w = np.zeros((n, n))
    for i, j, val in edges:
        w[i, j] = w[j, i] = val
    return w


def k2_schedule(weight=1.0, horizon=10.0):
    return WeightSchedule([(0.0, horizon, weights(2, (0, 1, weight)))])


def k3_schedule(horizon=10.0):
    w = np.ones((3, 3)) - np.eye(3)
    return WeightSchedule([(0.0, horizon, w)])


def p3_schedule(horizon=10.0):
    return WeightSchedule([(0.0, horizon, weights(3, (0, 1, 1.0), (1, 2, 1.0)))])


def empty_schedule(n=3, horizon=10.0):
    return WeightSchedule([(0.0, horizon, np.zeros((n, n)))])


def alternating_schedule():
    """Edge {1,2} on [2k, 2k+1), edge {2,3} on [2k+1, 2k+2), unit weights."""
    return WeightSchedule(
        [
            (0.0, 1.0, weights(3, (0, 1, 1.0))),
            (1.0, 2.0, weights(3, (1, 2, 1.0))),
        ],
        periodic=True,
    )


def five_node_schedule():
    """Period-2 switching whose union over one period is the path 1-2-3-4-5."""
    return WeightSchedule(
        [
            (0.0, 1.0, weights(5, (0, 1, 1.0), (2, 3, 1.0))),
            (1.0, 2.0, weights(5, (1, 2, 1.0), (3, 4, 1.0))),
        ],
        periodic=True,
    )


def isolated_schedule(horizon=100.0):
    """Node 3 never linked: edge {1,2} only."""
    return WeightSchedule([(0.0, horizon, weights(3, (0, 1, 1.0)))])


def signed_triangle_symmetric(horizon=60.0):
    """a_12 = a_13 = 1, a_23 = -0.4; Laplacian eigenvalues {0, 0.2, 3}."""
    return WeightSchedule(
        [(0.0, horizon, weights(3, (0, 1, 1.0), (0, 2, 1.0), (1, 2, -0.4)))]
    )


def signed_triangle_adversarial(horizon=60.0):
    """a_12 = 3.8, a_13 = 0.6, a_23 = -0.4; eigenvalues {0, 0.2, 7.8}.

    Unlike the symmetric variant, this PSD signed triangle admits initial
    states whose max-min spread transiently grows.
    """
    return WeightSchedule(
        [(0.0, horizon, weights(3, (0, 1, 3.8), (0, 2, 0.6), (1, 2, -0.4)))]
    )


def random_weights(rng, n, bound=1.0, density=0.6):
    """Random nonnegative symmetric weight matrix with zero diagonal."""
    w = rng.uniform(0.0, bound, size=(n, n))
    mask = rng.random((n, n)) < density
    w = np.triu(w * mask, 1)
    return w + w.T

def random_periodic_schedule(rng, n=None, segments=2, bound=1.0, density=0.5,
                             isolate_node=False):
    """Seeded periodic schedule; optionally keeps node 0 isolated throughout."""
    if n is None:
        n = int(rng.integers(3, 7))
    segs = []
    for k in range(segments):
        w = random_weights(rng, n, bound=bound, density=density)
        if isolate_node:
            w[0, :] = 0.0
            w[:, 0] = 0.0
        segs.append((float(k), float(k + 1), w))
    return WeightSchedule(segs, periodic=True, weight_bound=bound)


def union_find_connected(n, weight_matrix, threshold=0.0):
    """Independent connectivity oracle on edges with weight > threshold."""
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            if weight_matrix[i, j] > threshold:
                parent[find(i)] = find(j)
    return len({find(v) for v in range(n)}) == 1
