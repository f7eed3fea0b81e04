"""Synthetic gold-standard networks and noisy observation matrices.

Generators for sparse bipartite networks with Poisson (Erdos-Renyi style)
or power-law out-degree distributions, plus the forward model that turns a
network into a data matrix: standard-uniform hidden activities times the
weighted adjacency, with optional additive Gaussian noise scaled to a
fraction of the noiseless signal spread. Everything is a pure function of
its parameters and seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WEIGHT_FLOOR = 0.2
DEGREE_RTOL = 0.15  # realized mean out-degree must land within 15%
_MAX_TRIES = 50


class GenerationError(RuntimeError):
    """Requested network parameters could not be realized."""


@dataclass(frozen=True)
class NetworkModel:
    """Gold-standard weighted bipartite network.

    edges holds (regulator, target, weight) triples with 0-based indices;
    every regulator has at least one target, every target at least one
    regulator, and no weight magnitude falls below WEIGHT_FLOOR.
    """

    n_observed: int
    n_hidden: int
    edges: tuple[tuple[int, int, float], ...]
    topology: str
    mean_out_degree: float
    seed: int

    def to_dense(self) -> np.ndarray:
        c = np.zeros((self.n_hidden, self.n_observed))
        for reg, tgt, w in self.edges:
            c[reg, tgt] = w
        return c

    @property
    def realized_mean_out_degree(self) -> float:
        return len(self.edges) / self.n_hidden

    def supports(self) -> tuple[frozenset[int], ...]:
        sets: list[set[int]] = [set() for _ in range(self.n_hidden)]
        for reg, tgt, _ in self.edges:
            sets[reg].add(tgt)
        return tuple(frozenset(s) for s in sets)


@dataclass(frozen=True, eq=False)
class SimulatedDataset:
    """Observation matrix with the gold activities that produced it."""

    g: np.ndarray
    r_gold: np.ndarray
    noise_level: float
    seed: int


def _draw_weights(rng: np.random.Generator, count: int) -> np.ndarray:
    mags = rng.uniform(WEIGHT_FLOOR, 1.0, size=count)
    signs = rng.integers(0, 2, size=count) * 2 - 1
    return mags * signs


def _finish_network(
    rng: np.random.Generator,
    pairs: set[tuple[int, int]],
    n: int,
    p: int,
    topology: str,
    mean_out_degree: float,
    seed: int,
) -> NetworkModel | None:
    """Repair empty rows/columns, check the degree tolerance, attach
    weights. Returns None when the realized mean degree is out of band."""
    covered_regs = {reg for reg, _ in pairs}
    for reg in range(p):
        if reg not in covered_regs:
            pairs.add((reg, int(rng.integers(n))))
    covered_tgts = {tgt for _, tgt in pairs}
    for tgt in range(n):
        if tgt not in covered_tgts:
            pairs.add((int(rng.integers(p)), tgt))

    realized = len(pairs) / p
    if abs(realized - mean_out_degree) > DEGREE_RTOL * mean_out_degree:
        return None
    ordered = sorted(pairs)
    weights = _draw_weights(rng, len(ordered))
    edges = tuple(
        (reg, tgt, float(w)) for (reg, tgt), w in zip(ordered, weights)
    )
    return NetworkModel(
        n_observed=n,
        n_hidden=p,
        edges=edges,
        topology=topology,
        mean_out_degree=float(mean_out_degree),
        seed=seed,
    )


def gen_poisson_network(
    n: int, p: int, mean_out_degree: float, seed: int
) -> NetworkModel:
    """Erdos-Renyi bipartite network: every (regulator, target) edge is
    present independently with probability mean_out_degree / n."""
    if p < 1:
        raise ValueError("need at least one regulator")
    if not 1 <= mean_out_degree <= n:
        raise ValueError(f"mean_out_degree must be in [1, {n}], got {mean_out_degree}")
    rng = np.random.default_rng(seed)
    prob = mean_out_degree / n
    for _ in range(_MAX_TRIES):
        mask = rng.random((p, n)) < prob
        pairs = {(int(i), int(j)) for i, j in np.argwhere(mask)}
        net = _finish_network(rng, pairs, n, p, "poisson", mean_out_degree, seed)
        if net is not None:
            return net
    raise GenerationError(
        f"could not hit mean out-degree {mean_out_degree} within "
        f"{DEGREE_RTOL:.0%} in {_MAX_TRIES} tries"
    )


def _powerlaw_min_degree(n: int, mean_out_degree: float, gamma: float) -> int:
    """Smallest degree cutoff whose truncated power law matches the
    requested mean most closely."""
    degrees = np.arange(1, n + 1, dtype=float)
    weights = degrees ** -gamma
    # suffix sums: support [d_min, n]
    s0 = np.cumsum(weights[::-1])[::-1]
    s1 = np.cumsum((weights * degrees)[::-1])[::-1]
    means = s1 / s0
    best = int(np.argmin(np.abs(means - mean_out_degree)))
    if abs(means[best] - mean_out_degree) > DEGREE_RTOL * mean_out_degree:
        raise GenerationError(
            f"no degree cutoff realizes mean out-degree {mean_out_degree} "
            f"for gamma={gamma}, n={n}"
        )
    return best + 1


def gen_powerlaw_network(
    n: int, p: int, mean_out_degree: float, gamma: float, seed: int
) -> NetworkModel:
    """Scale-free out-degrees: regulator degrees follow a discrete power
    law on [d_min, n] with d_min chosen to match the requested mean;
    targets are drawn uniformly without replacement."""
    if p < 1:
        raise ValueError("need at least one regulator")
    if not 1 <= mean_out_degree <= n:
        raise ValueError(f"mean_out_degree must be in [1, {n}], got {mean_out_degree}")
    if gamma <= 1:
        raise ValueError("gamma must exceed 1")
    d_min = _powerlaw_min_degree(n, mean_out_degree, gamma)
    support = np.arange(d_min, n + 1)
    pmf = support.astype(float) ** -gamma
    pmf /= pmf.sum()
    rng = np.random.default_rng(seed)
    topology = f"powerlaw({gamma:g})"
    for _ in range(_MAX_TRIES):
        degrees = rng.choice(support, size=p, p=pmf)
        pairs: set[tuple[int, int]] = set()
        for reg in range(p):
            targets = rng.choice(n, size=int(degrees[reg]), replace=False)
            pairs.update((reg, int(t)) for t in targets)
        net = _finish_network(rng, pairs, n, p, topology, mean_out_degree, seed)
        if net is not None:
            return net
    raise GenerationError(
        f"could not hit mean out-degree {mean_out_degree} within "
        f"{DEGREE_RTOL:.0%} in {_MAX_TRIES} tries"
    )


def simulate_data(
    net: NetworkModel, m: int, noise_level: float, seed: int
) -> SimulatedDataset:
    """Observation matrix: standard-uniform activities times the adjacency,
    plus Gaussian noise with standard deviation ``noise_level`` times the
    entry-wise spread of the noiseless product. Zero noise reproduces the
    product bit-exactly."""
    if m < 1:
        raise ValueError("need at least one observation")
    if not 0 <= noise_level < 1:
        raise ValueError("noise_level must be in [0, 1)")
    rng = np.random.default_rng(seed)
    r_gold = rng.random((m, net.n_hidden))
    clean = r_gold @ net.to_dense()
    if noise_level == 0.0:
        g = clean
    else:
        scale = noise_level * clean.std()
        g = clean + scale * rng.standard_normal(clean.shape)
    return SimulatedDataset(g=g, r_gold=r_gold, noise_level=float(noise_level), seed=seed)
