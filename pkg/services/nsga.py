"""NSGA-II machinery over rule-set solutions"""
import functools
import math
from dataclasses import dataclass

import numpy as np

from services.hybrid import Solution
from services.metrics import dominates
from utils.errors import StateError

CROSSOVER_INCLUDE = 0.5
MUTATION_KEEP = 0.9


@dataclass
class RankedPopulation:
    """Solutions with their objective points, front index and crowding distance"""
    solutions: list
    points: list
    front: list
    distance: list

    def __len__(self):
        return len(self.solutions)


def fast_nondominated_sort(points):
    """Partition point indices into successive nondominated fronts"""
    points = [tuple(p) for p in points]
    n = len(points)
    dominated_by = [[] for _ in range(n)]
    counts = [0] * n

    for i in range(n):
        for j in range(i + 1, n):
            if dominates(points[i], points[j]):
                dominated_by[i].append(j)
                counts[j] += 1
            elif dominates(points[j], points[i]):
                dominated_by[j].append(i)
                counts[i] += 1

    fronts = [[i for i in range(n) if counts[i] == 0]]
    while fronts[-1]:
        nxt = []
        for i in fronts[-1]:
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(j)
        fronts.append(sorted(nxt))
    fronts.pop()
    return fronts


def crowding_distance(points):
    """Crowding distance of every point within one front

    Boundary points in each objective are infinite. Copies of a duplicated
    interior point get 0 so duplicates never look isolated.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(points)
    if n == 0:
        raise ValueError("front must be non-empty")
    if n <= 2:
        return np.full(n, math.inf)

    unique, inverse, counts = np.unique(points, axis=0, return_inverse=True, return_counts=True)
    inverse = np.asarray(inverse).reshape(-1)
    m = len(unique)
    if m <= 2:
        return np.full(n, math.inf)

    distance = np.zeros(m)
    for objective in range(unique.shape[1]):
        order = np.argsort(unique[:, objective], kind='stable')
        values = unique[order, objective]
        distance[order[0]] = distance[order[-1]] = math.inf
        spread = values[-1] - values[0]
        if spread == 0:
            continue
        distance[order[1:-1]] += (values[2:] - values[:-2]) / spread

    distance[(counts > 1) & np.isfinite(distance)] = 0.0
    return distance[inverse]


def rank_population(solutions, points):
    """Sort into fronts and assign crowding distances"""
    n = len(solutions)
    front = [0] * n
    distance = [0.0] * n
    for k, members in enumerate(fast_nondominated_sort(points), start=1):
        member_distance = crowding_distance([points[i] for i in members])
        for i, d in zip(members, member_distance):
            front[i] = k
            distance[i] = float(d)
    return RankedPopulation(list(solutions), [tuple(p) for p in points], front, distance)


def crowded_compare(ranked, a, b):
    """Negative if solution a is preferred over b, positive otherwise"""
    if ranked is None or not ranked.front or min(ranked.front[a], ranked.front[b]) < 1:
        raise StateError("Solutions must be ranked before comparison")
    if ranked.front[a] != ranked.front[b]:
        return -1 if ranked.front[a] < ranked.front[b] else 1
    if ranked.distance[a] != ranked.distance[b]:
        return -1 if ranked.distance[a] > ranked.distance[b] else 1
    if a == b:
        return 0
    return -1 if a < b else 1


def crowded_order(ranked, indices):
    """Indices sorted best-first by the crowded comparison"""
    return sorted(indices, key=functools.cmp_to_key(lambda a, b: crowded_compare(ranked, a, b)))


def tournament_index(ranked, rng):
    """Binary tournament (with replacement); returns the winner's index"""
    if len(ranked) == 0:
        raise ValueError("population must be non-empty")
    a, b = (int(i) for i in rng.integers(0, len(ranked), size=2))
    return a if crowded_compare(ranked, a, b) <= 0 else b


def tournament_select(ranked, rng):
    """Binary tournament winner"""
    return ranked.solutions[tournament_index(ranked, rng)]


def _cross_sign(first, second, rng, include):
    union = sorted(first | second)
    if not union:
        return frozenset()
    keep = rng.random(len(union)) < include
    return frozenset(r for r, k in zip(union, keep) if k)


def crossover(p1, p2, rng, include=CROSSOVER_INCLUDE):
    """Each distinct parent rule joins the child with probability `include`"""
    return Solution(
        pos=_cross_sign(p1.pos, p2.pos, rng, include),
        neg=_cross_sign(p1.neg, p2.neg, rng, include),
    )


def _draw_absent(current, pool_size, count, rng):
    absent = [r for r in range(pool_size) if r not in current]
    if count <= 0 or not absent:
        return frozenset()
    return frozenset(int(r) for r in rng.choice(absent, size=min(count, len(absent)), replace=False))


def mutate(child, pools, avg_parent_len, rng, keep=MUTATION_KEEP, n_new=None):
    """Drop each rule with probability 1 - keep, then add n new pool rules

    n ~ Uniform{1..ceil(avg_parent_len)} unless `n_new` is given; new rules
    are split evenly between signs with the odd one going to a random sign,
    and a sign with too few absent rules hands its share to the other.
    """
    def thin(rules):
        ordered = sorted(rules)
        if not ordered:
            return frozenset()
        survive = rng.random(len(ordered)) < keep
        return frozenset(r for r, s in zip(ordered, survive) if s)

    pos, neg = thin(child.pos), thin(child.neg)

    if n_new is None:
        upper = max(1, math.ceil(avg_parent_len))
        n_new = int(rng.integers(1, upper + 1))

    n_pos = n_neg = n_new // 2
    if n_new % 2:
        if rng.random() < 0.5:
            n_pos += 1
        else:
            n_neg += 1

    free_pos = len(pools.positive) - len(pos)
    free_neg = len(pools.negative) - len(neg)
    if n_pos > free_pos:
        n_neg += n_pos - free_pos
        n_pos = free_pos
    if n_neg > free_neg:
        n_pos = min(free_pos, n_pos + n_neg - free_neg)
        n_neg = free_neg

    pos = pos | _draw_absent(pos, len(pools.positive), n_pos, rng)
    neg = neg | _draw_absent(neg, len(pools.negative), n_neg, rng)
    return Solution(pos=pos, neg=neg)


def average_parent_length(p1, p2):
    return max(1, math.ceil((p1.n_rules + p2.n_rules) / 2))


def produce_offsprings(ranked, pools, count, rng, keep=MUTATION_KEEP, include=CROSSOVER_INCLUDE):
    """Tournament selection, crossover and mutation, `count` times

    With `ranked.front` empty (no fitness yet) parents are drawn uniformly.
    """
    if count < 1:
        raise ValueError("offspring count must be at least 1")

    def select():
        if not ranked.front:
            return int(rng.integers(0, len(ranked)))
        return tournament_index(ranked, rng)

    children = []
    for _ in range(count):
        p1 = ranked.solutions[select()]
        p2 = ranked.solutions[select()]
        child = crossover(p1, p2, rng, include=include)
        children.append(mutate(child, pools, average_parent_length(p1, p2), rng, keep=keep))
    return children
