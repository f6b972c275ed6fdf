"""The active NSGA-II main loop"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from marshmallow import Schema, fields, validate, validates_schema, ValidationError

from config import get_config
from services.active import Combine, QueryState, query_labels
from services.hybrid import Solution, predict_batch
from services.metrics import BiasMetric, ObjectivePoint, evaluate, hypervolume, pareto_front
from services.nsga import RankedPopulation, crowded_order, produce_offsprings, rank_population
from services.rulemine import induce_candidates, rule_coverage
from utils.errors import ConfigurationError, StateError, UndefinedBiasError
from utils.io import write_json_lines

logger = logging.getLogger(__name__)

TELEMETRY_FIELDS = ('gen', 'q_size', 'front1_size', 'hypervolume', 'acquired')


# Input validation schema for run configuration
class RunConfigSchema(Schema):
    population_size = fields.Integer(validate=validate.Range(min=2))
    budget = fields.Integer(allow_none=True, validate=validate.Range(min=1))
    budget_fraction = fields.Float(allow_none=True, validate=validate.Range(min=0, max=1, min_inclusive=False))
    batch_size = fields.Integer(allow_none=True, validate=validate.Range(min=1))
    query_interval = fields.Integer(validate=validate.Range(min=1))
    min_support = fields.Float(validate=validate.Range(min=0, max=1, min_inclusive=False))
    max_len = fields.Integer(validate=validate.Range(min=1))
    min_precision = fields.Float(validate=validate.Range(min=0))
    max_pool = fields.Integer(validate=validate.Range(min=1))
    max_init_rules = fields.Integer(validate=validate.Range(min=1))
    post_budget_generations = fields.Integer(validate=validate.Range(min=0))
    seed = fields.Integer()
    bias_metric = fields.String(validate=validate.OneOf([m.value for m in BiasMetric]))
    smoothing = fields.Boolean()
    nboot = fields.Integer(validate=validate.Range(min=1))
    uncertainty_combine = fields.String(validate=validate.OneOf([c.value for c in Combine]))
    per_class_support = fields.Boolean()

    @validates_schema
    def check_population(self, data, **kwargs):
        if data.get('population_size', 2) % 2:
            raise ValidationError("population_size must be even", 'population_size')


@dataclass(frozen=True)
class RunConfig:
    population_size: int = 50
    budget: Optional[int] = None
    budget_fraction: Optional[float] = None
    batch_size: Optional[int] = None
    query_interval: int = 2
    min_support: float = 0.05
    max_len: int = 3
    min_precision: float = 0.7
    max_pool: int = 150
    max_init_rules: int = 5
    post_budget_generations: int = 0
    seed: int = 0
    bias_metric: str = BiasMetric.EQUAL_OPPORTUNITY.value
    smoothing: bool = True
    nboot: int = 10
    uncertainty_combine: str = Combine.MEAN.value
    per_class_support: bool = True

    @classmethod
    def build(cls, overrides=None, config=None):
        """Defaults from the environment configuration, then explicit overrides"""
        config = config or get_config()
        merged = {
            'population_size': config.POPULATION_SIZE,
            'query_interval': config.QUERY_INTERVAL,
            'min_support': config.MIN_SUPPORT,
            'max_len': config.MAX_LEN,
            'min_precision': config.MIN_PRECISION,
            'max_pool': config.MAX_POOL,
            'max_init_rules': config.MAX_INIT_RULES,
            'post_budget_generations': config.POST_BUDGET_GENERATIONS,
            'bias_metric': config.BIAS_METRIC,
            'smoothing': config.SMOOTHING,
            'nboot': config.NBOOT,
            'uncertainty_combine': config.UNCERTAINTY_COMBINE,
            'per_class_support': config.PER_CLASS_SUPPORT,
        }
        merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
        try:
            data = RunConfigSchema().load(merged)
        except ValidationError as err:
            raise ConfigurationError(f"Invalid run configuration: {err.messages}") from err
        return cls(**data)

    def resolve_budget(self, n):
        """Budget B (capped at n) and batch size b for a training set of n instances"""
        if (self.budget is None) == (self.budget_fraction is None):
            raise ConfigurationError("Set exactly one of budget or budget_fraction")
        if n < 1:
            raise ConfigurationError("Training set is empty")

        if self.budget is not None:
            budget = self.budget
        else:
            budget = max(1, math.ceil(self.budget_fraction * n - 1e-9))
        budget = min(budget, n)

        batch = self.batch_size or math.ceil(budget / 10)
        if batch > budget:
            logger.warning("Batch size %d exceeds budget %d; using %d", batch, budget, budget)
            batch = budget
        return budget, batch

    def to_document(self):
        return asdict(self)


@dataclass
class RunResult:
    """Final frontier with its training fitness, acquisitions and telemetry"""
    frontier: list
    train_points: list
    state: QueryState
    pools: object
    telemetry: list = field(default_factory=list)
    budget: int = 0
    batch_size: int = 0


class Evaluator:
    """Fitness on acquired labels, cached until Q grows"""

    def __init__(self, dataset, pools, state, metric=BiasMetric.EQUAL_OPPORTUNITY, smoothing=True):
        self.pos_cov, self.neg_cov = rule_coverage(pools, dataset.bits)
        self.h_label = np.asarray(dataset.h_label, dtype=np.int8)
        self.z = np.asarray(dataset.z, dtype=np.int8)
        self.state = state
        self.metric = BiasMetric(metric)
        self.smoothing = smoothing
        self._cache = {}
        self._version = None

    def _refresh(self):
        if self._version == self.state.size:
            return
        q = self.state.q
        self._q_pos = self.pos_cov[q]
        self._q_neg = self.neg_cov[q]
        self._q_h = self.h_label[q]
        self._q_z = self.z[q]
        self._q_y = self.state.y_q
        self._cache = {}
        self._version = self.state.size

    def evaluate(self, solution):
        self._refresh()
        key = solution.key
        if key not in self._cache:
            labels, _ = predict_batch(solution, self._q_pos, self._q_neg, self._q_h)
            self._cache[key] = evaluate(labels, self._q_y, self._q_z, self.metric, self.smoothing)
        return self._cache[key]

    def evaluate_all(self, solutions):
        return [self.evaluate(s) for s in solutions]


def initialize_population(pools, size, rng, max_rules=5):
    """One empty solution (pure h) plus size - 1 random rule sets"""
    if size < 2:
        raise ValueError("population size must be at least 2")

    def draw(pool_size):
        k = min(int(rng.integers(1, max_rules + 1)), pool_size)
        return rng.choice(pool_size, size=k, replace=False) if k else []

    population = [Solution()]
    for _ in range(size - 1):
        population.append(Solution.of(pos=draw(len(pools.positive)), neg=draw(len(pools.negative))))
    return population


def environmental_selection(ranked, size):
    """Fill the next parent population front by front, truncating by crowding"""
    fronts = {}
    for i, k in enumerate(ranked.front):
        fronts.setdefault(k, []).append(i)

    selected = []
    for k in sorted(fronts):
        members = fronts[k]
        if len(selected) + len(members) <= size:
            selected.extend(members)
        else:
            selected.extend(crowded_order(ranked, members)[:size - len(selected)])
        if len(selected) >= size:
            break
    return selected


def _front1(ranked):
    return [i for i, k in enumerate(ranked.front) if k == 1]


def _dedupe(indices, solutions):
    seen = set()
    unique = []
    for i in indices:
        key = solutions[i].key
        if key not in seen:
            seen.add(key)
            unique.append(i)
    return unique


def run(dataset, oracle, config, pools=None):
    """Search for a Pareto set of hybrid models under a label budget

    `dataset.h_label` carries the decision-maker's outputs on the training
    instances; `oracle` reveals true labels for the same instances.
    """
    if dataset.h_label is None:
        raise ConfigurationError("Dataset needs black-box labels")

    rng = np.random.default_rng(config.seed)
    budget, batch = config.resolve_budget(dataset.n)
    if pools is None:
        pools = induce_candidates(
            dataset, config.min_support, config.max_len, config.min_precision,
            config.max_pool, per_class_support=config.per_class_support,
        )

    state = QueryState(budget=budget, batch_size=batch)
    evaluator = Evaluator(dataset, pools, state, config.bias_metric, config.smoothing)
    size = config.population_size
    logger.info("Starting search: N=%d, B=%d, b=%d, tau=%d", size, budget, batch, config.query_interval)

    parents = initialize_population(pools, size, rng, config.max_init_rules)
    offspring = produce_offsprings(RankedPopulation(parents, [], [], []), pools, size, rng)

    # counter starts at tau so labels exist before the first fitness-based selection
    counter = config.query_interval
    extra = config.post_budget_generations
    telemetry = []
    gen = 0
    ranked_parents = None

    while state.size < budget or extra > 0:
        if state.size >= budget:
            extra -= 1
        combined = parents + offspring

        acquired = False
        if counter >= config.query_interval and state.remaining > 0:
            counter = 0
            if state.size == 0:
                committee = combined
            else:
                ranked = rank_population(combined, evaluator.evaluate_all(combined))
                committee = [combined[i] for i in _front1(ranked)]
            query_labels(
                committee, evaluator.pos_cov, evaluator.neg_cov, evaluator.h_label, state, oracle, rng,
                iteration=gen, nboot=config.nboot, combine=config.uncertainty_combine,
            )
            acquired = True
        if state.size == 0:
            raise StateError("No labels acquired before ranking")

        points = evaluator.evaluate_all(combined)
        ranked = rank_population(combined, points)
        front1 = _front1(ranked)
        selected = environmental_selection(ranked, size)
        parents = [combined[i] for i in selected]
        ranked_parents = rank_population(parents, [points[i] for i in selected])
        offspring = produce_offsprings(ranked_parents, pools, size, rng)

        record = {
            'gen': gen,
            'q_size': state.size,
            'front1_size': len(front1),
            'hypervolume': hypervolume([points[i] for i in front1]),
            'acquired': acquired,
            'population_points': [tuple(p) for p in points],
        }
        telemetry.append(record)
        logger.debug("gen=%d |Q|=%d front1=%d hv=%.4f", gen, state.size, len(front1), record['hypervolume'])

        counter += 1
        gen += 1

    # final fitness uses the complete Q
    final_points = evaluator.evaluate_all(parents)
    ranked_parents = rank_population(parents, final_points)
    keep = _dedupe(_front1(ranked_parents), parents)
    logger.info("Search finished after %d generations; |F*|=%d, |Q|=%d", gen, len(keep), state.size)

    return RunResult(
        frontier=[parents[i] for i in keep],
        train_points=[final_points[i] for i in keep],
        state=state,
        pools=pools,
        telemetry=telemetry,
        budget=budget,
        batch_size=batch,
    )


def evaluate_labels(labels, dataset, metric=BiasMetric.EQUAL_OPPORTUNITY):
    """Unsmoothed (error, bias) of predictions on a fully labeled dataset, smoothed if a group lacks positives"""
    try:
        return evaluate(labels, dataset.y, dataset.z, metric, smoothing=False)
    except UndefinedBiasError:
        logger.warning("A group has no labeled positives; using smoothed bias")
        return evaluate(labels, dataset.y, dataset.z, metric, smoothing=True)


def evaluate_on(solutions, pools, dataset, metric=BiasMetric.EQUAL_OPPORTUNITY):
    """Held-out (error, bias) of every solution"""
    pos_cov, neg_cov = rule_coverage(pools, dataset.bits)
    return [
        evaluate_labels(predict_batch(solution, pos_cov, neg_cov, dataset.h_label)[0], dataset, metric)
        for solution in solutions
    ]


def select_frontier_on_validation(frontier, pools, validation, metric=BiasMetric.EQUAL_OPPORTUNITY):
    """Indices of the frontier solutions that are Pareto-optimal on validation, plus all validation points"""
    if not frontier:
        raise StateError("Cannot select from an empty frontier")
    points = evaluate_on(frontier, pools, validation, metric)
    return pareto_front(points), points


def export_telemetry(result, path):
    """One JSON line per generation"""
    write_json_lines(path, ({k: record[k] for k in TELEMETRY_FIELDS} for record in result.telemetry))
