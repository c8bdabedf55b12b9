"""Experiment drivers: rotation protocols, routing invariance suites, scaling bench, sign modes.

Every driver is a pure function of its dataset seed and config seed. Per
instance randomness is split from the root with ``SeedSequence.spawn`` so the
result of instance ``i`` does not depend on how many others ran first.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._validation import check_int, check_points
from .embed import select_sign, tinv_embed
from .exceptions import ConfigurationError, InvalidInputError
from .geometry import (
    SHAPE_KINDS,
    CvrpInstance,
    PointCloud,
    Rotation,
    generate_cvrp_instance,
    generate_shape,
    generate_tsp_instance,
    pairwise_distances,
    random_transform,
    uniform_rotation_matrix,
    z_rotation,
)
from .neuralnet import CloudDataset, TrainConfig, predict, prepare_samples, train_classifier

ROUTING_SETTINGS = ("none", "translation", "rotation", "reflection", "scaling")
ROTATION_KINDS = ("none", "z_rotation", "so3_rotation")


# --------------------------------------------------------------------------
# classification protocols


@dataclass(frozen=True)
class Protocol:
    train_transform: str
    test_transform: str

    def __post_init__(self):
        for t in (self.train_transform, self.test_transform):
            if t not in ROTATION_KINDS:
                raise ConfigurationError(f"unknown protocol transform {t!r}")

    @property
    def name(self):
        short = {"none": "none", "z_rotation": "z", "so3_rotation": "SO3"}
        return f"{short[self.train_transform]}/{short[self.test_transform]}"


PROTOCOLS = {
    "z/z": Protocol("z_rotation", "z_rotation"),
    "SO3/SO3": Protocol("so3_rotation", "so3_rotation"),
    "z/SO3": Protocol("z_rotation", "so3_rotation"),
}


def get_protocol(protocol):
    if isinstance(protocol, Protocol):
        return protocol
    try:
        return PROTOCOLS[protocol]
    except KeyError:
        raise ConfigurationError(f"unknown protocol {protocol!r}; choose from {sorted(PROTOCOLS)}") from None


def make_classification_dataset(n_train=300, n_test=100, n_points=64, noise_sigma=0.02, n_classes=4, seed=0,
                                kinds=None):
    """Balanced synthetic shape clouds; cloud ``i`` has label ``i % n_classes``.

    ``kinds`` picks the shapes (default: the first ``n_classes`` of
    ``SHAPE_KINDS``); labels index into it.
    """
    if kinds is None:
        n_classes = check_int(n_classes, "n_classes", low=2, high=len(SHAPE_KINDS))
        kinds = SHAPE_KINDS[:n_classes]
    kinds = tuple(kinds)
    if len(kinds) < 2 or len(set(kinds)) != len(kinds):
        raise ConfigurationError("need at least two distinct shape kinds")
    total = check_int(n_train, "n_train", low=1) + check_int(n_test, "n_test", low=0)
    seeds = np.random.SeedSequence(seed).spawn(total)
    clouds = []
    for i in range(total):
        c = generate_shape(kinds[i % len(kinds)], n_points, noise_sigma, seeds[i])
        clouds.append(replace(c, cloud_label=i % len(kinds)))
    return CloudDataset(clouds[:n_train], clouds[n_train:])


def rotate_clouds(clouds, kind, seed):
    """Rotate each cloud about the origin once, with per-cloud seeds."""
    if kind == "none":
        return list(clouds)
    seeds = np.random.SeedSequence(seed).spawn(len(clouds))
    out = []
    for c, s in zip(clouds, seeds):
        rng = np.random.default_rng(s)
        R = z_rotation(rng.uniform(0, 2 * np.pi)) if kind == "z_rotation" else uniform_rotation_matrix(3, rng)
        out.append(Rotation(R).apply(c))
    return out


@dataclass
class ClassificationResult:
    protocol: str
    embed_mode: str
    accuracy: float
    predictions: np.ndarray
    model: object = None
    log: object = None
    train_size: int = 0


def _train_seed(config):
    return [int(config.rng_seed), 104729]


def _test_seed(config):
    return [int(config.rng_seed), 7919]


def run_classification_protocol(dataset, protocol, embed_mode="tinv", config=None):
    """Train on rotated training clouds and score on rotated test clouds, as the protocol says.

    Each cloud is rotated once with its own seed. ``config.augmentation`` may
    be ``none`` or ``sign_enumeration``; rotations come from the protocol.
    """
    protocol = get_protocol(protocol)
    config = TrainConfig() if config is None else config
    if config.augmentation not in ("none", "sign_enumeration"):
        raise ConfigurationError("rotation augmentation is set by the protocol, not the config")
    cfg = replace(config, embed_mode=embed_mode)
    train = rotate_clouds(dataset.train, protocol.train_transform, _train_seed(config))
    model, log = train_classifier(CloudDataset(train), cfg)
    test = rotate_clouds(dataset.test, protocol.test_transform, _test_seed(config))
    pred = predict(model, test)
    labels = np.array([c.cloud_label for c in dataset.test])
    acc = float(np.mean(pred == labels)) if len(labels) else float("nan")
    train_size = len(prepare_samples(train, embed_mode, cfg.augmentation, cfg.k_neighbors)[0])
    return ClassificationResult(protocol.name, embed_mode, acc, pred, model, log, train_size)


def compare_sign_modes(dataset, protocol, config=None):
    """Canonical-sign training against sign-enumeration augmentation, invariant features only.

    Each trained model is also evaluated on the unrotated, z-rotated and
    SO(3)-rotated test sets; ``invariant`` records whether all three gave the
    same predictions.
    """
    config = TrainConfig() if config is None else config
    out = {}
    for mode, aug in (("canonical", "none"), ("enumeration", "sign_enumeration")):
        res = run_classification_protocol(dataset, protocol, "tinv", replace(config, augmentation=aug))
        preds = [predict(res.model, rotate_clouds(dataset.test, kind, _test_seed(config))) for kind in ROTATION_KINDS]
        out[mode] = {
            "accuracy": res.accuracy,
            "train_size": res.train_size,
            "invariant": all(np.array_equal(preds[0], p) for p in preds[1:]),
            "predictions": res.predictions,
        }
    return out


# --------------------------------------------------------------------------
# tours


@dataclass(frozen=True, eq=False)
class Tour:
    """A TSP order over ``0..N-1`` or CVRP routes over customer indices ``0..N-1``.

    CVRP routes leave out the depot; each implicitly starts and ends there.
    """

    order: Optional[Tuple[int, ...]] = None
    routes: Optional[Tuple[Tuple[int, ...], ...]] = None

    def __post_init__(self):
        if (self.order is None) == (self.routes is None):
            raise InvalidInputError("a tour has either an order or a list of routes")
        if self.order is not None:
            object.__setattr__(self, "order", tuple(int(i) for i in self.order))
        else:
            object.__setattr__(self, "routes", tuple(tuple(int(i) for i in r) for r in self.routes))

    @property
    def is_cvrp(self):
        return self.routes is not None

    def validate(self, n, demands=None, capacity=None):
        if not self.is_cvrp:
            if sorted(self.order) != list(range(n)):
                raise InvalidInputError("tour order is not a permutation of the points")
            return self
        flat = [i for r in self.routes for i in r]
        if sorted(flat) != list(range(n)):
            raise InvalidInputError("every customer must appear in exactly one route")
        if any(len(r) == 0 for r in self.routes):
            raise InvalidInputError("empty route")
        if demands is not None:
            for r in self.routes:
                if float(np.sum(np.asarray(demands)[list(r)])) > capacity + 1e-12:
                    raise InvalidInputError("route exceeds capacity")
        return self

    def canonical(self):
        """Hashable form: TSP up to rotation and direction, CVRP as a set of routes up to direction."""
        if not self.is_cvrp:
            o = list(self.order)
            if not o:
                return ()
            s = o.index(min(o))
            fwd = o[s:] + o[:s]
            rev = [fwd[0]] + fwd[1:][::-1]
            return tuple(min(fwd, rev))
        return frozenset(min(r, r[::-1]) for r in self.routes)

    def same_as(self, other):
        return self.is_cvrp == other.is_cvrp and self.canonical() == other.canonical()


def tour_length(F, tour):
    """Closed TSP tour length, or total CVRP length including depot legs."""
    if isinstance(F, CvrpInstance):
        if not tour.is_cvrp:
            raise InvalidInputError("a CVRP instance needs a multi-route tour")
        tour.validate(F.n, F.demands, F.capacity)
        P = F.points.coords
        total = 0.0
        for r in tour.routes:
            path = np.vstack([F.depot, P[list(r)], F.depot])
            total += float(np.sum(np.linalg.norm(np.diff(path, axis=0), axis=1)))
        return total
    X = check_points(F)
    if tour.is_cvrp:
        raise InvalidInputError("routes need a CvrpInstance for the depot and demands")
    tour.validate(X.shape[0])
    P = X[list(tour.order)]
    return float(np.sum(np.linalg.norm(P - np.roll(P, -1, axis=0), axis=1)))


def _greedy_order(M, start, pick):
    n = M.shape[0]
    visited = np.zeros(n, dtype=bool)
    order = [start]
    visited[start] = True
    cur = start
    for _ in range(n - 1):
        cur = pick(M[cur], visited)
        visited[cur] = True
        order.append(cur)
    return order


def _nearest(row, blocked):
    # argmin returns the first minimum, so ties go to the smaller index
    return int(np.argmin(np.where(blocked, np.inf, row)))


def _best(row, blocked):
    return int(np.argmax(np.where(blocked, -np.inf, row)))


def greedy_tour(features, start=0, precomputed=False):
    """Nearest-unvisited-neighbour tour in feature space (or over a given distance matrix)."""
    if precomputed:
        D = np.asarray(features, dtype=np.float64)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise InvalidInputError("precomputed distances must be square")
    else:
        D = pairwise_distances(features)
    n = D.shape[0]
    if n < 2:
        raise InvalidInputError("a tour needs at least two points")
    start = check_int(start, "start", low=0, high=n - 1)
    return Tour(order=_greedy_order(D, start, _nearest))


def _cvrp_decode(M, instance, pick):
    """Shared CVRP construction over an ``(N+1, N+1)`` matrix; row/column 0 is the depot."""
    demands = instance.demands
    cap = instance.capacity
    if np.any(demands > cap + 1e-12):
        raise InvalidInputError("a single demand exceeds the vehicle capacity")
    n = instance.n
    served = np.zeros(n + 1, dtype=bool)
    served[0] = True
    routes = []
    while not served.all():
        load, cur, route = 0.0, 0, []
        while True:
            blocked = served.copy()
            blocked[1:] |= load + demands > cap + 1e-12
            if blocked.all():
                break
            nxt = pick(M[cur], blocked)
            served[nxt] = True
            load += demands[nxt - 1]
            route.append(nxt - 1)
            cur = nxt
        routes.append(route)
    return Tour(routes=routes)


def greedy_cvrp(instance, features=None):
    """Route construction: extend to the nearest customer that still fits, else go back to the depot.

    ``features`` are ``(N + 1, k)`` rows with the depot first; by default the
    instance's own coordinates.
    """
    H = instance.all_coords() if features is None else check_points(features)
    if H.shape[0] != instance.n + 1:
        raise InvalidInputError("features need one row per customer plus the depot (first)")
    return _cvrp_decode(pairwise_distances(H), instance, _nearest)


# --------------------------------------------------------------------------
# scored decoder


class EdgeScorer:
    """Two-layer MLP scoring edge ``i -> j`` from ``[h_i, h_j, h_j - h_i]``."""

    def __init__(self, in_dim, hidden=16, rng_seed=0):
        rng = np.random.default_rng(rng_seed)
        self.in_dim = check_int(in_dim, "in_dim", low=1)
        self.W1 = rng.normal(0.0, 1.0 / np.sqrt(3 * in_dim), size=(3 * in_dim, hidden))
        self.b1 = rng.normal(0.0, 0.1, size=hidden)
        self.w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=hidden)

    def pairwise(self, H):
        """``(N, N)`` score matrix."""
        H = check_points(H)
        if H.shape[1] != self.in_dim:
            raise ConfigurationError(f"scorer expects {self.in_dim} features, got {H.shape[1]}")
        n, k = H.shape
        # [h_i, h_j, h_j - h_i] @ W1 splits into per-node terms
        A = H @ (self.W1[:k] - self.W1[2 * k:])
        B = H @ (self.W1[k:2 * k] + self.W1[2 * k:])
        Z = np.tanh(A[:, None, :] + B[None, :, :] + self.b1)
        return Z @ self.w2


def pipeline_features(coords, embed_mode):
    if embed_mode == "tinv":
        return select_sign(tinv_embed(coords), "canonical")
    if embed_mode == "raw_coords":
        return check_points(coords)
    raise ConfigurationError(f"unknown embed mode {embed_mode!r}")


def score_model_pipeline(instance, model, embed_mode="tinv"):
    """Embed, score every edge with ``model`` and decode greedily on the scores."""
    if isinstance(instance, CvrpInstance):
        feats = pipeline_features(instance.all_coords(), embed_mode)
        S = model.pairwise(getattr(feats, "H", feats))
        return _cvrp_decode(S, instance, _best)
    feats = pipeline_features(instance, embed_mode)
    S = model.pairwise(getattr(feats, "H", feats))
    return Tour(order=_greedy_order(S, 0, _best))


# --------------------------------------------------------------------------
# routing invariance suite


@dataclass
class InvarianceReport:
    task: str
    embed_mode: str
    n_instances: int
    max_deviation: Dict[str, float] = field(default_factory=dict)
    identity_rate: Dict[str, float] = field(default_factory=dict)
    mean_length: Dict[str, float] = field(default_factory=dict)
    mean_normalized_length: Dict[str, float] = field(default_factory=dict)
    flagged: int = 0

    @property
    def all_identical(self):
        return all(v == 1.0 for v in self.identity_rate.values())

    def rows(self):
        out = []
        for s in self.identity_rate:
            out.append((self.task, s, self.embed_mode, "identity_rate", self.identity_rate[s]))
            out.append((self.task, s, self.embed_mode, "max_normalized_deviation", self.max_deviation[s]))
            out.append((self.task, s, self.embed_mode, "mean_length", self.mean_length[s]))
            out.append((self.task, s, self.embed_mode, "mean_normalized_length", self.mean_normalized_length[s]))
        out.append((self.task, "all", self.embed_mode, "flagged_instances", float(self.flagged)))
        return out


def _instance(task, n, seed):
    if task == "tsp":
        return generate_tsp_instance(n, seed)
    if task == "cvrp":
        return generate_cvrp_instance(n, seed)
    raise ConfigurationError(f"unknown routing task {task!r}")


def _transform_instance(instance, T):
    if isinstance(instance, CvrpInstance):
        return instance.with_all_coords(T.apply(instance.all_coords()))
    return T.apply(instance)


def routing_invariance_suite(task, n, n_instances=1000, embed_mode="tinv", seed=0, settings=ROUTING_SETTINGS,
                             scorer=None, scorer_seed=0):
    """Scored-decoder tours on transformed copies of seeded instances, compared to the untransformed tour.

    Lengths are measured on the transformed coordinates; the normalized
    length divides by the transform's scale factor.
    """
    n = check_int(n, "n", low=2)
    k = 2
    scorer = EdgeScorer(k, rng_seed=scorer_seed) if scorer is None else scorer
    report = InvarianceReport(f"{task}{n}", embed_mode, int(n_instances))
    sums = {s: [0.0, 0.0] for s in settings}
    ident = {s: 0 for s in settings}
    dev = {s: 0.0 for s in settings}
    for i, inst_seed in enumerate(np.random.SeedSequence(seed).spawn(n_instances)):
        inst_ss, tf_ss = inst_seed.spawn(2)
        inst = _instance(task, n, inst_ss)
        base = score_model_pipeline(inst, scorer, embed_mode)
        base_norm = tour_length(inst, base)
        if embed_mode == "tinv":
            coords = inst.all_coords() if isinstance(inst, CvrpInstance) else inst.coords
            E = tinv_embed(coords)
            if E.multiplicity_warning or select_sign(E).is_ambiguous:
                report.flagged += 1
        for s, ts in zip(settings, tf_ss.spawn(len(settings))):
            T = random_transform(ts, s, d=2)
            moved = _transform_instance(inst, T)
            tour = base if s == "none" else score_model_pipeline(moved, scorer, embed_mode)
            length = tour_length(moved, tour)
            norm = length / T.scale_factor
            sums[s][0] += length
            sums[s][1] += norm
            same = tour.same_as(base)
            ident[s] += same
            if same:
                dev[s] = max(dev[s], abs(norm - base_norm) / max(base_norm, 1e-300))
            else:
                dev[s] = max(dev[s], abs(tour_length(inst, tour) - base_norm) / max(base_norm, 1e-300))
    for s in settings:
        report.identity_rate[s] = ident[s] / n_instances
        report.max_deviation[s] = dev[s]
        report.mean_length[s] = sums[s][0] / n_instances
        report.mean_normalized_length[s] = sums[s][1] / n_instances
    return report


# --------------------------------------------------------------------------
# scaling benchmark


@dataclass
class BenchResult:
    sizes: List[int]
    mean_seconds: List[float]
    std_seconds: List[float]
    slope: float
    repeats: int

    def rows(self):
        return list(zip(self.sizes, self.mean_seconds, self.std_seconds))

    def to_gnuplot(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# n,mean_seconds,std_seconds\n")
            for n, m, s in self.rows():
                fh.write(f"{n},{m:.17g},{s:.17g}\n")


def loglog_slope(sizes, times):
    return float(np.polyfit(np.log(np.asarray(sizes, float)), np.log(np.asarray(times, float)), 1)[0])


def bench_scaling(sizes=(128, 256, 512, 1024, 2048, 4096), repeats=10, d=3, seed=0, warmup=True):
    """Mean wall-clock of :func:`tinv_embed` per size and the fitted log-log slope."""
    sizes = [check_int(s, "size", low=64) for s in sizes]
    if sizes != sorted(sizes) or len(set(sizes)) != len(sizes):
        raise ConfigurationError("sizes must be strictly ascending")
    repeats = check_int(repeats, "repeats", low=1)
    rng = np.random.default_rng(seed)
    if warmup:
        tinv_embed(rng.uniform(-1, 1, size=(sizes[0], d)))
    means, stds = [], []
    for n in sizes:
        ts = []
        for _ in range(repeats):
            F = rng.uniform(-10, 10, size=(n, d))
            t0 = time.perf_counter()
            tinv_embed(F)
            ts.append(time.perf_counter() - t0)
        means.append(float(np.mean(ts)))
        stds.append(float(np.std(ts)))
    slope = loglog_slope(sizes, means) if len(sizes) > 1 else float("nan")
    return BenchResult(sizes, means, stds, slope, repeats)


# --------------------------------------------------------------------------
# reports

REPORT_HEADER = ("task", "setting", "embed_mode", "metric", "value")


def write_report_csv(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for task, setting, mode, metric, value in rows:
            w.writerow([task, setting, mode, metric, format(float(value), ".17g")])


def write_report_json(summary, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
