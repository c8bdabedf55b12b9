"""End-to-end acceptance checks; each records one PASS/FAIL line shown in the pytest summary."""

import time

import numpy as np
import pytest

from invmds.embed import (
    InvariantEmbedding,
    canonical_sign,
    classical_mds,
    match_up_to_sign,
    sign_variants,
    tinv_embed,
    verify_distance_preservation,
)
from invmds.geometry import knn_graph, pairwise_distances, random_transform
from invmds.linalg import double_center, sym_eig_topk
from invmds.neuralnet import GraphBatch, TrainConfig, forward_full, init_model, loss_and_grads
from invmds.tasks import (
    PROTOCOLS,
    bench_scaling,
    compare_sign_modes,
    make_classification_dataset,
    routing_invariance_suite,
    run_classification_protocol,
)

from conftest import ACCEPTANCE_LINES

SETTINGS = ("none", "translation", "rotation", "reflection", "scaling")


def record(number, title, ok, detail):
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} | {detail}")
    assert ok, detail


def random_cloud(rng, sizes=(8, 64, 256), dims=(2, 3)):
    n = int(rng.choice(sizes))
    d = int(rng.choice(dims))
    return rng.uniform(-10, 10, size=(n, d))


def lapack_top(F):
    """Independent reference for the top eigenvalue: explicit J matrix and LAPACK."""
    D = np.sqrt(((F[:, None, :] - F[None, :, :]) ** 2).sum(-1))
    n = F.shape[0]
    J = np.eye(n) - 1.0 / n
    return np.linalg.eigvalsh(-0.5 * J @ (D * D) @ J)[::-1]


def test_1_distance_preservation():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst_err = worst_c = 0.0
    for _ in range(1000):
        F = random_cloud(rng)
        E = tinv_embed(F, k=F.shape[1])
        err, c = verify_distance_preservation(F, E)
        ref = 1 / np.sqrt(lapack_top(F)[0])
        worst_err = max(worst_err, err)
        worst_c = max(worst_c, abs(c - ref) / ref)
    elapsed = time.perf_counter() - t0
    ok = worst_err < 1e-8 and worst_c < 1e-10 and elapsed < 60
    record(1, "distance preservation", ok,
           f"max rel err {worst_err:.2e} (<1e-8), c' rel dev {worst_c:.2e} (<1e-10), {elapsed:.1f}s (<60s)")


def test_2_invariance():
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    settings = SETTINGS + ("composed",)
    worst_sign = worst_exact = 0.0
    excluded = ambiguous = 0
    for i in range(1000):
        F = random_cloud(rng)
        T = random_transform(int(rng.integers(2**32)), settings[i % len(settings)], d=F.shape[1])
        a, b = tinv_embed(F), tinv_embed(T.apply(F))
        if a.multiplicity_warning or b.multiplicity_warning:
            excluded += 1
            continue
        worst_sign = max(worst_sign, match_up_to_sign(a.H, b.H).max())
        ca, cb = canonical_sign(a), canonical_sign(b)
        if ca.is_ambiguous or cb.is_ambiguous:
            ambiguous += 1
            continue
        worst_exact = max(worst_exact, np.max(np.abs(ca.H - cb.H)))
    elapsed = time.perf_counter() - t0
    ok = worst_sign < 1e-6 and worst_exact < 1e-6 and excluded < 10 and elapsed < 120
    record(2, "similarity invariance", ok,
           f"up-to-sign {worst_sign:.2e}, canonical {worst_exact:.2e} (<1e-6), multiplicity-excluded {excluded}/1000, "
           f"sign-ambiguous {ambiguous}, {elapsed:.1f}s (<120s)")


def test_3_classical_mds_exact():
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(200):
        F = random_cloud(rng)
        D0 = pairwise_distances(F)
        D1 = pairwise_distances(classical_mds(F, k=F.shape[1]).H_tilde)
        iu = np.triu_indices(F.shape[0], 1)
        worst = max(worst, np.max(np.abs(D1[iu] - D0[iu]) / D0[iu]))
    record(3, "classical MDS reproduces distances", worst < 1e-8, f"max rel err {worst:.2e} (<1e-8)")


def test_4_scaling_covariance():
    rng = np.random.default_rng(404)
    worst_S = worst_lam = worst_H = 0.0
    for _ in range(200):
        F = random_cloud(rng)
        c = 100.0 - rng.uniform(0, 100)
        D = pairwise_distances(F)
        S, Sc = double_center(D), double_center(pairwise_distances(c * F))
        worst_S = max(worst_S, np.max(np.abs(Sc - c * c * S)) / np.max(np.abs(c * c * S)))
        a, b = tinv_embed(F), tinv_embed(c * F)
        worst_lam = max(worst_lam, np.max(np.abs(b.eigenvalues - c * c * a.eigenvalues)) / (c * c * a.top_eigenvalue))
        if not (a.multiplicity_warning or b.multiplicity_warning):
            worst_H = max(worst_H, match_up_to_sign(a.H, b.H).max())
    ok = worst_S < 1e-10 and worst_lam < 1e-10 and worst_H < 1e-6
    record(4, "scaling covariance", ok,
           f"centred matrix rel {worst_S:.2e} (<1e-10), eigenvalues rel {worst_lam:.2e}, embedding {worst_H:.2e}")


def test_5_rank_bound():
    rng = np.random.default_rng(505)
    worst = 0.0
    for _ in range(200):
        F = random_cloud(rng, sizes=(8, 64, 256))
        d = F.shape[1]
        e = sym_eig_topk(double_center(pairwise_distances(F)), d + 1, warn=False)
        worst = max(worst, e.values[d] / e.values[0])
    record(5, "rank bound", worst <= 1e-10, f"max lam_(d+1)/lam_1 {worst:.2e} (<=1e-10)")


def test_6_complexity():
    res = bench_scaling((128, 256, 512, 1024, 2048, 4096), repeats=10, d=3, seed=606)
    t2048 = res.mean_seconds[res.sizes.index(2048)]
    ok = 1.7 <= res.slope <= 2.4 and t2048 < 1.0
    times = ", ".join(f"{n}:{t * 1e3:.1f}ms" for n, t in zip(res.sizes, res.mean_seconds))
    record(6, "quadratic scaling", ok, f"slope {res.slope:.3f} (in [1.7, 2.4]), N=2048 {t2048:.3f}s (<1s); {times}")


def test_7_end_to_end_invariance():
    rng = np.random.default_rng(707)
    tinv = init_model(3, 4, rng_seed=7)
    raw = init_model(3, 4, rng_seed=7, embed_mode="raw_coords")
    worst = 0.0
    moved = 0
    for i in range(100):
        F = rng.uniform(-1, 1, size=(48, 3))
        base = forward_full(F, tinv)
        for s, setting in enumerate(SETTINGS):
            T = random_transform([i, s], setting, d=3)
            worst = max(worst, np.max(np.abs(forward_full(T.apply(F), tinv) - base)))
        T = random_transform([i, 99], "translation", d=3)
        moved += np.max(np.abs(forward_full(T.apply(F), raw) - forward_full(F, raw))) > 1e-2
    ok = worst < 1e-5 and moved >= 95
    record(7, "network invariance", ok, f"tinv max logit dev {worst:.2e} (<1e-5), raw translation changed {moved}/100 (>=95)")


def test_8_classification_protocols():
    t0 = time.perf_counter()
    ds = make_classification_dataset(300, 100, 64, 0.02, seed=808)
    cfg = TrainConfig(epochs=30, rng_seed=808)
    res = {(m, p): run_classification_protocol(ds, p, m, cfg) for m in ("tinv", "raw_coords") for p in PROTOCOLS}
    preds = [res["tinv", p].predictions for p in PROTOCOLS]
    identical = all(np.array_equal(preds[0], q) for q in preds[1:])
    accs = {k: v.accuracy for k, v in res.items()}
    spread = max(accs["tinv", p] for p in PROTOCOLS) - min(accs["tinv", p] for p in PROTOCOLS)
    gap = accs["raw_coords", "z/z"] - accs["raw_coords", "z/SO3"]
    elapsed = time.perf_counter() - t0
    ok = identical and spread == 0 and gap >= 0.15 and elapsed < 600
    table = ", ".join(f"{m}:{p}={a:.2f}" for (m, p), a in accs.items())
    record(8, "rotation protocols", ok,
           f"tinv predictions identical={identical}, spread {spread}, raw z/z-z/SO3 gap {gap:.2f} (>=0.15), "
           f"{elapsed:.0f}s (<600s); {table}")


def test_9_routing_invariance():
    t0 = time.perf_counter()
    problems = []
    summary = []
    for task, n in (("tsp", 20), ("tsp", 50), ("tsp", 100), ("cvrp", 20), ("cvrp", 50)):
        tinv = routing_invariance_suite(task, n, 1000, "tinv", seed=909, scorer_seed=9)
        raw = routing_invariance_suite(task, n, 1000, "raw_coords", seed=909, scorer_seed=9)
        dev = max(tinv.max_deviation.values())
        raw_t, raw_s = 1 - raw.identity_rate["translation"], 1 - raw.identity_rate["scaling"]
        if not tinv.all_identical:
            problems.append(f"{task}{n} tinv identity {tinv.identity_rate}")
        if dev > 1e-9:
            problems.append(f"{task}{n} normalized length deviation {dev:.2e}")
        if not (raw_t > 0.5 and raw_s > 0.5):
            problems.append(f"{task}{n} raw non-identity translation {raw_t:.2f} scaling {raw_s:.2f}")
        summary.append(f"{task}{n}: tinv 100%={tinv.all_identical} dev {dev:.1e}, raw change T {raw_t:.2f} S {raw_s:.2f}")
    elapsed = time.perf_counter() - t0
    record(9, "routing invariance", not problems, "; ".join(problems or summary) + f"; {elapsed:.0f}s")


def test_10_sign_handling():
    rng = np.random.default_rng(1010)
    problems = []
    for d in (1, 2, 3):
        E = tinv_embed(rng.normal(size=(10, d)))
        vs = sign_variants(E)
        D = pairwise_distances(E.H)
        if len(vs) != 2**d or any(np.max(np.abs(pairwise_distances(v.H) - D)) > 1e-12 for v in vs):
            problems.append(f"variants for k={d}")
        once = canonical_sign(E)
        if not np.array_equal(canonical_sign(once).H, once.H):
            problems.append("canonical_sign not idempotent")
    zero_sum = InvariantEmbedding(np.array([[1.0], [-1.0]]), 1.0, np.ones(1), 1)
    if canonical_sign(zero_sum).ambiguous_columns != (0,):
        problems.append("zero-sum column not flagged")
    ds = make_classification_dataset(300, 100, 64, 0.02, seed=1010)
    res = compare_sign_modes(ds, "z/SO3", TrainConfig(epochs=30, rng_seed=1010))
    can, enum = res["canonical"], res["enumeration"]
    if not (can["invariant"] and enum["invariant"]):
        problems.append("predictions changed under test-time rotation")
    if not (can["accuracy"] - 0.02 <= enum["accuracy"] <= 1.0):
        problems.append(f"enumeration accuracy {enum['accuracy']:.2f} below canonical {can['accuracy']:.2f} - 0.02")
    if enum["train_size"] != 8 * can["train_size"]:
        problems.append("training set not exactly 2^k larger")
    record(10, "sign handling", not problems,
           "; ".join(problems) or f"canonical acc {can['accuracy']:.2f}, enumeration acc {enum['accuracy']:.2f}, "
                                   f"train sizes {can['train_size']} -> {enum['train_size']}")


def test_11_gradients():
    rng = np.random.default_rng(1111)
    worst = 0.0
    checked = 0
    aggs = ("sum", "mean", "max")
    for i in range(20):
        m = init_model(3, 3, widths=(4, 5), head=(4,), aggregation=aggs[i % 3], activation="tanh",
                       pool=("mean", "sum")[i % 2], rng_seed=i)
        items = []
        for _ in range(2):
            X = rng.normal(size=(int(rng.integers(3, 7)), 3))
            items.append((X, knn_graph(pairwise_distances(X), 2)))
        batch = GraphBatch.from_graphs(items)
        labels = rng.integers(0, 3, size=2)
        _, grads, _ = loss_and_grads(m, batch, labels)
        for name, p in m.parameters().items():
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + 1e-5
                up = loss_and_grads(m, batch, labels)[0]
                p[idx] = old - 1e-5
                down = loss_and_grads(m, batch, labels)[0]
                p[idx] = old
                num, ana = (up - down) / 2e-5, grads[name][idx]
                diff = abs(num - ana)
                if diff > 1e-9:
                    worst = max(worst, diff / max(abs(num), abs(ana)))
                checked += 1
    record(11, "gradient correctness", worst < 1e-4,
           f"worst relative mismatch {worst:.2e} (<1e-4) over {checked} parameters")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
