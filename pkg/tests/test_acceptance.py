"""Acceptance gate: one test per top-level claim, each at its stated
tolerance and runtime budget, printing one PASS/FAIL line per criterion.

The final test exercises real backbone features and only runs when
GRAMCL_CIFAR100_VIT_STORE points at a feature store for them.
"""

import os
import time
from contextlib import contextmanager

import numpy as np
import pytest

from gramcl.accumulator import Accumulator
from gramcl.baselines import LdaState, lda_score, mahalanobis_score
from gramcl.protocols import RunConfig, avg_accuracy, avg_forgetting, run
from gramcl.solver import (
    DEFAULT_LAMBDA_GRID,
    LambdaSchedule,
    cross_validate_lambda,
    fit_iterative_oracle,
    predict,
    solve,
)
from gramcl.store import FeatureStore
from gramcl.synth import SynthSpec, synth_generate
from gramcl.theory import inner_product_test, prototype_correlation_report
from gramcl.theory import interaction_study

from datagen import xor_dataset

REAL_STORE_ENV = "GRAMCL_CIFAR100_VIT_STORE"


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {name}: FAIL")
        raise
    print(f"\nACCEPTANCE {name}: PASS")


def one_hot(labels, K):
    Y = np.zeros((len(labels), K))
    Y[np.arange(len(labels)), labels] = 1.0
    return Y


def test_streaming_statistics_are_order_invariant(tmp_path):
    # 5 random sample-order permutations of a K=10, L=64, N=2000 store give
    # final (G, C) within 1e-9 relative Frobenius and identical predictions
    with criterion("order invariance"):
        t0 = time.perf_counter()
        path = tmp_path / "store"
        synth_generate(SynthSpec(K=10, L=64, per_class=200, seed=42,
                                 val_per_class=20), path)
        fs = FeatureStore(path)
        F = fs.features("train").astype(np.float64)
        labels = fs.labels("train").astype(np.int64)
        Y = one_hot(labels, 10)
        Q = fs.features("val").astype(np.float64)
        assert len(F) == 2000

        ref = Accumulator(64, 10)
        ref.update_batch(F, Y, labels)
        ref_head = solve(ref.G, ref.C, 1e-4)
        ref_pred = predict(ref_head, Q)

        rng = np.random.Generator(np.random.PCG64(7))
        for _ in range(5):
            perm = rng.permutation(len(F))
            acc = Accumulator(64, 10)
            # split the permuted stream into uneven task-sized batches too
            cuts = np.sort(rng.choice(np.arange(1, len(F)), size=4,
                                      replace=False))
            for chunk in np.split(perm, cuts):
                acc.update_batch(F[chunk], Y[chunk], labels[chunk])
            rel_g = (np.linalg.norm(acc.G - ref.G)
                     / np.linalg.norm(ref.G))
            rel_c = (np.linalg.norm(acc.C - ref.C)
                     / np.linalg.norm(ref.C))
            assert rel_g <= 1e-9 and rel_c <= 1e-9
            head = solve(acc.G, acc.C, 1e-4)
            assert np.array_equal(predict(head, Q), ref_pred)
        assert time.perf_counter() - t0 < 10.0


def test_closed_form_head_is_ridge_optimal():
    # 50 random instances (width <= 64): solve residual <= 1e-8 and the
    # gradient-descent oracle reaches the same solution within 1e-3
    with criterion("ridge optimality"):
        rng = np.random.Generator(np.random.PCG64(11))
        for i in range(50):
            M = int(rng.integers(2, 65))
            D = int(rng.integers(1, 6))
            n = 3 * M
            H = rng.standard_normal((n, M))
            Y = rng.standard_normal((n, D))
            G, C = H.T @ H, H.T @ Y
            lam = float(10.0 ** rng.uniform(-4, 2))
            head = solve(G, C, lam)
            assert head.residual <= 1e-8
            W_iter = fit_iterative_oracle(G, C, lam, steps=50_000)
            rel = (np.linalg.norm(W_iter - head.W_o)
                   / np.linalg.norm(head.W_o))
            assert rel <= 1e-3


def test_decorrelated_head_beats_nearest_mean_on_correlated_classes(tmp_path):
    # anisotropic store (rho=0.95, K=10, L=64), 5-task class-incremental run:
    # the second-order head wins by >= 3 points and the mean off-diagonal
    # prototype correlation drops by >= 50%
    with criterion("decorrelation over nearest-mean"):
        t0 = time.perf_counter()
        path = tmp_path / "aniso"
        synth_generate(
            SynthSpec(K=10, L=64, per_class=100, val_per_class=40, seed=7,
                      covariance="anisotropic", rho=0.95,
                      mean_scale=1.0, noise_scale=1.0),
            path,
        )
        ncm = run(RunConfig(dataset=str(path), method="ncm", T=5, seed=1))
        gram = run(RunConfig(dataset=str(path), method="gram", T=5, seed=1))
        assert gram.final_avg_acc >= ncm.final_avg_acc + 0.03

        fs = FeatureStore(path)
        F = fs.features("train").astype(np.float64)
        labels = fs.labels("train").astype(np.int64)
        raw = prototype_correlation_report(F, labels, method="ncm")
        dec = prototype_correlation_report(F, labels, method="decorrelated",
                                           lam=1e-6)
        assert dec["mean_offdiag"] <= 0.5 * raw["mean_offdiag"]
        assert time.perf_counter() - t0 < 30.0


def test_nonlinearity_recovers_interaction_terms():
    # product-sign labels: exact pairwise expansion >= relu projection
    # (within 5 points) > linear projection ~= raw (within 1 point)
    with criterion("nonlinearity necessity"):
        t0 = time.perf_counter()
        Xtr, ytr = xor_dataset(800, seed=25)
        Xte, yte = xor_dataset(400, seed=26)
        res = interaction_study(Xtr, ytr, Xte, yte, M_values=[2000], seed=27)
        raw = res["raw"]
        oracle = res["pairwise_oracle"]
        relu = res["rp_nonlinear"][2000]
        linear = res["rp_linear"][2000]
        assert oracle >= relu - 1e-12
        assert relu > linear
        assert relu >= oracle - 0.05
        assert abs(linear - raw) <= 0.01
        assert time.perf_counter() - t0 < 60.0


def test_projected_inner_products_concentrate():
    # 2000-trial Monte Carlo: normalized inner product within 3 standard
    # errors of the target for 5 random pairs; tail fraction monotone
    # non-increasing over widths {64, 256, 1024, 4096}
    with criterion("inner-product concentration"):
        t0 = time.perf_counter()
        rng = np.random.Generator(np.random.PCG64(33))
        L = 8
        for pair in range(5):
            f = rng.standard_normal(L)
            g = rng.standard_normal(L)
            rep = inner_product_test(L, [256], f, g, trials=2000,
                                     seed=100 + pair)
            assert abs(rep.empirical_mean[0] - rep.target) <= 3 * rep.std_error[0]

        f = rng.standard_normal(L)
        f /= np.linalg.norm(f)
        g = rng.standard_normal(L)
        g /= np.linalg.norm(g)
        rep = inner_product_test(L, [64, 256, 1024, 4096], f, g,
                                 trials=2000, epsilon=0.25, seed=200)
        tails = rep.tail_fraction
        assert all(a >= b for a, b in zip(tails, tails[1:]))
        assert time.perf_counter() - t0 < 60.0


def test_continual_metrics_match_hand_computation():
    # hand-computed 3-task accuracy matrix, both metrics exact to 1e-12
    with criterion("metric formulas"):
        R = np.array([
            [0.96, 0.00, 0.00],
            [0.90, 0.84, 0.00],
            [0.80, 0.70, 0.92],
        ])
        assert abs(avg_accuracy(R, 1) - 0.96) <= 1e-12
        assert abs(avg_accuracy(R, 2) - 0.87) <= 1e-12
        assert abs(avg_accuracy(R, 3) - (0.80 + 0.70 + 0.92) / 3) <= 1e-12
        # F_2: 0.96 - 0.90;  F_3: mean(0.96 - 0.80, 0.84 - 0.70)
        assert abs(avg_forgetting(R, 2) - 0.06) <= 1e-12
        assert abs(avg_forgetting(R, 3) - 0.15) <= 1e-12


def test_discriminant_scores_are_consistent():
    # argmax of the linear discriminant equals argmin of the distance form on
    # 1000 random inputs; and on a zero-mean, equiprobable instance with
    # mirrored class means the ridge head gives the same decisions
    with criterion("discriminant consistency"):
        rng = np.random.Generator(np.random.PCG64(55))
        dim, K, n = 6, 5, 60
        means = 2.0 * rng.standard_normal((K, dim))
        labels = np.repeat(np.arange(K), n)
        F = means[labels] + rng.standard_normal((K * n, dim))
        state = LdaState(dim=dim, K=K)
        state.update_batch(F, labels)
        Q = 3.0 * rng.standard_normal((1000, dim))
        psi = lda_score(state, Q)
        psi_hat = mahalanobis_score(state, Q)
        assert np.array_equal(np.argmax(psi, axis=1),
                              np.argmin(psi_hat, axis=1))

        # constructed equivalence: antisymmetric two-class data, equal counts
        m = rng.standard_normal(dim)
        noise = rng.standard_normal((500, dim))
        F2 = np.vstack([noise + m, -noise - m])
        labels2 = np.repeat([0, 1], 500)
        acc = Accumulator(dim, 2)
        acc.update_batch(F2, one_hot(labels2, 2), labels2)
        head = solve(acc.G, acc.C, 1e-8)
        state2 = LdaState(dim=dim, K=2, uniform_priors=True, shrinkage=1e-8)
        state2.update_batch(F2, labels2)
        Q2 = 2.0 * rng.standard_normal((400, dim))
        lda_pred = np.argmax(lda_score(state2, Q2), axis=1)
        assert np.array_equal(predict(head, Q2), lda_pred)


def test_regularizer_selection_on_rank_deficient_task():
    # N=50 samples, M=500 features: the selected ridge strength must be
    # positive; the grid spans 17 powers of ten; and selection depends on
    # prior tasks only through their accumulated statistics
    with criterion("regularizer cross-validation"):
        assert len(DEFAULT_LAMBDA_GRID) == 17
        assert DEFAULT_LAMBDA_GRID[0] == 1e-8
        assert DEFAULT_LAMBDA_GRID[-1] == 1e8

        rng = np.random.Generator(np.random.PCG64(66))
        H = rng.standard_normal((50, 500))
        labels = rng.integers(0, 2, size=50)
        Y = one_hot(labels, 2)
        lam, _ = cross_validate_lambda(H, Y, Accumulator(500, 2),
                                       LambdaSchedule(), seed=5,
                                       task_labels=labels)
        assert lam > 0

        # structural check: two different orderings of the same prior-task
        # samples produce identical statistics, hence identical selection --
        # the selector has no access to the samples themselves
        Hp = rng.standard_normal((80, 20))
        lp = rng.integers(0, 3, size=80)
        Yp = one_hot(lp, 3)
        Hn = rng.standard_normal((60, 20))
        ln = rng.integers(0, 3, size=60)
        Yn = one_hot(ln, 3)
        perm = rng.permutation(80)
        base_a, base_b = Accumulator(20, 3), Accumulator(20, 3)
        base_a.update_batch(Hp, Yp, lp)
        base_b.update_batch(Hp[perm], Yp[perm], lp[perm])
        lam_a, _ = cross_validate_lambda(Hn, Yn, base_a, LambdaSchedule(),
                                         seed=9, task_labels=ln)
        lam_b, _ = cross_validate_lambda(Hn, Yn, base_b, LambdaSchedule(),
                                         seed=9, task_labels=ln)
        assert lam_a == lam_b


@pytest.mark.skipif(REAL_STORE_ENV not in os.environ,
                    reason=f"set {REAL_STORE_ENV} to a CIFAR100 ViT-B/16 "
                           "feature store to run the real-data reproduction")
def test_real_feature_reproduction():
    # headline numbers on user-supplied real backbone features (T=10 CIL):
    # projected head ~89.0%, raw-feature head ~87.0%, nearest-mean ~83.4%,
    # and the width sweep matches its published curve, all within 1 point
    with criterion("real-feature reproduction"):
        path = os.environ[REAL_STORE_ENV]
        rp = run(RunConfig(dataset=path, method="rp_gram", T=10, seed=0,
                           M=10_000))
        assert abs(rp.final_avg_acc - 0.890) <= 0.01
        gram = run(RunConfig(dataset=path, method="gram", T=10, seed=0))
        assert abs(gram.final_avg_acc - 0.870) <= 0.01
        ncm = run(RunConfig(dataset=path, method="ncm", T=10, seed=0))
        assert abs(ncm.final_avg_acc - 0.834) <= 0.01
        for M, expected in ((100, 0.716), (800, 0.862), (10_000, 0.888)):
            r = run(RunConfig(dataset=path, method="rp_gram", T=10, seed=0,
                              M=M))
            assert abs(r.final_avg_acc - expected) <= 0.01
