"""Acceptance criteria, one test each.

Every test carries a ``criterion`` marker; ``conftest.py`` prints one
PASS/FAIL line per criterion at the end of the run.
"""
import filecmp
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from inertial_cp import _kernels
from inertial_cp.diagnostics import (certificate_constant, check_rate_certificate,
                                     check_residual_rate, compare_runs, fejer_distances)
from inertial_cp.experiments import ExperimentConfig, run_experiment
from inertial_cp.linops import (DenseMap, FiniteDifferenceMap, PartialWalshHadamardMap,
                                estimate_spectral_bound, fwht, hadamard_matrix)
from inertial_cp.proxops import (AffineProjection, DiagonalQuadratic, GroupNorm, Zero,
                                 ZeroIndicator, moreau_residual)
from inertial_cp.solvers import (ConfigError, GMetric, SolverConfig, Variant,
                                 reference_solution, solve, trajectory)

from oracles import ball_projection, brute_force_prox, dense_hadamard
from suite import config, random_problem, slow_problem

SUITE = range(10)
RATE_SUITE = range(5)
TOL = 1e-10


def _detail(record_property, text):
    record_property("detail", text)


# ---------------------------------------------------------------------------
# 1, 2: equivalences


DIRECT_PAIRS = [("CP-yxxb", "LADMD-yvx"), ("CP-xxby", "LADMD-vxy"),
                ("CP-xyyb", "LADMP-xuy"), ("CP-yybx", "LADMP-uyx")]


@pytest.mark.criterion(1, "CPA/LADM equivalence, 4 pairs x 10 problems, 100 iterations, <= 1e-10")
def test_criterion_01_cpa_ladm_equivalence(record_property):
    worst = 0.0
    failures = []
    for seed in SUITE:
        prob, x0, y0 = random_problem(seed)
        for a, b in DIRECT_PAIRS:
            # default initial conditions: v0 = -A^T y0 for LADMD-yvx, u0 = A x0 for LADMP-xuy
            ra = trajectory(prob, config(prob, a), x0, y0, 100)
            rb = trajectory(prob, config(prob, b), x0, y0, 100)
            rep = compare_runs(ra, rb, tol=TOL)
            worst = max(worst, rep.max_gap)
            if not rep.equivalent:
                failures.append((seed, a, b, rep.first_divergence_iter, rep.max_gap))
    _detail(record_property, f"max gap {worst:.1e}")
    assert not failures, failures


@pytest.mark.criterion(2, "cyclic-shift equivalence yxxb/xxby and xyyb/yybx, <= 1e-10")
def test_criterion_02_cyclic_shift(record_property):
    worst = 0.0
    failures = []
    for seed in SUITE:
        prob, x0, y0 = random_problem(seed)
        # CP-xxby started at (x^0, y^1) of CP-yxxb produces (x^k, y^{k+1})
        ra = trajectory(prob, config(prob, "CP-yxxb"), x0, y0, 101)
        rb = trajectory(prob, config(prob, "CP-xxby"), x0, ra.ys[1], 100)
        rep1 = compare_runs(ra, rb, shift=(0, 1), tol=TOL)
        # CP-yybx started at (x^1, y^0) of CP-xyyb produces (x^{k+1}, y^k)
        rc = trajectory(prob, config(prob, "CP-xyyb"), x0, y0, 101)
        rd = trajectory(prob, config(prob, "CP-yybx"), rc.xs[1], y0, 100)
        rep2 = compare_runs(rc, rd, shift=(1, 0), tol=TOL)
        for rep in (rep1, rep2):
            worst = max(worst, rep.max_gap)
            if not rep.equivalent:
                failures.append((seed, rep.variant_pair, rep.first_divergence_iter))
    _detail(record_property, f"max gap {worst:.1e}")
    assert not failures, failures


# ---------------------------------------------------------------------------
# 3: G positive definite


@pytest.mark.criterion(3, "G positive definite at tau*sigma*rho in {0.5,0.9,0.99}; 1.01 rejected")
def test_criterion_03_g_positive_definite(record_property):
    rng = np.random.default_rng(3)
    smallest = np.inf
    for trial in range(5):
        m, n = rng.integers(3, 31), rng.integers(3, 41)
        A = DenseMap(rng.standard_normal((m, n)))
        rho = A.spectral_radius()
        for ratio in (0.5, 0.9, 0.99):
            sigma = float(rng.uniform(0.1, 10.0))
            tau = ratio / (sigma * rho)
            cfg = SolverConfig("CP-yybx", tau, sigma, rho)
            for sign in (1, -1):
                G = GMetric(A, cfg.tau, cfg.sigma, sign).dense()
                assert np.allclose(G, G.T)
                lam = np.linalg.eigvalsh(G)[0]
                smallest = min(smallest, lam)
                assert lam > 0, (trial, ratio, sign, lam)
        with pytest.raises(ConfigError):
            SolverConfig("CP-yybx", 1.01 / (2.0 * rho), 2.0, rho)
    _detail(record_property, f"smallest eigenvalue {smallest:.2e}")


# ---------------------------------------------------------------------------
# 4, 5: rates


def _g0_and_reference(prob, cfg, x0, y0):
    xs, ys = reference_solution(prob, replace(cfg, epsilon=1e-12, max_iters=100000), x0, y0)
    metric = GMetric.for_config(prob.A, cfg)
    return xs, ys, metric, metric.norm_sq(x0 - xs, y0 - ys)


def _horizon(prob, cfg, x0, y0):
    # at least 1000 steps, and long enough to reach the reference tolerance
    n = solve(prob, replace(cfg, epsilon=1e-12, max_iters=100000), x0, y0, record=False)
    return max(1000, n.iterations)


@pytest.mark.criterion(4, "Fejer monotonicity (1e-12 slack) and k||w^k-w^(k-1)||_G^2 <= ||w^0-w*||_G^2")
def test_criterion_04_noninertial_rates(record_property):
    worst_increase = -np.inf
    worst_rate = 0.0
    for seed in RATE_SUITE:
        prob, x0, y0 = slow_problem(seed)
        for variant in ("CP-yybx", "CP-xxby"):
            cfg = config(prob, variant, epsilon=1e-300)
            xs, ys, metric, d0 = _g0_and_reference(prob, cfg, x0, y0)
            K = _horizon(prob, cfg, x0, y0)
            run = solve(prob, replace(cfg, max_iters=K), x0, y0, keep_iterates=True)
            d = fejer_distances([p[0] for p in run.iterates], [p[1] for p in run.iterates],
                                metric, xs, ys)
            inc = float(np.max(np.diff(d)))
            rate = check_residual_rate(run.history, d0)
            worst_increase = max(worst_increase, inc)
            worst_rate = max(worst_rate, rate)
            assert inc <= 1e-12, (seed, variant, inc)
            assert rate <= 1.0, (seed, variant, rate)
    _detail(record_property, f"max distance increase {worst_increase:.1e}, "
                             f"max k*step/d0 {worst_rate:.3f}")


@pytest.mark.criterion(5, "inertial certificate <= 13.5 ||w^0-w*||_G^2 and decay from k=100 to k=1000")
def test_criterion_05_inertial_certificate(record_property):
    alpha = 0.28
    assert certificate_constant(alpha) == pytest.approx(13.5)
    worst, worst_trend = 0.0, 0.0
    for seed in RATE_SUITE:
        prob, x0, y0 = slow_problem(seed)
        for variant in ("iCP-yybx", "iCP-xxby"):
            cfg = config(prob, variant, alpha=alpha, epsilon=1e-300)
            _, _, _, d0 = _g0_and_reference(prob, cfg, x0, y0)
            K = _horizon(prob, cfg, x0, y0)
            run = solve(prob, replace(cfg, max_iters=K), x0, y0)
            cert = check_rate_certificate(run.history, d0, alpha)
            trend = cert.trend_ratio(100, 1000)
            worst = max(worst, cert.worst_ratio)
            worst_trend = max(worst_trend, trend)
            assert cert.holds, (seed, variant, cert.worst_ratio, cert.worst_k)
            assert trend < 0.5, (seed, variant, cert.product_at(100), cert.product_at(1000))
    _detail(record_property, f"max bound usage {worst:.3f}, max P(1000)/P(100) {worst_trend:.1e}")


# ---------------------------------------------------------------------------
# 6: point convergence


@pytest.mark.criterion(6, "all variants stop at eps=1e-6 and agree in x to 1e-4")
def test_criterion_06_point_convergence(record_property):
    spread_max = 0.0
    for seed in SUITE:
        prob, x0, y0 = random_problem(seed)
        xs = []
        for v in Variant:
            cfg = config(prob, v, alpha=0.28 if v.inertial else 0.0,
                         epsilon=1e-6, max_iters=100000)
            res = solve(prob, cfg, x0, y0, record=False)
            assert res.converged, (seed, v.value, res.iterations)
            xs.append(res.x)
        xs = np.array(xs)
        spread = float(np.max(xs.max(axis=0) - xs.min(axis=0)))
        spread_max = max(spread_max, spread)
        assert spread <= 1e-4, (seed, spread)
    _detail(record_property, f"max spread {spread_max:.1e}")


# ---------------------------------------------------------------------------
# 7: TV experiment


@pytest.mark.criterion(7, "TV study 64x64: iCP-yybx < CP-yybx, mean ratio in [0.6,0.95], "
                          "counts grow with tighter eps, Bx=b, < 5 min")
def test_criterion_07_tv_experiment(tmp_path, record_property):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(n=64, fractions=(0.2, 0.4, 0.6, 0.8), sigma=5.0,
                           alpha=0.28, epsilons=(1e-2, 1e-3, 1e-4), seed=0,
                           output_dir=str(tmp_path))
    assert cfg.tau == pytest.approx(0.124 / 5.0)
    res = run_experiment(cfg)
    elapsed = time.perf_counter() - t0

    ratios = res.ratio_by_fraction(1e-3)
    assert sorted(ratios) == [0.2, 0.4, 0.6, 0.8]
    mean = float(np.mean(list(ratios.values())))
    assert all(r < 1.0 for r in ratios.values()), ratios
    assert 0.6 <= mean <= 0.95, mean

    counts = {}
    for row in res.summary:
        assert row["converged"] == 1, row
        counts[(row["fraction"], row["variant"], row["epsilon"])] = row["iterations"]
    for frac in cfg.fractions:
        for v in ("CP-yybx", "iCP-yybx"):
            c = [counts[(frac, v, e)] for e in (1e-2, 1e-3, 1e-4)]
            assert c[0] < c[1] < c[2], (frac, v, c)

    feas = max(r.feasibility for r in res.runs)
    assert feas <= 1e-10, feas
    assert elapsed < 300.0, elapsed
    _detail(record_property, "ratios " + " ".join(f"{f:.1f}:{r:.2f}" for f, r in
                                                 sorted(ratios.items()))
            + f", mean {mean:.3f}, max |Bx-b| {feas:.1e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 8: prox oracle


def _quad_value(d, c):
    return lambda P: 0.5 * np.sum(d * (P - c) ** 2, axis=1)


def _registered_small():
    """(name, function, batch value, extra candidate points) on dims 1 and 2."""
    rng = np.random.default_rng(8)
    out = []
    for dim in (1, 2):
        d = rng.uniform(0.5, 2.0, dim)
        c = rng.standard_normal(dim)
        q = DiagonalQuadratic(dim, d, c)
        out.append((f"quadratic{dim}", q, _quad_value(d, c), None))
        out.append((f"quadratic{dim}*", q.conjugate(),
                    lambda P, d=d, c=c: np.sum(P * c + 0.5 * P ** 2 / d, axis=1), None))
        out.append((f"zero{dim}", Zero(dim), lambda P: np.zeros(len(P)), None))
        out.append((f"origin{dim}", ZeroIndicator(dim),
                    lambda P: np.where(np.all(P == 0, axis=1), 0.0, np.inf), np.zeros(dim)))
    w = 0.7
    out.append(("groupnorm", GroupNorm(1, w), lambda P: w * np.hypot(P[:, 0], P[:, 1]), None))
    theta = np.linspace(0.0, 2.0 * np.pi, 20000, endpoint=False)
    circle = w * np.column_stack([np.cos(theta), np.sin(theta)])
    out.append(("groupnorm*", GroupNorm(1, w).conjugate(),
                lambda P: np.where(np.hypot(P[:, 0], P[:, 1]) <= w, 0.0, np.inf), circle))
    row = np.array([[0.6, 0.8]])
    B = DenseMap(row)
    proj = AffineProjection(B, [0.3])
    t = np.arange(-8.0, 8.0, 1e-3)
    line = 0.3 * row[0] + np.outer(t, [-0.8, 0.6])
    out.append(("affine", proj,
                lambda P: np.where(np.abs(P @ row[0] - 0.3) <= 1e-12, 0.0, np.inf), line))
    return out


def _moreau_pairs():
    """(name, function, independent prox of its conjugate) for the identity check."""
    rng = np.random.default_rng(80)
    d = rng.uniform(0.5, 2.0, 10)
    c = rng.standard_normal(10)
    q = DiagonalQuadratic(10, d, c)
    gn = GroupNorm(5, 0.7)
    row = np.linalg.qr(rng.standard_normal((10, 4)))[0].T
    proj = AffineProjection(DenseMap(row), rng.standard_normal(4))
    return [
        ("quadratic", q, q.conjugate_prox),
        ("groupnorm", gn, lambda s, z: ball_projection(z, 0.7)),
        ("zero", Zero(10), lambda s, z: np.zeros_like(z)),
        ("origin", ZeroIndicator(10), lambda s, z: z.copy()),
        ("affine", proj, None),
    ]


@pytest.mark.criterion(8, "prox vs grid brute force within 2e-3 (dims <= 2); Moreau residual <= 1e-12")
def test_criterion_08_prox_oracle(record_property):
    rng = np.random.default_rng(88)
    worst_grid = 0.0
    for name, h, value, extra in _registered_small():
        for _ in range(4):
            z = rng.uniform(-2.0, 2.0, h.dim)
            for gamma in (0.5, 1.0, 2.0):
                p = h.prox(gamma, z)
                ref = brute_force_prox(value, gamma, z, extra=extra)
                err = float(np.max(np.abs(p - ref)))
                worst_grid = max(worst_grid, err)
                assert err <= 2e-3, (name, z, gamma, p, ref)
    worst_moreau = 0.0
    for name, h, conj_prox in _moreau_pairs():
        for _ in range(100):
            z = rng.standard_normal(h.dim) * 3.0
            for t in (0.1, 1.0, 10.0):
                r = moreau_residual(h, t, z)
                if conj_prox is not None:
                    r = max(r, float(np.linalg.norm(
                        z - h.prox(t, z) - t * conj_prox(1.0 / t, z / t))))
                worst_moreau = max(worst_moreau, r)
                assert r <= 1e-12, (name, t, r)
    _detail(record_property, f"max grid error {worst_grid:.1e}, max Moreau residual {worst_moreau:.1e}")


# ---------------------------------------------------------------------------
# 9: operators


@pytest.mark.criterion(9, "FWHT = dense Hadamard to 1e-12 (size <= 64); BB*=I; power iteration -> 8 +- 1e-6")
def test_criterion_09_operators(record_property):
    rng = np.random.default_rng(9)
    worst = 0.0
    for backend in sorted(_kernels.IMPLEMENTATIONS):
        kernel = _kernels.IMPLEMENTATIONS[backend]["fwht"]
        for j in range(7):
            size = 1 << j
            H = dense_hadamard(size)
            assert np.array_equal(hadamard_matrix(j), H)
            for _ in range(5):
                u = rng.standard_normal(size)
                got = kernel(u.copy())
                err = float(np.max(np.abs(got - H @ u)))
                worst = max(worst, err)
                assert err <= 1e-12, (backend, size, err)
                assert np.max(np.abs(fwht(u) - H @ u)) <= 1e-12

    B = PartialWalshHadamardMap.random(12, round(0.4 * 4096), seed=99)
    probe_err = 0.0
    for _ in range(20):
        v = rng.standard_normal(B.q)
        probe_err = max(probe_err, float(np.linalg.norm(B.apply(B.adjoint_apply(v)) - v)
                                         / np.linalg.norm(v)))
    assert probe_err <= 1e-12
    AffineProjection(B, B.apply(rng.standard_normal(4096)))  # runs its own probe check

    est = estimate_spectral_bound(FiniteDifferenceMap(64), iters=20000, seed=0, use_known=False)
    assert abs(est - 8.0) <= 1e-6, est
    _detail(record_property, f"FWHT err {worst:.1e}, BB* probe err {probe_err:.1e}, "
                             f"power iteration {est:.10f}")


# ---------------------------------------------------------------------------
# 10: determinism


def _tree(root):
    return sorted(p.relative_to(root) for p in Path(root).rglob("*") if p.is_file())


@pytest.mark.criterion(10, "identical seeds give byte-identical CSV outputs")
def test_criterion_10_determinism(tmp_path, record_property):
    dirs = []
    for rep in range(2):
        out = tmp_path / f"run{rep}"
        cfg = ExperimentConfig(n=32, fractions=(0.2, 0.6), epsilons=(1e-2, 1e-3), seed=7,
                               variants=("CP-yybx", "iCP-yybx", "CP-xxby", "iCP-xxby"),
                               alpha_sweep=True, output_dir=str(out))
        with pytest.warns(RuntimeWarning):  # the sweep includes alpha = 0.35
            run_experiment(cfg)
        dirs.append(out)
    files_a, files_b = _tree(dirs[0]), _tree(dirs[1])
    assert files_a == files_b
    csvs = [f for f in files_a if f.suffix == ".csv"]
    assert len(csvs) >= 8
    for f in files_a:
        assert filecmp.cmp(dirs[0] / f, dirs[1] / f, shallow=False), f
    _detail(record_property, f"{len(files_a)} files ({len(csvs)} CSV) identical")
