import numpy as np
import pytest

from tiltcert import bell, certifier as cf
from tiltcert.matcore import eig_hermitian, hs_inner

BETA_STAR_CHSH = (16 + 14 * np.sqrt(2)) / 17


@pytest.fixture(scope="module")
def consts():
    return {a: cf.solve_constants(a) for a in (0.0, 0.5, 1.0, 1.5, 1.9, 1.999)}


def test_bound_constants_validation():
    with pytest.raises(ValueError):
        cf.BoundConstants(0.0, -1.0, 1 + 2 * np.sqrt(2))
    with pytest.raises(ValueError):
        cf.BoundConstants(0.0, 1.0, 0.0)  # f(β_Q) ≠ 1
    c = cf.BoundConstants(0.0, 1.0, 1 - 2 * np.sqrt(2))
    assert np.isclose(c.f(2 * np.sqrt(2)), 1)


def test_chsh_anchor(consts):
    c = consts[0.0]
    assert abs(cf.threshold_violation(c) - BETA_STAR_CHSH) < 1e-6
    assert abs(c.f(2 * np.sqrt(2)) - 1) < 1e-8
    # closed forms of the α = 0 constants
    assert np.isclose(c.s, (4 + 5 * np.sqrt(2)) / 16, atol=1e-11)
    assert np.isclose(c.mu, -0.25 - np.sqrt(2) / 2, atol=1e-10)


def test_constants_grow_towards_two(consts):
    assert consts[1.999].s > consts[1.9].s > consts[1.5].s
    assert consts[1.999].mu < consts[1.9].mu < consts[1.5].mu


@pytest.mark.parametrize("alpha", np.linspace(0, 1.95, 40))
def test_normalization(alpha):
    c = cf.solve_constants(alpha)
    assert abs(c.s * bell.quantum_value(alpha) + c.mu - 1) <= 1e-8


def test_special_points_at_zero_slope():
    for alpha in (0.0, 0.8, 1.7):
        assert np.all(cf.special_point_minima(alpha, 0.0) >= -1e-14)
    with pytest.raises(ValueError):
        cf.special_point_minima(0.3, -1.0)


def test_special_points_monotone_in_s():
    s = np.linspace(0.1, 5, 40)
    vals = np.array([cf.special_point_minima(0.7, x) for x in s])
    assert np.all(np.diff(vals, axis=0) <= 1e-12)


def test_special_points_equalised(consts):
    v = cf.special_point_minima(0.0, consts[0.0].s)
    assert np.ptp(v) < 1e-9  # all four corners and the optimum at α = 0
    for alpha in (0.5, 1.0, 1.5, 1.9):
        v = cf.special_point_minima(alpha, consts[alpha].s)
        mu = consts[alpha].mu
        # corners (0, π/2) and (π/2, π/2) are the equalised pair; the others sit above
        assert abs(v[1] - mu) < 1e-9 and abs(v[3] - mu) < 1e-9 and abs(v[4] - mu) < 1e-9
        assert v[0] > mu and v[2] > mu


def test_joint_spectra_match_direct_eigenvalues():
    for alpha in (0.0, 0.9, 1.6):
        kd, wd = cf._joint_spectra(alpha, cf.DEFAULT_PROFILE)
        for s in (0.3, 2.0, 7.0):
            direct = cf.special_point_minima(alpha, s)
            assert np.allclose(cf._min_lines(kd, wd, s), direct, atol=1e-12)


def test_t_operator(consts):
    for alpha in (0.0, 1.0, 1.5):
        c = consts[alpha]
        a, b = bell.optimal_angles(alpha)
        t = cf.t_operator(alpha, a, b, c)
        assert np.allclose(t, t.conj().T)
        assert eig_hermitian(t).min >= -1e-8
        assert abs(hs_inner(bell.optimal_state(alpha), t @ bell.optimal_state(alpha)).real) < 1e-8
    with pytest.raises(ValueError):
        cf.t_operator(0.5, 0.1, 0.1, consts[0.0])


def test_t_with_zero_constants_is_k():
    zero = object.__new__(cf.BoundConstants)
    object.__setattr__(zero, "alpha", 0.4)
    object.__setattr__(zero, "s", 0.0)
    object.__setattr__(zero, "mu", 0.0)
    t = cf.t_operator(0.4, 0.3, 1.2, zero)
    assert eig_hermitian(t).min >= -1e-14


def test_batch_t_matches_reference(consts, rng):
    c = consts[1.0]
    for _ in range(30):
        a, b = rng.uniform(0, np.pi / 2, 2)
        ref = cf.t_operator(1.0, a, b, c)
        got = cf.t_operator_batch(1.0, a, b, c.s, c.mu)
        assert np.allclose(got, ref, atol=1e-12)


def test_symmetry(consts, rng):
    u = cf.SYMMETRY_UNITARY
    for alpha in (0.0, 0.6, 1.4):
        c = consts.get(alpha) or cf.solve_constants(alpha)
        for _ in range(20):
            a, b = rng.uniform(0, np.pi / 2, 2)
            t1 = cf.t_operator(alpha, a, b, c)
            t2 = cf.t_operator(alpha, np.pi / 2 - a, b, c)
            assert np.allclose(t1, u @ t2 @ u.conj().T, atol=1e-10)


def test_grid_spec():
    spec = cf.GridSpec.paper()
    assert len(spec.alphas) == 2000 and spec.alphas[-1] == 1.999 and spec.alphas[1998] == 1.998
    assert spec.a_grid[0] == 0 and np.isclose(spec.a_grid[-1], np.pi / 4) and len(spec.a_grid) == 100
    assert np.isclose(spec.b_grid[-1], np.pi / 2) and len(spec.b_grid) == 200
    assert spec.cells == 40_000_000
    with pytest.raises(ValueError):
        cf.GridSpec(alpha_max=2.0)
    with pytest.raises(ValueError):
        cf.GridSpec(a_points=1)
    with pytest.raises(ValueError):
        cf.GridSpec(alpha_values=(0.1, 2.5))


def test_coarse_scan_and_csv(tmp_path):
    spec = cf.GridSpec(alpha_min=0.0, alpha_max=1.9, alpha_step=0.1, a_points=20, b_points=40)
    rep = cf.grid_scan(spec, workers=1)
    assert rep.global_min_eigenvalue >= -1e-6
    assert rep.cells_evaluated == 20 * 20 * 40
    m = rep.argmin
    assert cf.recompute_cell(*m) == rep.global_min_eigenvalue
    path = tmp_path / "grid.csv"
    cf.write_report_csv(rep, path)
    back = cf.read_report_csv(path)
    assert np.array_equal(back, rep.minima_array())


def test_single_cell_at_chsh_optimum():
    assert cf.recompute_cell(0.0, np.pi / 4, np.pi / 4) >= -1e-10


def test_scan_is_worker_independent():
    spec = cf.GridSpec(alpha_values=(0.2, 0.9, 1.3, 1.7, 1.95), a_points=8, b_points=12)
    one = cf.grid_scan(spec, workers=1, chunk_size=2)
    many = cf.grid_scan(spec, workers=3, chunk_size=1)
    assert np.array_equal(one.minima_array(), many.minima_array())
    assert one.global_min_eigenvalue == many.global_min_eigenvalue


def test_full_dump(tmp_path):
    spec = cf.GridSpec(alpha_values=(0.5,), a_points=3, b_points=4)
    rep = cf.grid_scan(spec, workers=1, full=True)
    assert rep.cell_minima.shape == (1, 3, 4)
    assert rep.cell_minima.min() == rep.global_min_eigenvalue
    cf.write_report_csv(rep, tmp_path / "g.csv", spec)
    assert len(cf.read_report_csv(tmp_path / "g.csv")) == 12
