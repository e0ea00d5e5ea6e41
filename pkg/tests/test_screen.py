import numpy as np
import pytest

from hdsparse.data import FeatureMatrix, ResponseVector
from hdsparse.screen import (
    Grid2D,
    bin_count,
    fft_kde_2d,
    make_grid,
    mi_binning,
    mi_fftkde,
    mi_knn,
    pearson_abs,
    screen_all,
    selection_auroc,
    silverman_bandwidth,
)


def gaussian_mi(rho):
    # closed form for a bivariate normal with correlation rho
    return -0.5 * np.log(1 - rho**2)


def _bvn(rng, n, rho):
    z = rng.normal(size=(n, 2))
    x = z[:, 0]
    y = rho * z[:, 0] + np.sqrt(1 - rho**2) * z[:, 1]
    return x, y


def test_silverman_bandwidth():
    rng = np.random.default_rng(0)
    x = rng.normal(size=1000)
    h = silverman_bandwidth(x)
    sd = x.std(ddof=1)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    assert h == pytest.approx(0.9 * min(sd, iqr / 1.34) * 1000 ** (-0.2))
    # heavy tails: the IQR branch wins
    xt = rng.standard_t(2, size=500)
    assert silverman_bandwidth(xt) == pytest.approx(
        0.9 * np.subtract(*np.percentile(xt, [75, 25])) / 1.34 * 500 ** (-0.2))
    with pytest.raises(ValueError):
        silverman_bandwidth(np.ones(50))
    with pytest.raises(ValueError):
        silverman_bandwidth([1.0])


def test_grid2d_validation():
    with pytest.raises(ValueError, match="powers of two"):
        Grid2D(0, 1, 0, 1, nx=100, ny=128)
    with pytest.raises(ValueError, match="powers of two"):
        Grid2D(0, 1, 0, 1, nx=32, ny=128)
    with pytest.raises(ValueError, match="ordered"):
        Grid2D(1, 0, 0, 1)
    g = Grid2D(0.0, 2.0, 0.0, 1.0, nx=128, ny=64)
    assert g.dx == pytest.approx(2.0 / 127)
    assert g.xs[0] == 0.0 and g.xs[-1] == 2.0 and g.xs.size == 128


def test_make_grid_padding():
    x = np.array([0.0, 1.0])
    y = np.array([-1.0, 2.0])
    g = make_grid(x, y, hx=0.1, hy=0.2, pad_bandwidths=3.0)
    assert g.x_min == pytest.approx(-0.6) and g.x_max == pytest.approx(1.6)
    assert g.y_min == pytest.approx(-1.6) and g.y_max == pytest.approx(2.6)


def test_fft_kde_matches_direct_sum():
    # points exactly on grid nodes: linear binning is exact, so the FFT-KDE
    # must agree with the brute-force kernel sum to roundoff
    rng = np.random.default_rng(1)
    g = Grid2D(-4.0, 4.0, -4.0, 4.0, nx=128, ny=128)
    ii = rng.integers(30, 98, size=40)
    jj = rng.integers(30, 98, size=40)
    x = g.xs[ii]
    y = g.ys[jj]
    h = 0.35
    dens = fft_kde_2d(x, y, "gaussian", h, h, g)
    XX, YY = np.meshgrid(g.xs, g.ys, indexing="ij")
    direct = np.zeros_like(XX)
    for xi, yi in zip(x, y):
        direct += (np.exp(-0.5 * ((XX - xi) / h) ** 2) / (np.sqrt(2 * np.pi) * h)
                   * np.exp(-0.5 * ((YY - yi) / h) ** 2) / (np.sqrt(2 * np.pi) * h))
    direct /= x.size
    direct /= direct.sum() * g.dx * g.dy    # same Euler-sum normalization
    assert np.max(np.abs(dens - direct)) <= 1e-6


def test_fft_kde_properties():
    rng = np.random.default_rng(2)
    x, y = _bvn(rng, 400, 0.3)
    h = silverman_bandwidth(x)
    g = make_grid(x, y, h, h)
    for kern in ("gaussian", "epanechnikov"):
        dens = fft_kde_2d(x, y, kern, h, h, g)
        assert np.all(dens >= 0)
        assert dens.sum() * g.dx * g.dy == pytest.approx(1.0)
    # swapping the roles of x and y transposes the density
    gt = Grid2D(g.y_min, g.y_max, g.x_min, g.x_max, g.ny, g.nx)
    assert np.allclose(fft_kde_2d(y, x, "gaussian", h, h, gt),
                       fft_kde_2d(x, y, "gaussian", h, h, g).T, atol=1e-12)
    # a grid that fails to cover data + 3h is rejected
    tight = Grid2D(float(x.min()), float(x.max()), float(y.min()), float(y.max()))
    with pytest.raises(ValueError, match="cover"):
        fft_kde_2d(x, y, "gaussian", h, h, tight)
    with pytest.raises(ValueError):
        fft_kde_2d(x, y, "gaussian", -0.1, h, g)
    with pytest.raises(ValueError):
        fft_kde_2d(x, y, "tricube", h, h, g)


def test_mi_fftkde_calibration():
    rng = np.random.default_rng(3)
    x, y = _bvn(rng, 2000, 0.5)
    got = mi_fftkde(x, y).value
    assert abs(got - gaussian_mi(0.5)) <= 0.03
    # independent pair is near zero (plug-in bias keeps it slightly positive)
    xi = rng.normal(size=2000)
    yi = rng.normal(size=2000)
    assert 0 <= mi_fftkde(xi, yi).value <= 0.03
    r = mi_fftkde(x, y)
    assert r.method == "fftkde" and r.diagnostics["kernel"] == "gaussian"


def test_bin_count_matches_bruteforce():
    rng = np.random.default_rng(4)
    for x in (rng.normal(size=200), rng.uniform(size=500), rng.exponential(size=80)):
        n = x.size
        d_max = int(np.ceil(n / np.log(n)))
        vals = []
        for d in range(2, d_max + 1):
            c, _ = np.histogram(x, bins=d)
            nz = c[c > 0]
            vals.append(np.sum(nz * np.log(d * nz / n)) - (d - 1 + np.log(d) ** 2.5))
        assert bin_count(x) == 2 + int(np.argmax(vals))
    with pytest.raises(ValueError):
        bin_count(np.arange(5.0))
    with pytest.warns(UserWarning, match="constant"):
        assert bin_count(np.zeros(50)) == 1


def test_mi_binning_discrete_cases():
    rng = np.random.default_rng(5)
    # identical 4-symbol variables: MI -> ln 4 (entropy), plug-in is exact here
    x = rng.integers(0, 4, size=4000).astype(float)
    got = mi_binning(x, x.copy()).value
    # the data-driven bin count may merge nothing; H(x) ~ ln 4 for uniform symbols
    assert abs(got - np.log(4)) <= 0.05
    # independent discrete pair: plug-in bias ~ (Dx-1)(Dy-1)/(2n), tiny
    y = rng.integers(0, 4, size=4000).astype(float)
    assert 0 <= mi_binning(x, y).value <= 0.01
    r = mi_binning(x, y)
    assert r.method == "binning" and r.diagnostics["bins_x"] >= 2


def test_mi_binning_exchangeable():
    rng = np.random.default_rng(6)
    x, y = _bvn(rng, 800, 0.6)
    assert mi_binning(x, y).value == pytest.approx(mi_binning(y, x).value)


def test_mi_knn_calibration():
    rng = np.random.default_rng(7)
    x, y = _bvn(rng, 2000, 0.9)
    assert abs(mi_knn(x, y).value - gaussian_mi(0.9)) <= 0.08
    x2, y2 = _bvn(rng, 2000, 0.5)
    assert abs(mi_knn(x2, y2).value - gaussian_mi(0.5)) <= 0.05
    xi, yi = rng.normal(size=(2, 2000))
    assert 0 <= mi_knn(xi, yi).value <= 0.01
    with pytest.raises(ValueError):
        mi_knn(x[:10], y[:10], k=10)


def test_mi_knn_monotone_invariance():
    # KSG is (approximately) invariant to strictly monotone maps of each margin
    rng = np.random.default_rng(8)
    x, y = _bvn(rng, 1500, 0.7)
    base = mi_knn(x, y).value
    assert abs(mi_knn(np.exp(x), y**3 + 2 * y).value - base) <= 0.05


def test_mi_knn_handles_ties():
    rng = np.random.default_rng(9)
    x = np.round(rng.normal(size=500), 1)   # heavy duplication
    y = np.round(x + rng.normal(scale=0.5, size=500), 1)
    r = mi_knn(x, y)
    assert np.isfinite(r.value) and r.value > 0.1


def test_pearson_abs():
    x = np.arange(10.0)
    assert pearson_abs(x, -3 * x + 1).value == pytest.approx(1.0)
    rng = np.random.default_rng(10)
    a, b = rng.normal(size=(2, 2000))
    assert pearson_abs(a, b).value <= 0.06
    r = np.corrcoef(a, 0.4 * a + b)[0, 1]
    assert pearson_abs(a, 0.4 * a + b).value == pytest.approx(abs(r))
    with pytest.raises(ValueError):
        pearson_abs(np.ones(5), np.arange(5.0))


def _signal_matrix(rng, n=300, p=12):
    y = rng.normal(size=n)
    cols = rng.normal(size=(n, p))
    cols[:, 0] = y + 0.2 * rng.normal(size=n)     # strong linear
    cols[:, 1] = y**2 + 0.3 * rng.normal(size=n)  # nonlinear
    return FeatureMatrix(cols), ResponseVector(y)


def test_screen_all_ranks_signal_first():
    rng = np.random.default_rng(11)
    m, y = _signal_matrix(rng)
    for method in ("fftkde", "binning", "knn", "pearson"):
        rk = screen_all(m, y, method=method)
        top = rk.indices()[:2]
        assert 0 in top, method
        if method != "pearson":        # correlation misses the pure-square column
            assert 1 in top, method
    assert screen_all(m, y, method="pearson").indices()[0] == 0


def test_screen_all_worker_invariance_and_failures():
    rng = np.random.default_rng(12)
    m, y = _signal_matrix(rng, n=120, p=8)
    vals = m.values.copy()
    vals[:, 5] = 2.0                               # constant column must fail
    m = FeatureMatrix(vals)
    r1 = screen_all(m, y, method="pearson", workers=1)
    r4 = screen_all(m, y, method="pearson", workers=4)
    assert r1.ranking == r4.ranking
    assert r1.failures and r1.failures[0][0] == 5
    assert r1.ranking[-1] == (5, -np.inf)
    with pytest.raises(ValueError):
        screen_all(m, y, method="mutualinfo")


def test_screen_all_tie_order():
    # identical columns tie; the ranking breaks ties by ascending index
    y = ResponseVector(np.arange(20.0))
    col = np.arange(20.0)
    m = FeatureMatrix(np.column_stack([col, col, col]))
    rk = screen_all(m, y, method="pearson")
    assert rk.indices() == [0, 1, 2]


def test_selection_auroc():
    truth = np.array([True, True, False, False])
    assert selection_auroc([4, 3, 2, 1], truth) == 1.0
    assert selection_auroc([1, 2, 3, 4], truth) == 0.0
    assert selection_auroc([1, 3, 2, 4], truth) == 0.25
    # ties handled with midranks
    assert selection_auroc([1, 1, 1, 1], truth) == 0.5
    with pytest.raises(ValueError):
        selection_auroc([1, 2], [True, True])
