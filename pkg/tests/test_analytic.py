import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from selectmax import analytic
from selectmax.analytic import ErasureWeighting, Weighting
from selectmax.model import make_params


def test_rdf_examples():
    assert analytic.rdf(1, 1) == 0.0
    assert analytic.rdf(2, 2) == 0.0
    assert analytic.rdf(1, math.exp(-1)) == pytest.approx(1.0, abs=1e-15)
    assert analytic.rdf(1, 0.25, base=2) == pytest.approx(2.0, abs=1e-15)


def test_combined_distortion_examples():
    assert analytic.combined_distortion(make_params(1, 0.5, 3)) == 0.25
    assert analytic.combined_distortion(make_params(3, 0.2, 1)) == pytest.approx(0.2, rel=1e-15)
    assert analytic.combined_distortion(make_params(1, 1, 10)) == 1.0


def test_error_law_examples():
    p = make_params(1, 0.5, 3)
    law = analytic.error_law(p)
    assert law.ccdf(0.0) == 1.0
    assert law.pdf(0.0) == 4.0
    assert law.mean == analytic.combined_distortion(p) == 0.25
    assert law.atom_at_zero == 0.0


def _random_params(rng, n):
    out = []
    for _ in range(n):
        lam = rng.uniform(0.1, 5.0)
        d = rng.uniform(0.05, 1.0) / lam
        out.append(make_params(lam, d, int(rng.integers(1, 9))))
    return out


def test_error_ccdf_two_paths():
    """Closed-form ccdf vs the conditional-ccdf mixture integrated over the source."""
    rng = np.random.default_rng(0)
    worst = 0.0
    for p in _random_params(rng, 100):
        law = analytic.error_law(p)
        zs = rng.exponential(1.0 / p.combined_rate, 100)
        closed = law.ccdf(zs)
        for z, c in zip(zs, closed):
            # P(error > z | x) = exp(-K delta z) for x > z, else 0
            oracle, _ = integrate.quad(
                lambda x: math.exp(-p.k * p.delta * z) * p.lam * math.exp(-p.lam * x),
                z, np.inf, epsabs=1e-15, epsrel=1e-13)
            worst = max(worst, abs(oracle - c))
    assert worst < 1e-12


def test_error_ccdf_equals_integrated_pdf():
    rng = np.random.default_rng(1)
    for p in _random_params(rng, 20):
        law = analytic.error_law(p)
        for z in rng.exponential(1.0 / p.combined_rate, 10):
            tail, _ = integrate.quad(law.pdf, z, np.inf, epsabs=1e-15, epsrel=1e-13)
            assert abs(tail - law.ccdf(z)) < 1e-12


@pytest.mark.parametrize("law_fn", [
    lambda: analytic.error_law(make_params(1, 0.5, 3)),
    lambda: analytic.output_marginal(make_params(1, 0.5, 1)),
    lambda: analytic.output_marginal(make_params(2, 0.3, 1)),
    lambda: analytic.erasure_law(make_params(1, 0.5, 3), ErasureWeighting(0.2, 3)),
])
def test_law_invariants(law_fn):
    law = law_fn()
    z = np.linspace(0, 20, 2001)
    np.testing.assert_allclose(law.cdf(z) + law.ccdf(z), 1.0, rtol=0, atol=1e-12)
    assert np.all(np.diff(law.cdf(z)) >= 0)
    assert law.cdf(0.0) == pytest.approx(law.atom_at_zero, abs=1e-15)
    mass, _ = integrate.quad(law.pdf, 0, np.inf, epsabs=1e-12)
    assert mass + law.atom_at_zero == pytest.approx(1.0, abs=1e-6)
    mean, _ = integrate.quad(lambda t: t * law.pdf(t), 0, np.inf, epsabs=1e-12)
    assert mean == pytest.approx(law.mean, abs=1e-8)


def test_output_marginal_examples():
    assert analytic.output_marginal(make_params(1, 0.5, 1)).atom_at_zero == 0.5
    degenerate = analytic.output_marginal(make_params(1, 1, 1))
    assert degenerate.atom_at_zero == 1.0
    assert degenerate.cdf(3.0) == 1.0
    assert analytic.output_marginal(make_params(1, 0.5, 1)).cdf(np.inf) == 1.0


def test_output_marginal_matches_forward_channel():
    """Mixing the forward channel over the source reproduces the marginal CDF."""
    p = make_params(1.5, 0.4, 1)
    law = analytic.output_marginal(p)
    for y in [0.0, 0.1, 0.7, 2.0, 5.0]:
        below, _ = integrate.quad(lambda x: p.lam * math.exp(-p.lam * x), 0, y)
        above, _ = integrate.quad(
            lambda x: analytic.forward_cdf(y, x, p.delta) * p.lam * math.exp(-p.lam * x),
            y, np.inf, epsabs=1e-14)
        assert below + above == pytest.approx(law.cdf(y), abs=1e-10)


def test_selectmax_output_atom():
    p = make_params(1, 0.5, 3)
    oracle, _ = integrate.quad(lambda x: p.lam * math.exp(-p.lam * x) * math.exp(-p.k * p.delta * x),
                               0, np.inf, epsabs=1e-15)
    assert analytic.selectmax_output_atom(p) == pytest.approx(oracle, abs=1e-12)
    assert analytic.selectmax_output_atom(p) == 0.25
    q = make_params(2, 0.3, 1)
    assert analytic.selectmax_output_atom(q) == pytest.approx(q.lam * q.d, rel=1e-15)
    for k in (1, 4, 9):
        assert analytic.selectmax_output_atom(make_params(1, 1, k)) == 1.0


def test_channel_composition_identity():
    rng = np.random.default_rng(5)
    x = rng.exponential(1.0, 1000)
    y = x * rng.uniform(0, 1.2, 1000)
    k = rng.integers(1, 10, 1000)
    delta = 0.8
    lhs = analytic.forward_cdf(y, x, delta) ** k
    rhs = np.array([analytic.selectmax_forward_cdf(yi, xi, delta, int(ki))
                    for yi, xi, ki in zip(y, x, k)])
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)


def test_erasure_weights():
    w = ErasureWeighting(0.3, 4)
    assert w.mode is Weighting.BINOMIAL
    assert w.total == pytest.approx(1.0, abs=1e-12)
    lit = ErasureWeighting(0.5, 2, "paper-literal")
    np.testing.assert_allclose(lit.weights(), [0.25, 0.25, 0.25])
    with pytest.raises(ValueError):
        ErasureWeighting(1.5, 2)


@pytest.mark.parametrize("k", range(1, 9))
@pytest.mark.parametrize("theta", np.round(np.linspace(0, 1, 11), 10))
def test_binomial_ccdf_is_one_at_zero(k, theta):
    p = make_params(1, 0.5, k)
    assert analytic.erasure_ccdf_sum(0.0, p, ErasureWeighting(theta, k)) == pytest.approx(1.0, abs=1e-12)


def test_erasure_ccdf_sum_reductions():
    p = make_params(1, 0.5, 3)
    z = np.linspace(0, 5, 50)
    np.testing.assert_allclose(analytic.erasure_ccdf_sum(z, p, ErasureWeighting(0.0, 3)),
                               analytic.error_law(p).ccdf(z), rtol=1e-14)
    np.testing.assert_allclose(analytic.erasure_ccdf_sum(z, p, ErasureWeighting(1.0, 3)),
                               np.exp(-p.lam * z), rtol=1e-14)
    p2 = make_params(1, 0.5, 2)
    lit = ErasureWeighting(0.5, 2, Weighting.PAPER_LITERAL)
    assert analytic.erasure_ccdf_sum(0.0, p2, lit) == pytest.approx(0.75, abs=1e-15)


def test_closed_form_matches_sum():
    p = make_params(1, 0.5, 3)
    lit = ErasureWeighting(0.2, 3, "paper_literal")
    assert analytic.erasure_ccdf_closed(0.3, p, 0.2) == pytest.approx(
        analytic.erasure_ccdf_sum(0.3, p, lit), abs=1e-10)
    # K=1, theta=1/2 sits on the removable singularity at z=0
    with pytest.warns(RuntimeWarning):
        one = analytic.erasure_ccdf_closed(0.0, make_params(1, 0.5, 1), 0.5)
    assert one == pytest.approx(1.0, abs=1e-15)
    assert analytic.erasure_ccdf_closed(60.0, p, 0.2) < 1e-20
    with pytest.raises(ValueError):
        analytic.erasure_ccdf_closed(0.3, p, 0.0)


def test_closed_form_singularity_falls_back():
    # delta = 0, theta = 1/2: theta - (1 - theta) exp(-delta z) == 0 everywhere
    p = make_params(1, 1, 3)
    lit = ErasureWeighting(0.5, 3, "paper_literal")
    with pytest.warns(RuntimeWarning, match="singularity"):
        v = analytic.erasure_ccdf_closed(0.4, p, 0.5)
    assert v == analytic.erasure_ccdf_sum(0.4, p, lit)


def test_printed_closed_form_disagrees():
    p = make_params(1, 0.5, 3)
    lit = ErasureWeighting(0.2, 3, "paper_literal")
    z = np.linspace(0.01, 3, 50)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        printed = analytic.erasure_ccdf_printed(z, p, 0.2)
    assert np.nanmax(np.abs(printed - analytic.erasure_ccdf_sum(z, p, lit))) > 0.1


def test_erasure_pdf_examples():
    p = make_params(1, 0.5, 2)
    w = ErasureWeighting(0.5, 2)
    assert analytic.erasure_error_pdf(0.0, p, w) == pytest.approx(2.0, abs=1e-15)
    h = 1e-6
    numeric = (analytic.erasure_ccdf_sum(0.0, p, w) - analytic.erasure_ccdf_sum(h, p, w)) / h
    assert numeric == pytest.approx(2.0, abs=1e-5)
    z = np.linspace(0.0, 4, 30)
    p3 = make_params(1, 0.5, 3)
    np.testing.assert_allclose(analytic.erasure_error_pdf(z, p3, ErasureWeighting(0.0, 3)),
                               analytic.error_law(p3).pdf(z), rtol=1e-14)


@pytest.mark.parametrize("theta, k", [(0.2, 3), (0.5, 2), (0.9, 5), (0.05, 8)])
def test_erasure_pdf_integrates(theta, k):
    p = make_params(1.3, 0.4, k)
    for mode in Weighting:
        w = ErasureWeighting(theta, k, mode)
        mass, _ = integrate.quad(lambda z: analytic.erasure_error_pdf(z, p, w), 0, np.inf,
                                 epsabs=1e-10, epsrel=1e-10)
        assert mass == pytest.approx(w.total, abs=1e-8)
        if mode is Weighting.BINOMIAL:
            assert mass == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=100, deadline=None)
@given(
    lam=st.floats(0.1, 5),
    frac=st.floats(0.05, 0.999),
    k=st.integers(1, 8),
    theta=st.floats(0.0, 0.99),
    dtheta=st.floats(0.001, 0.5),
    z=st.floats(0.001, 10),
    dz=st.floats(0.001, 5),
)
def test_erasure_ccdf_monotone(lam, frac, k, theta, dtheta, z, dz):
    p = make_params(lam, frac / lam, k)
    theta2 = min(1.0, theta + dtheta)
    for mode in Weighting:
        w = ErasureWeighting(theta, k, mode)
        assert analytic.erasure_ccdf_sum(z + dz, p, w) <= analytic.erasure_ccdf_sum(z, p, w) + 1e-15
    lo = analytic.erasure_ccdf_sum(z, p, ErasureWeighting(theta, k))
    hi = analytic.erasure_ccdf_sum(z, p, ErasureWeighting(theta2, k))
    assert hi >= lo - 1e-12


@settings(max_examples=200, deadline=None)
@given(
    lam=st.floats(0.1, 5),
    frac=st.floats(0.05, 0.999),
    k=st.integers(1, 10),
    theta=st.floats(0.01, 0.99),
    z=st.floats(0.0, 8),
)
def test_closed_form_property(lam, frac, k, theta, z):
    p = make_params(lam, frac / lam, k)
    lit = ErasureWeighting(theta, k, "paper_literal")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        closed = analytic.erasure_ccdf_closed(z, p, theta)
    assert closed == pytest.approx(analytic.erasure_ccdf_sum(z, p, lit), abs=1e-10)
