import math
from fractions import Fraction

import numpy as np
import pytest

from conebands.channels import (
    Channel,
    ExtensionRegime,
    channel_rotation,
    degree_constants,
    enumerate_channels,
    gamma_pm,
    h5_rotation,
    n_operator_singular,
    spectrum_of_A,
)
from conebands.transversal import build_flat_torus_spectrum

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# degree constants


def test_degree_constants_n2_p1():
    dc = degree_constants(2, 1)
    assert dc.a == Fraction(1, 2)
    assert dc.f_p == 0            # f(1) = (1-1)(1-2) = 0
    assert dc.f_pm2 == 2          # f(-1) = (1+1)(1+1-1) = 2
    assert dc.nu == 1
    assert dc.w_alpha == 0


def test_degree_constants_exact_sweep():
    # f(p) = a_{p+1}^2 - 1/4 with a_q = (n+1)/2 - q, exact in rationals
    for n in range(1, 7):
        for p in range(0, n + 2):
            dc = degree_constants(n, p)
            a_next = Fraction(n + 1, 2) - (p + 1)
            assert dc.f_p == a_next * a_next - Fraction(1, 4)
            a_prev = Fraction(n + 1, 2) - (p - 1)
            assert dc.f_pm2 == a_prev * a_prev - Fraction(1, 4)
            assert dc.nu == Fraction(n, 2) - p + 1
            assert dc.a == Fraction(n + 1, 2) - p


def test_f_minimum_and_zeros():
    # f attains -1/4 only at p = (n-1)/2, possible only for odd n;
    # f vanishes exactly at p = n/2 and p = n/2 - 1 (n even)
    for n in range(1, 7):
        vals = {p: degree_constants(n, p).f_p for p in range(0, n + 2)}
        assert min(vals.values()) >= Fraction(-1, 4)
        attain = [p for p, v in vals.items() if v == Fraction(-1, 4)]
        if n % 2 == 1:
            assert attain == [(n - 1) // 2]
        else:
            assert attain == []
        zeros = sorted(p for p, v in vals.items() if v == 0)
        if n % 2 == 0:
            assert zeros == [n // 2 - 1, n // 2]
        else:
            assert zeros == []


def test_degree_constants_range_errors():
    with pytest.raises(ValueError):
        degree_constants(2, -1)
    with pytest.raises(ValueError):
        degree_constants(2, 4)
    with pytest.raises(ValueError):
        degree_constants(0, 0)


# ---------------------------------------------------------------------------
# gamma formulas


def test_gamma_pm_n1_p1_mu1():
    gm, gp = gamma_pm(1.0, 0.0)
    assert gm == pytest.approx(-0.5, abs=1e-15)
    assert gp == pytest.approx(1.5, abs=1e-15)
    # indicial values gamma(gamma+1) are the eigenvalues of the 2x2 block
    # [[1.75, -2], [-2, 1.75]]
    assert gm * (gm + 1) == pytest.approx(-0.25, abs=1e-14)
    assert gp * (gp + 1) == pytest.approx(3.75, abs=1e-14)


def test_gamma_pm_n1_p1_mu2():
    gm, gp = gamma_pm(4.0, 0.0)
    assert (gm, gp) == pytest.approx((0.5, 2.5), abs=1e-15)
    assert gm * (gm + 1) == pytest.approx(0.75)
    assert gp * (gp + 1) == pytest.approx(8.75)


def test_gamma_pm_rejects_nonpositive_mu2():
    with pytest.raises(ValueError):
        gamma_pm(0.0, 1.0)
    with pytest.raises(ValueError):
        gamma_pm(-1.0, 0.5)


def test_gamma_quartic_identity_random():
    # acceptance-criterion-1 shape: gamma_-(gamma_-+1), gamma_+(gamma_++1)
    # are the two roots of 4 mu^2 = (mu^2+f(p-2)-x)(mu^2+f(p)-x),
    # and they match dense diagonalization of the potential block to 1e-12.
    rng = np.random.default_rng(20250812)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        p = int(rng.integers(0, n + 2))
        mu2 = float(rng.uniform(1e-6, 25.0))
        dc = degree_constants(n, p)
        gm, gp = gamma_pm(mu2, float(dc.a))
        f_pm2, f_p = float(dc.f_pm2), float(dc.f_p)
        for g in (gm, gp):
            x = g * (g + 1)
            lhs = 4 * mu2
            rhs = (mu2 + f_pm2 - x) * (mu2 + f_p - x)
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))
        block = np.array([[mu2 + f_pm2, -2 * math.sqrt(mu2)],
                          [-2 * math.sqrt(mu2), mu2 + f_p]])
        ev = np.linalg.eigvalsh(block)
        want = sorted([gm * (gm + 1), gp * (gp + 1)])
        assert abs(ev[0] - want[0]) <= 1e-12 * max(1.0, abs(want[0]))
        assert abs(ev[1] - want[1]) <= 1e-12 * max(1.0, abs(want[1]))
        assert gm >= -0.5 - 1e-15


# ---------------------------------------------------------------------------
# channel enumeration


def circle(cutoff=5):
    return build_flat_torus_spectrum([TWO_PI], cutoff)


def test_enumerate_circle_p0():
    ts = circle(5)
    chans = enumerate_channels(ts, 0, 5.0)
    kinds = [c.kind for c in chans]
    assert kinds == ["H2", "H4", "H4"]
    h2 = chans[0]
    assert h2.mult == 1 and h2.mu2 == 0
    assert float(h2.cone_potential[0]) == pytest.approx(-0.25)
    assert h2.gammas == pytest.approx((-0.5,))
    assert float(h2.interface_weights[0]) == pytest.approx(-0.5)
    h4a, h4b = chans[1], chans[2]
    assert (h4a.mu2, h4a.mult) == (Fraction(1), 2)
    assert (h4b.mu2, h4b.mult) == (Fraction(4), 2)
    assert h4a.gammas == pytest.approx((0.5,))
    assert h4b.gammas == pytest.approx((1.5,))
    assert float(h4a.cone_potential[0]) == pytest.approx(0.75)


def test_enumerate_circle_p1():
    ts = circle(12)
    chans = enumerate_channels(ts, 1, 10.0)
    kinds = [c.kind for c in chans]
    # harmonics in both slots plus H5 pairs over coexact 0-forms 1,4,9
    assert kinds == ["H1", "H2", "H5", "H5", "H5"]
    h1, h2 = chans[0], chans[1]
    assert float(h1.interface_weights[0]) == pytest.approx(0.5)   # nu = 1/2
    assert float(h2.interface_weights[0]) == pytest.approx(0.5)   # p - n/2
    assert h1.gammas == pytest.approx((0.5,))
    assert h2.gammas == pytest.approx((0.5,))
    h5 = chans[2]
    assert h5.mu2 == Fraction(1) and h5.mult == 2
    pot = np.array(h5.cone_potential, dtype=float)
    assert pot == pytest.approx(np.array([[1.75, -2.0], [-2.0, 1.75]]))
    assert h5.gammas == pytest.approx((-0.5, 1.5))
    assert [float(w) for w in h5.interface_weights] == pytest.approx([0.5, 0.5])


def test_enumerate_torus_p1_h5_block():
    ts = build_flat_torus_spectrum([TWO_PI, TWO_PI], 3)
    chans = enumerate_channels(ts, 1, 2.5)
    h5s = [c for c in chans if c.kind == "H5"]
    assert h5s[0].mult == 4
    pot = np.array(h5s[0].cone_potential, dtype=float)
    assert pot == pytest.approx(np.array([[3.0, -2.0], [-2.0, 1.0]]))
    # golden-ratio exponents for mu^2 = 1, a = 1/2: s = sqrt(5)/2
    s = math.sqrt(1.25)
    assert h5s[0].gammas == pytest.approx((s - 1.5, s + 0.5))


def test_enumerate_prunes_by_rigorous_bound():
    ts = circle(30)
    # scalar channels pruned iff mu^2 > lam_max
    chans = enumerate_channels(ts, 0, 5.0)
    h4_mu2 = [float(c.mu2) for c in chans if c.kind == "H4"]
    assert h4_mu2 == [1.0, 4.0]
    # H5 keeps an extra 1/4 margin: mu^2 = 9 with lam = 8.8 stays
    chans = enumerate_channels(ts, 1, 8.8)
    h5_mu2 = [float(c.mu2) for c in chans if c.kind == "H5"]
    assert h5_mu2 == [1.0, 4.0, 9.0]
    for c in chans:
        assert c.prune_bound <= 8.8 + 1e-12


def test_enumerate_refuses_insufficient_cutoff():
    ts = circle(5)
    with pytest.raises(ValueError, match="cutoff"):
        enumerate_channels(ts, 0, 5.5)
    with pytest.raises(ValueError, match="cutoff"):
        enumerate_channels(ts, 1, 5.0)  # H5 possible: needs cutoff >= 5.25
    # boundary passes: p=0 needs exactly lam_max
    assert enumerate_channels(ts, 0, 5.0)


def test_enumerate_duality_p_vs_dual():
    # degree p and n+1-p see mirrored channel data
    ts = circle(12)
    a = enumerate_channels(ts, 0, 10.0)
    b = enumerate_channels(ts, 2, 10.0)
    assert len(a) == len(b)
    pots_a = sorted(float(c.cone_potential[0]) for c in a)
    pots_b = sorted(float(c.cone_potential[0]) for c in b)
    assert pots_a == pytest.approx(pots_b)


# ---------------------------------------------------------------------------
# A-spectrum and extensions


def test_spectrum_of_A_circle():
    ts = circle(5)
    spec, regimes = spectrum_of_A(ts, 1.6)
    # coexact mu = 1 contributes +-1/2 +- 1 = {-1.5, -0.5, 0.5, 1.5} x2;
    # coexact mu = 2 contributes +-(1/2 - 2) = +-1.5 x2 inside the window;
    # harmonics contribute +-1/2 once per slot pair (b_0 and b_1)
    as_dict = {}
    for g, m in spec:
        as_dict[round(g, 12)] = as_dict.get(round(g, 12), 0) + m
    assert as_dict == {-1.5: 4, -0.5: 4, 0.5: 4, 1.5: 4}
    for p in range(0, 3):
        assert regimes[p].essentially_selfadjoint
        assert regimes[p].case_tag == "friedrichs"


def test_extension_regime_dmin_dmax_on_long_circle():
    # circumference 4*pi: mu^2 = 1/4 sits inside ]0,1[, so the middle degree
    # p = 1 admits the gap value gamma = s - 1/2 = 0 with multiplicity 2
    ts = build_flat_torus_spectrum([2 * TWO_PI], 7)
    _, regimes = spectrum_of_A(ts, 2.0)
    r1 = regimes[1]
    assert r1.case_tag == "dmin_dmax"
    assert not r1.essentially_selfadjoint
    assert len(r1.gamma_in_gap) == 1
    g, mu2, mult = r1.gamma_in_gap[0]
    assert g == pytest.approx(0.0, abs=1e-14)
    assert mu2 == Fraction(1, 4) and mult == 2
    assert regimes[0].case_tag == "friedrichs"
    assert regimes[2].case_tag == "friedrichs"


def test_extension_regime_coupled_middle():
    ts = build_flat_torus_spectrum([TWO_PI, TWO_PI], 3)
    _, regimes = spectrum_of_A(ts, 1.2)
    assert regimes[1].case_tag == "coupled-middle"
    assert regimes[2].case_tag == "coupled-middle"
    assert regimes[0].case_tag == "friedrichs"
    assert regimes[3].case_tag == "friedrichs"
    # the harmonic coupling contributes gamma = 0 with mult b_1 = 2
    entries1 = [(g, m) for g, _, m in regimes[1].gamma_in_gap]
    assert (0.0, 2) in entries1


def test_spectrum_of_A_consistency_with_potentials():
    # every channel potential eigenvalue equals x(x+1) for some aggregate
    # A-eigenvalue x
    ts = build_flat_torus_spectrum([TWO_PI, TWO_PI], 13)
    spec, _ = spectrum_of_A(ts, 3.0)
    avals = [g for g, _ in spec]
    for p in range(0, ts.n + 2):
        for ch in enumerate_channels(ts, p, 2.0):
            pot = np.atleast_2d(np.array(ch.cone_potential, dtype=float))
            for lam in np.linalg.eigvalsh(pot):
                ok = any(abs(x * (x + 1) - lam) < 1e-9 for x in avals)
                assert ok, (p, ch.kind, lam)


# ---------------------------------------------------------------------------
# N-operator singularity and rotation


def test_n_operator_singular_examples():
    # qualifying: n = 1, p = 1 (middle), mu = 1/2, gamma = gamma_-(1/4) = 0
    assert n_operator_singular(0.0, 0.5, 1, 1) is True
    # boundary mu = 1 still counts (gamma = -1/2)
    assert n_operator_singular(-0.5, 1.0, 1, 1) is True
    # gamma_- of mu = 2 is 1/2 but mu > 1: not singular
    assert n_operator_singular(0.5, 2.0, 1, 1) is False
    # plus branch never qualifies
    assert n_operator_singular(1.5, 1.0, 1, 1) is False
    # off-middle degree never qualifies (H4 exponent, p = 0)
    g4 = -0.5 + math.sqrt(1.0 + 0.0)  # a_{p+1} = 0 for n=1, p=0
    assert n_operator_singular(g4, 1.0, 0, 1) is False


def test_n_operator_singular_rejects_inadmissible():
    with pytest.raises(ValueError):
        n_operator_singular(0.123, 1.0, 1, 1)
    with pytest.raises(ValueError):
        n_operator_singular(0.0, -1.0, 1, 1)


def test_h5_rotation_45_degrees():
    R = h5_rotation(1.0, 1, 1, -0.25)
    expect = np.array([[1.0, -1.0], [1.0, 1.0]]) / math.sqrt(2.0)
    assert R == pytest.approx(expect, abs=1e-14)
    C = np.array([[1.75, -2.0], [-2.0, 1.75]])
    D = R.T @ C @ R
    assert D == pytest.approx(np.diag([-0.25, 3.75]), abs=1e-13)
    assert R.T @ R == pytest.approx(np.eye(2), abs=1e-14)


def test_h5_rotation_validates_lam_s():
    with pytest.raises(ValueError):
        h5_rotation(1.0, 1, 1, 0.123)
    with pytest.raises(ValueError):
        h5_rotation(0.0, 1, 1, -0.25)


def test_h5_rotation_random_diagonalizes():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 6))
        p = int(rng.integers(1, n + 1))
        mu2 = float(rng.uniform(0.01, 20.0))
        from conebands.channels import degree_constants as dcs

        dc = dcs(n, p)
        gm, gp = gamma_pm(mu2, float(dc.a))
        lam_m = gm * (gm + 1)
        R = h5_rotation(math.sqrt(mu2), p, n, lam_m)
        C = np.array(
            [[mu2 + float(dc.f_pm2), -2 * math.sqrt(mu2)],
             [-2 * math.sqrt(mu2), mu2 + float(dc.f_p)]]
        )
        D = R.T @ C @ R
        assert D[0, 1] == pytest.approx(0.0, abs=1e-10)
        assert D[0, 0] == pytest.approx(lam_m, rel=1e-10, abs=1e-10)


def test_channel_rotation_helper():
    ts = circle(12)
    chans = enumerate_channels(ts, 1, 10.0)
    h5 = [c for c in chans if c.kind == "H5"][0]
    R = channel_rotation(h5)
    assert R.shape == (2, 2)
    scalar = [c for c in chans if c.kind == "H1"][0]
    assert channel_rotation(scalar).shape == (1, 1)
