"""Mode decomposition into radial channels.

Separating variables over the cross-section splits the degree-p problem into
one-dimensional radial problems ("channels") indexed by cross-section data:

  H1  harmonic (p-1)-forms in the dt-slot        scalar, mu = 0
  H2  harmonic p-forms in the tangential slot    scalar, mu = 0
  H3  exact (p-1)-forms in the dt-slot           scalar, mu > 0
  H4  coexact p-forms in the tangential slot     scalar, mu > 0
  H5  coexact (p-1)-form paired with its d-image coupled 2x2, mu > 0

On a cone of radius t each channel sees the potential c/t^2 where c is the
(block) eigenvalue of the combined zeroth-order term; its indicial exponents
at the tip are gamma+1 (regular) and -gamma (singular) with gamma >= -1/2.

The degree shift operator A (the Mellin symbol of the cone operator, up to
the radial derivative) has the closed-form spectrum used by spectrum_of_A;
its part in the open gap ]-1/2, 1/2[ decides self-adjoint extensions.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .transversal import TransversalSpectrum

Scalar = Union[Fraction, float]


@dataclass(frozen=True)
class DegreeConstants:
    """Exact rational constants of a fixed (n, p).

    a       = (n+1)/2 - p, the centered degree parameter
    f_p     = (n/2 - p)(n/2 - p - 1), tangential-slot potential shift
    f_pm2   = f evaluated at p - 2, dt-slot potential shift
    nu      = n/2 - p + 1, dt-slot interface weight
    w_alpha = p - n/2, tangential-slot interface weight
    """

    n: int
    p: int
    a: Fraction
    f_p: Fraction
    f_pm2: Fraction
    nu: Fraction
    w_alpha: Fraction


def degree_constants(n: int, p: int) -> DegreeConstants:
    if not isinstance(n, int) or n < 1:
        raise ValueError(f"cross-section dimension n must be a positive integer, got {n}")
    if not isinstance(p, int) or p < 0 or p > n + 1:
        raise ValueError(f"form degree p must lie in [0, {n + 1}], got {p}")

    def f(q: int) -> Fraction:
        return (Fraction(n, 2) - q) * (Fraction(n, 2) - q - 1)

    return DegreeConstants(
        n=n,
        p=p,
        a=Fraction(n + 1, 2) - p,
        f_p=f(p),
        f_pm2=f(p - 2),
        nu=Fraction(n, 2) - p + 1,
        w_alpha=Fraction(p) - Fraction(n, 2),
    )


def gamma_pm(mu2: float, a: float) -> tuple[float, float]:
    """Tip exponents of the coupled H5 pair: -1/2 + |s -+ 1|, s = sqrt(mu2+a^2).

    Both are >= -1/2; gamma_- hits -1/2 exactly at s = 1.
    """
    mu2 = float(mu2)
    if not mu2 > 0:
        raise ValueError(f"mu2 must be positive, got {mu2}")
    s = math.sqrt(mu2 + float(a) * float(a))
    return (-0.5 + abs(s - 1.0), -0.5 + (s + 1.0))


@dataclass
class Channel:
    """One radial channel of the degree-p problem.

    cone_potential: (c,) for scalars, ((c11, c12), (c12, c22)) for H5.
    handle_mass: the transversal eigenvalue mu^2; the handle/cylinder mass
        term is handle_mass / rho^2.
    gammas: indicial tip exponents, ascending; one per branch (H5 has two).
    interface_weights: w per section component; the derivative jump at a
        profile slope break is (slope difference) * w / rho.
    slots: section slot per component, 'beta' (dt-slot) or 'alpha'
        (tangential); decides the orientation flips at left junctions.
    prune_bound: rigorous lower bound for every eigenvalue of this channel;
        also the threshold used to prune channels above lam_max.
    """

    kind: str
    n: int
    p: int
    mu2: Scalar
    mult: int
    cone_potential: tuple
    handle_mass: Scalar
    gammas: tuple[float, ...]
    interface_weights: tuple[Fraction, ...]
    slots: tuple[str, ...]
    prune_bound: float

    @property
    def ncomp(self) -> int:
        return 2 if self.kind == "H5" else 1

    def potential_matrix(self) -> np.ndarray:
        return np.atleast_2d(np.array(self.cone_potential, dtype=float))


def _scalar_channel(kind, dc, mu2, mult, shift: Fraction, w: Fraction, gamma: float,
                    slot: str, prune_bound: float) -> Channel:
    c = (mu2 + shift) if isinstance(mu2, Fraction) else float(mu2) + float(shift)
    return Channel(
        kind=kind,
        n=dc.n,
        p=dc.p,
        mu2=mu2,
        mult=mult,
        cone_potential=(c,),
        handle_mass=mu2,
        gammas=(gamma,),
        interface_weights=(w,),
        slots=(slot,),
        prune_bound=prune_bound,
    )


def enumerate_channels(ts: TransversalSpectrum, p: int, lam_max: float) -> list[Channel]:
    """All channels of degree p that can carry spectrum at or below lam_max.

    Scalar channels obey lambda >= mu^2 (completed-square form bound), so
    they are pruned iff mu^2 > lam_max.  The H5 pair keeps a 1/4 margin
    (pruned iff mu^2 - 1/4 > lam_max); the extra quarter covers the worst
    off-diagonal dip of the coupled potential.  Refuses to run when the
    cross-section data does not reach the window these rules need.
    """
    lam_max = float(lam_max)
    if not lam_max > 0:
        raise ValueError("lam_max must be positive")
    dc = degree_constants(ts.n, p)
    n = ts.n

    h5_possible = 1 <= p <= n
    required = lam_max + 0.25 if h5_possible else lam_max
    if float(ts.cutoff) < required - 1e-9:
        raise ValueError(
            f"transversal cutoff {float(ts.cutoff)} is below the window {required} "
            f"needed for degree {p} at lam_max={lam_max}; rebuild the spectrum "
            f"with a larger cutoff"
        )

    def keep_scalar(mu2) -> bool:
        return float(mu2) <= lam_max + 1e-12 * max(1.0, lam_max)

    def keep_pair(mu2) -> bool:
        return float(mu2) - 0.25 <= lam_max + 1e-12 * max(1.0, lam_max)

    out: list[Channel] = []

    b_prev = ts.betti[p - 1] if 0 <= p - 1 <= n else 0
    b_here = ts.betti[p] if 0 <= p <= n else 0

    if b_prev > 0:
        g1 = -0.5 + abs(float(dc.a) + 1.0)
        out.append(_scalar_channel("H1", dc, Fraction(0), b_prev, dc.f_pm2, dc.nu, g1, "beta", 0.0))
    if b_here > 0:
        g2 = -0.5 + abs(float(dc.a) - 1.0)
        out.append(_scalar_channel("H2", dc, Fraction(0), b_here, dc.f_p, dc.w_alpha, g2, "alpha", 0.0))

    for mu2, m in ts.exact(p - 1):
        if not keep_scalar(mu2):
            continue
        g3 = -0.5 + math.sqrt(float(mu2) + (float(dc.a) + 1.0) ** 2)
        out.append(_scalar_channel("H3", dc, mu2, m, dc.f_pm2, dc.nu, g3, "beta", float(mu2)))

    for mu2, m in ts.coexact_at(p):
        if not keep_scalar(mu2):
            continue
        g4 = -0.5 + math.sqrt(float(mu2) + (float(dc.a) - 1.0) ** 2)
        out.append(_scalar_channel("H4", dc, mu2, m, dc.f_p, dc.w_alpha, g4, "alpha", float(mu2)))

    for mu2, m in ts.coexact_at(p - 1):
        if not keep_pair(mu2):
            continue
        gm, gp = gamma_pm(float(mu2), float(dc.a))
        mu = math.sqrt(float(mu2))
        if isinstance(mu2, Fraction):
            c11, c22 = mu2 + dc.f_pm2, mu2 + dc.f_p
        else:
            c11, c22 = float(mu2) + float(dc.f_pm2), float(mu2) + float(dc.f_p)
        out.append(
            Channel(
                kind="H5",
                n=n,
                p=p,
                mu2=mu2,
                mult=m,
                cone_potential=((c11, -2.0 * mu), (-2.0 * mu, c22)),
                handle_mass=mu2,
                gammas=(gm, gp),
                interface_weights=(dc.nu, dc.w_alpha),
                slots=("beta", "alpha"),
                prune_bound=float(mu2) - 0.25,
            )
        )

    order = {"H1": 0, "H2": 1, "H3": 2, "H4": 3, "H5": 4}
    out.sort(key=lambda c: (order[c.kind], float(c.mu2)))
    return out


@dataclass
class ExtensionRegime:
    """Self-adjoint extension data for one degree.

    gamma_in_gap lists (gamma, mu2, mult) for Mellin-symbol eigenvalues in
    the open gap ]-1/2, 1/2[, with gamma reported as sqrt(mu2 + a_p^2) - 1/2
    for the coupled pairs and 0 for harmonic couplings.  Empty gap means the
    operator is essentially self-adjoint in degree p.
    """

    p: int
    gamma_in_gap: list[tuple[float, Scalar, int]]
    essentially_selfadjoint: bool
    case_tag: str  # friedrichs | dmin_dmax | coupled-middle | unclassified


def spectrum_of_A(ts: TransversalSpectrum, lam_A: float):
    """Spectrum of the degree-shift symbol A in [-lam_A, lam_A], aggregated
    over all degrees, plus the per-degree extension regimes.

    Per coexact q-eigenvalue mu^2 the total space contributes the quadruple
    +-1/2 +- sqrt(mu^2 + a_{q+1}^2); each harmonic q-class contributes
    n/2 - q and q - n/2 once per slot copy.
    """
    lam_A = float(lam_A)
    n = ts.n
    need = (lam_A + 0.5) ** 2
    if float(ts.cutoff) < need - 1e-9:
        raise ValueError(
            f"transversal cutoff {float(ts.cutoff)} cannot certify the A-spectrum "
            f"window [-{lam_A}, {lam_A}] (needs cutoff >= {need})"
        )

    agg: list[tuple[float, int]] = []

    def push(val: float, mult: int):
        if abs(val) <= lam_A + 1e-12 and mult > 0:
            agg.append((val, mult))

    for q in range(n + 1):
        a_next = float(Fraction(n + 1, 2) - (q + 1))
        for mu2, m in ts.coexact_at(q):
            s = math.sqrt(float(mu2) + a_next * a_next)
            for sign_half in (0.5, -0.5):
                for sign_s in (1.0, -1.0):
                    push(sign_half + sign_s * s, m)
        bq = ts.betti[q]
        push(n / 2.0 - q, bq)
        push(q - n / 2.0, bq)

    # merge coincident values
    agg.sort(key=lambda t: t[0])
    merged: list[tuple[float, int]] = []
    for v, m in agg:
        if merged and abs(merged[-1][0] - v) <= 1e-12:
            merged[-1] = (merged[-1][0], merged[-1][1] + m)
        else:
            merged.append((v, m))

    regimes: dict[int, ExtensionRegime] = {}
    for p in range(0, n + 2):
        regimes[p] = _extension_regime(ts, p)
    return merged, regimes


def _extension_regime(ts: TransversalSpectrum, p: int) -> ExtensionRegime:
    n = ts.n
    dc = degree_constants(n, p)
    gap: list[tuple[float, Scalar, int]] = []

    for mu2, m in ts.coexact_at(p - 1):
        # s < 1 strictly; rationals decide exactly
        s2 = (mu2 + dc.a * dc.a) if isinstance(mu2, Fraction) else float(mu2) + float(dc.a) ** 2
        in_gap = s2 < 1 if isinstance(s2, Fraction) else s2 < 1.0 - 1e-14
        if in_gap:
            gap.append((math.sqrt(float(s2)) - 0.5, mu2, m))
    b_prev = ts.betti[p - 1] if 0 <= p - 1 <= n else 0
    b_here = ts.betti[p] if 0 <= p <= n else 0
    if dc.nu == 0 and b_prev > 0:
        gap.append((0.0, Fraction(0), b_prev))
    if dc.w_alpha == 0 and b_here > 0:
        gap.append((0.0, Fraction(0), b_here))

    middle_even = n % 2 == 0 and p in (n // 2, n // 2 + 1)
    if middle_even and ts.betti[n // 2] > 0:
        tag = "coupled-middle"
    elif n % 2 == 1 and 2 * p == n + 1 and any(
        (mu2 < 1 if isinstance(mu2, Fraction) else float(mu2) < 1.0 - 1e-14)
        for mu2, _ in ts.coexact_at(p - 1)
    ):
        tag = "dmin_dmax"
    else:
        tag = "friedrichs"

    return ExtensionRegime(
        p=p,
        gamma_in_gap=gap,
        essentially_selfadjoint=not gap,
        case_tag=tag,
    )


def n_operator_singular(gamma: float, mu: float, p: int, n: int) -> bool:
    """Whether the interface normal-operator family degenerates at (gamma, mu).

    True exactly on the minus branch of the middle degree (n odd,
    p = (n+1)/2) for mu in ]0, 1], where gamma = 1/2 - mu.  gamma must be an
    admissible tip exponent for (mu, p, n).
    """
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    dc = degree_constants(n, p)
    mu2 = float(mu) ** 2
    a = float(dc.a)
    gm, gp = gamma_pm(mu2, a)
    g3 = -0.5 + math.sqrt(mu2 + (a + 1.0) ** 2)
    g4 = -0.5 + math.sqrt(mu2 + (a - 1.0) ** 2)
    admissible = {"minus": gm, "plus": gp, "h3": g3, "h4": g4}
    match = None
    for name, val in admissible.items():
        if abs(val - float(gamma)) <= 1e-9 * max(1.0, abs(val)):
            match = name
            break
    if match is None:
        raise ValueError(
            f"gamma={gamma} is not an admissible tip exponent for mu={mu}, p={p}, n={n} "
            f"(candidates {sorted(set(admissible.values()))})"
        )
    return match == "minus" and 2 * p == n + 1 and mu <= 1.0 + 1e-12


def h5_rotation(mu: float, p: int, n: int, lam_s: float) -> np.ndarray:
    """Orthogonal matrix whose columns diagonalize the H5 cone potential to
    diag(lam_-, lam_+).  Column for eigenvalue lam is proportional to
    (2 mu / (mu^2 + f(p-2) - lam), 1); the denominator is 2(s +- a) and
    cannot vanish for mu > 0 (checked)."""
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    dc = degree_constants(n, p)
    mu2 = float(mu) ** 2
    gm, gp = gamma_pm(mu2, float(dc.a))
    lam_m, lam_p = gm * (gm + 1.0), gp * (gp + 1.0)
    if not (
        abs(lam_s - lam_m) <= 1e-9 * max(1.0, abs(lam_m))
        or abs(lam_s - lam_p) <= 1e-9 * max(1.0, abs(lam_p))
    ):
        raise ValueError(
            f"lam_s={lam_s} is not an indicial eigenvalue (expected {lam_m} or {lam_p})"
        )
    c11 = mu2 + float(dc.f_pm2)
    cols = []
    for lam in (lam_m, lam_p):
        den = c11 - lam
        if abs(den) < 1e-13 * max(1.0, abs(c11)):
            raise ValueError("degenerate rotation denominator; requires mu > 0")
        v = np.array([2.0 * mu / den, 1.0])
        cols.append(v / math.sqrt(v @ v))
    R = np.column_stack(cols)
    return R


def channel_rotation(ch: Channel) -> np.ndarray:
    """Rotation from branch coordinates to (beta, alpha) section components.

    Identity for scalar channels; the h5_rotation for pairs.
    """
    if ch.kind != "H5":
        return np.eye(1)
    gm = ch.gammas[0]
    return h5_rotation(math.sqrt(float(ch.mu2)), ch.p, ch.n, gm * (gm + 1.0))


def export_channels_csv(channels: list[Channel], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "p", "mu2", "mult", "gamma_minus", "gamma_plus", "cone_potential"])
        for c in channels:
            if c.kind == "H5":
                gm, gp = c.gammas
                pot = ";".join(
                    repr(float(x)) for x in (c.cone_potential[0][0], c.cone_potential[0][1], c.cone_potential[1][1])
                )
                w.writerow([c.kind, c.p, str(c.mu2), c.mult, repr(gm), repr(gp), pot])
            else:
                w.writerow(
                    [c.kind, c.p, str(c.mu2), c.mult, repr(c.gammas[0]), "", repr(float(c.cone_potential[0]))]
                )
