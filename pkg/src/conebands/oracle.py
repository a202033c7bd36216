"""Brute-force reference solver: quadratic-form discretization per channel.

Discretizes q(sigma) = integral |sigma' + B sigma|^2 over one period with the
quasi-periodic wrap sigma(T) = e^{i theta} sigma(0), where B is the
first-order warp coefficient

    B = A0 / rho + (rho'/rho) * diag(channel weights).

For scalar channels the slot restriction is rectangular: the in-slot row
(rho'/rho) w pairs with the derivative, and an out-of-slot row mu/rho acts
as a pure mass (a literal scalar sum would create a spurious cross term).
For the coupled pair A0 = [[0, -mu], [-mu, 0]]; squaring reproduces the cone
potential exactly on both cones (global frame) and mu^2/rho^2 on flats, and
the slope breaks of rho' produce the transmission conditions variationally,
with no hand-coded interface stencils.  That independence is the point: this
module never touches the transfer-matrix code path.

Works for smoothed profiles (eta > 0) unchanged, since only rho and rho'
enter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, eigh

from .channels import Channel
from .radial import NumericalError, Profile

DENSITY_CAP = 8.0  # node density multiplier, relative to 1/rho growth
MAX_CONE_PIECES = 6


def warp_coefficient(channel: Channel, profile: Profile, t: float) -> np.ndarray:
    """First-order coefficient B at period coordinate t.

    Scalar channels: shape (2, 1), rows [(rho'/rho) w, mu/rho].
    Pair channels: symmetric (2, 2), A0/rho + (rho'/rho) diag(nu, w_alpha).
    """
    rho = profile.rho(t)
    if not rho > 0:
        raise NumericalError(f"profile radius vanished at t={t}")
    rp = profile.rho_prime(t)
    mu = math.sqrt(float(channel.handle_mass))
    if channel.ncomp == 1:
        w = float(channel.interface_weights[0])
        return np.array([[w * rp / rho], [mu / rho]])
    nu = float(channel.interface_weights[0])
    wa = float(channel.interface_weights[1])
    A0 = np.array([[0.0, -mu], [-mu, 0.0]])
    return A0 / rho + (rp / rho) * np.diag([nu, wa])


# ---------------------------------------------------------------------------
# grid


def _piece_counts(profile: Profile, n_total: int) -> list[tuple[float, float, int]]:
    """Piecewise-uniform grid plan: (tau_a, tau_b, intervals) per piece.

    Cones are split dyadically in rho (at most MAX_CONE_PIECES pieces) and
    every piece gets node density proportional to min(1/rho_min, cap), so
    resolution follows the 1/rho^2 growth of the potential into the handle.
    """
    pieces: list[tuple[float, float, float]] = []  # (a, b, rho_min)
    for seg in profile.segments:
        if seg.kind in ("cylinder", "handle"):
            pieces.append((seg.tau0, seg.tau1, seg.rho(seg.tau0)))
        elif seg.kind == "corner":
            rmin = min(seg.rho(seg.tau0), seg.rho(seg.tau1), seg.corner_rho)
            pieces.append((seg.tau0, seg.tau1, rmin))
        else:
            lo = min(seg.rho(seg.tau0), seg.rho(seg.tau1))
            hi = max(seg.rho(seg.tau0), seg.rho(seg.tau1))
            bounds = [lo]
            while bounds[-1] < hi and len(bounds) < MAX_CONE_PIECES:
                bounds.append(min(hi, 2.0 * bounds[-1]))
            bounds[-1] = hi
            descending = seg.slope_in < 0

            def tau_of_rho(r: float) -> float:
                return seg.tau0 + (r - seg.rho(seg.tau0)) / seg.slope_in

            rr = bounds[::-1] if descending else bounds
            for r0, r1 in zip(rr, rr[1:]):
                a, b = tau_of_rho(r0), tau_of_rho(r1)
                pieces.append((a, b, min(r0, r1)))

    weights = [(b - a) * min(1.0 / r, DENSITY_CAP) for a, b, r in pieces]
    wsum = sum(weights)
    out = []
    for (a, b, _), w in zip(pieces, weights):
        out.append((a, b, max(2, round(n_total * w / wsum))))
    return out


def _nodes_from_counts(counts: list[tuple[float, float, int]]) -> np.ndarray:
    nodes = [np.linspace(a, b, k, endpoint=False) for a, b, k in counts]
    return np.concatenate(nodes)


# ---------------------------------------------------------------------------
# assembly


@dataclass
class FormMatrix:
    """Discretized quadratic form: stiffness K, diagonal mass W, grid nodes.

    K is Hermitian by construction (entrywise, exactly); complex entries
    appear only through the wrap-around phase.  W holds the trapezoid node
    weights, repeated per section component.
    """

    K: np.ndarray
    W: np.ndarray
    nodes: np.ndarray
    theta: float


def assemble(channel: Channel, theta: float, profile: Profile, N: int) -> FormMatrix:
    """Midpoint discretization of q on a grid of about N intervals.

    Per interval: h |(s_next - s_j)/h + B(t_mid)(s_j + s_next)/2|^2, the last
    interval wrapping to e^{i theta} s_0.  Continuity of the global unknown
    vector encodes the interface value condition exactly and the derivative
    jump weakly.
    """
    if N < 100:
        raise ValueError(f"grid size N must be at least 100, got {N}")
    return _assemble_counts(channel, theta, profile, _piece_counts(profile, N))


def _assemble_counts(channel: Channel, theta: float, profile: Profile,
                     counts: list[tuple[float, float, int]]) -> FormMatrix:
    nodes = _nodes_from_counts(counts)
    M = len(nodes)
    m = channel.ncomp
    dim = m * M
    antiperiodic = abs(math.remainder(theta, 2.0 * math.pi)) >= math.pi - 1e-12
    is_real = abs(math.remainder(theta, math.pi)) <= 1e-12
    dtype = float if is_real else complex
    phase = (-1.0 if antiperiodic else 1.0) if is_real else np.exp(1j * theta)

    # in-slot derivative injection
    if m == 1:
        S = np.array([[1.0], [0.0]])
    else:
        S = np.eye(2)

    K = np.zeros((dim, dim), dtype=dtype)
    T = profile.T
    hs = np.empty(M)
    for j in range(M):
        jn = (j + 1) % M
        t0 = nodes[j]
        t1 = nodes[j + 1] if j + 1 < M else T
        h = t1 - t0
        if not h > 0:
            raise ValueError("non-positive grid step")
        hs[j] = h
        E = warp_coefficient(channel, profile, 0.5 * (t0 + t1))
        P = -S / h + 0.5 * E
        Q = S / h + 0.5 * E
        ph = phase if jn == 0 else 1.0
        for k in range(E.shape[0]):
            c = np.zeros(2 * m, dtype=dtype)
            c[:m] = P[k]
            c[m:] = ph * Q[k]
            local = np.outer(np.conj(c), c)
            # numpy's vectorized outer can leave 1-ulp imaginary dust on the
            # diagonal; averaging with the adjoint restores exact Hermiticity
            local = h * (0.5 * (local + local.conj().T))
            idx = list(range(j * m, j * m + m)) + list(range(jn * m, jn * m + m))
            K[np.ix_(idx, idx)] += local

    W = np.empty(dim)
    for j in range(M):
        wj = 0.5 * (hs[j - 1] + hs[j])
        W[j * m : (j + 1) * m] = wj
    return FormMatrix(K=K, W=W, nodes=nodes, theta=theta)


# ---------------------------------------------------------------------------
# eigenvalues


def dense_hermitian_eigenvalues(K: np.ndarray, W: np.ndarray,
                                lam_window: tuple[float, float] | None = None
                                ) -> np.ndarray:
    """Ascending eigenvalues of the pencil (K, W) with W positive diagonal.

    Reduces to W^{-1/2} K W^{-1/2}; complex Hermitian input is realified to
    the doubled real symmetric problem [[Re, -Im], [Im, Re]] and the exact
    eigenvalue pairs are de-duplicated afterwards.
    """
    W = np.asarray(W, dtype=float)
    if K.shape[0] != K.shape[1] or K.shape[0] != W.shape[0]:
        raise ValueError("dimension mismatch between K and W")
    if not np.all(W > 0):
        raise ValueError("mass matrix must be positive")
    d = 1.0 / np.sqrt(W)
    H = d[:, None] * K * d[None, :]
    doubled = np.iscomplexobj(H)
    if doubled:
        Hr = np.block([[H.real, -H.imag], [H.imag, H.real]])
    else:
        Hr = H
    kwargs = {}
    if lam_window is not None:
        kwargs = {"subset_by_value": lam_window, "driver": "evr"}
    try:
        evs = eigh(Hr, eigvals_only=True, **kwargs)
    except LinAlgError as exc:
        raise NumericalError(f"eigensolver failed to converge: {exc}") from exc
    evs = np.sort(evs)
    if not doubled:
        return evs
    if len(evs) % 2 != 0:
        raise NumericalError(
            "realified spectrum has odd length; the doubling pairing broke "
            "(likely an eigenvalue sitting on the window edge)"
        )
    a, b = evs[0::2], evs[1::2]
    tol = 1e-8 * np.maximum(1.0, np.abs(a))
    if np.any(np.abs(a - b) > tol):
        k = int(np.argmax(np.abs(a - b) - tol))
        raise NumericalError(
            f"realification pair {k} split: {a[k]} vs {b[k]}"
        )
    return a


def oracle_eigenvalues(channel: Channel, theta: float, profile: Profile,
                       lam_max: float, N: int = 500,
                       richardson: bool = True) -> list[float]:
    """Reference eigenvalues <= lam_max for one channel and quasimomentum.

    With richardson (default), solves on the N grid and the exactly doubled
    grid and combines index-paired eigenvalues as (4 l_2N - l_N) / 3.
    """
    if N < 100:
        raise ValueError(f"grid size N must be at least 100, got {N}")
    lam_max = float(lam_max)
    counts = _piece_counts(profile, N)
    window = (-1.0, lam_max + 1.0)

    def solve(cts):
        fm = _assemble_counts(channel, theta, profile, cts)
        return dense_hermitian_eigenvalues(fm.K, fm.W, lam_window=window)

    e1 = solve(counts)
    if not richardson:
        return [float(x) for x in e1 if x <= lam_max]
    e2 = solve([(a, b, 2 * k) for a, b, k in counts])
    npair = min(len(e1), len(e2))
    out = []
    for k in range(npair):
        drift = abs(e2[k] - e1[k])
        if drift > 0.5:
            raise NumericalError(
                f"Richardson pairing broke at index {k}: drift {drift}"
            )
        lam = (4.0 * e2[k] - e1[k]) / 3.0
        if lam <= lam_max:
            out.append(float(lam))
    return out
