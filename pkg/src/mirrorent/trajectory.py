"""Monte-Carlo trajectories of the linear stochastic dynamics and simulated readout.

Stepping is exact for a linear system with white noise: over a step h,

    v <- M_h v + w,   M_h = exp(A h),   w ~ N(0, C_h),   C_h = int_0^h M(s) D M(s)^T ds,

so there is no discretization bias and any step size gives the same
stationary statistics. C_h comes from Van Loan's block exponential, which is
independent of the Lyapunov solver the sampler is meant to check.

Readout: each mirror is monitored by a weak auxiliary cavity (no back-action).
Per bin of width tau_b the two output quadratures are

    X_k = -g_k * pbar_k + shot,   Y_k = g_k * qbar_k + shot,   g_k = G2_k / sqrt(kappa2_k),

with qbar, pbar the bin averages and the shot noise drawn with variance
1/(2 tau_b) per bin (white unit-spectral-density noise averaged over the bin).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

from .dynamics import Basis, LinearModel, stability
from .entanglement import log_negativity_from_nu, nu_minus
from .errors import NonPhysicalCM, PSDRepairExceeded, Unstable, WrongBasis
from .steadystate import MirrorCM, lyapunov_steady

PSD_REPAIR_RTOL = 1e-8


class StepSizeWarning(UserWarning):
    pass


class ReadoutWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SamplerSpec:
    """`samples` counts recorded states (or bins) summed over all chains."""

    model: LinearModel
    h: float
    burn_in: int = 0
    samples: int = 10_000
    seed: int = 0
    chains: int = 1
    init: str = "zeros"
    batches: int = 32

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("step h must be > 0")
        if self.samples < 1000:
            raise ValueError("need at least 1000 samples")
        if self.batches < 30:
            raise ValueError("batch-means error estimates need >= 30 batches")
        if self.init not in ("zeros", "stationary"):
            raise ValueError("init must be 'zeros' or 'stationary'")
        if self.chains < 1 or self.burn_in < 0:
            raise ValueError("chains >= 1 and burn_in >= 0 required")
        norm = float(np.abs(self.model.A).sum(axis=1).max())
        if self.h * norm > 0.5:
            warnings.warn(
                f"h*||A|| = {self.h * norm:.3g} > 0.5; stepping stays exact but fast "
                "oscillations are not resolved between recorded samples",
                StepSizeWarning,
                stacklevel=3,
            )


@dataclass(frozen=True)
class ReadoutSpec:
    g2: tuple[float, float]
    kappa2: tuple[float, float]
    bin_time: float

    def __post_init__(self):
        if not self.bin_time > 0:
            raise ValueError("bin_time must be > 0")
        if any(k <= 0 for k in self.kappa2):
            raise ValueError("kappa2 must be > 0")

    @classmethod
    def symmetric(cls, g2, kappa2, bin_time):
        return cls((g2, g2), (kappa2, kappa2), bin_time)

    @property
    def gains(self) -> np.ndarray:
        return np.array([g / math.sqrt(k) for g, k in zip(self.g2, self.kappa2)])

    @property
    def shot_variance(self) -> float:
        return 1.0 / (2.0 * self.bin_time)


def _make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _child_seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def _van_loan(A: np.ndarray, D: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """exp(A h) and int_0^h exp(A s) D exp(A s)^T ds; no stability needed.

    The block exponential is taken on a step with h*||A|| <= 0.5 and then
    doubled with C_2h = M_h C_h M_h^T + C_h.
    """
    n = A.shape[0]
    norm = float(np.abs(A).sum(axis=1).max())
    k = max(0, math.ceil(math.log2(h * norm / 0.5))) if norm > 0 else 0
    h0 = h / 2**k
    H = np.zeros((2 * n, 2 * n))
    H[:n, :n] = A * h0
    H[:n, n:] = D * h0
    H[n:, n:] = -A.T * h0
    F = expm(H)
    M = F[:n, :n]
    Q = F[:n, n:] @ M.T
    for _ in range(k):
        Q = M @ Q @ M.T + Q
        M = M @ M
    return M, (Q + Q.T) / 2


def _clamp_psd(Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Floor negative eigenvalues at zero; returns (Q_psd, square-root factor L, L L^T = Q_psd).

    The factor is taken in the diagonally rescaled (correlation) basis: step
    covariances mix entries many decades apart and an unscaled eigh would
    swamp the small ones with round-off.
    """
    Q = (Q + Q.T) / 2
    w = np.linalg.eigvalsh(Q)
    scale = max(float(np.abs(w).max()), np.finfo(float).tiny)
    if w.min() < -PSD_REPAIR_RTOL * scale:
        raise PSDRepairExceeded(f"step covariance has eigenvalue {w.min():.3e} (scale {scale:.3e})")
    d = np.sqrt(np.diag(Q).clip(min=0.0))
    s = np.where(d > 0, d, 1.0)
    w, U = np.linalg.eigh(Q / np.outer(s, s))
    L = (U * np.sqrt(w.clip(min=0.0))) * s[:, None]
    return L @ L.T, L


def exact_step_operators(model: LinearModel, h: float, method: str = "vanloan") -> tuple[np.ndarray, np.ndarray]:
    """(M_h, C_h) for one exact step of length h.

    method="vanloan" integrates the noise directly; method="lyapunov" uses
    C_h = C_inf - M_h C_inf M_h^T with C_inf from the Lyapunov solver.
    """
    if not stability(model).stable_eig:
        raise Unstable("exact stepping toward a stationary state needs a stable model")
    if method == "vanloan":
        M, Q = _van_loan(model.A, model.D, h)
    elif method == "lyapunov":
        C = lyapunov_steady(model).C
        M = expm(model.A * h)
        Q = C - M @ C @ M.T
    else:
        raise ValueError(f"unknown method {method!r}")
    Q, _ = _clamp_psd(Q)
    return M, Q


@dataclass(frozen=True)
class StationaryEstimate:
    C: np.ndarray
    stderr: np.ndarray
    n_samples: int
    n_batches: int

    @property
    def effective_samples(self) -> float:
        """Smallest over the diagonal of Var_gauss(x_i^2) / SE^2, Var_gauss = 2 C_ii^2."""
        d = np.diag(self.C)
        se = np.diag(self.stderr)
        return float(np.min(2 * d**2 / np.maximum(se, 1e-300) ** 2))


def long_time_covariance(model: LinearModel, decay: float = 40.0) -> np.ndarray:
    """C_h at h = decay / |max Re lambda|: the stationary CM up to exp(-2*decay).

    Integrates the noise directly, so stationary starts do not lean on the
    Lyapunov solver.
    """
    margin = stability(model).margin
    if margin >= 0:
        raise Unstable("no stationary state")
    return _van_loan(model.A, model.D, decay / abs(margin))[1]


def _initial_state(spec: SamplerSpec, rng, n_chains: int) -> np.ndarray:
    n = spec.model.A.shape[0]
    if spec.init == "zeros":
        return np.zeros((n, n_chains))
    _, L = _clamp_psd(long_time_covariance(spec.model))
    return L @ rng.standard_normal((n, n_chains))


def _batch_edges(total: int, batches: int) -> np.ndarray:
    return np.linspace(0, total, batches + 1).round().astype(int)


def sample_stationary(spec: SamplerSpec) -> StationaryEstimate:
    """Estimate the stationary CM from sampled trajectories, with batch-means errors.

    Chains advance together. With at least as many chains as batches, a batch
    is a group of whole chains, so batches are independent by construction;
    otherwise batches are contiguous blocks of steps. Second moments are taken
    about zero (the process is zero-mean).
    """
    model = spec.model
    n = model.A.shape[0]
    M, Q = exact_step_operators(model, spec.h)
    _, L = _clamp_psd(Q)
    rng = _make_rng(spec.seed)
    chains, nb = spec.chains, spec.batches
    steps = math.ceil(spec.samples / chains)
    by_chain = chains >= nb
    if not by_chain and steps < nb:
        raise ValueError("fewer steps per chain than batches")
    x = _initial_state(spec, rng, chains)
    for _ in range(spec.burn_in):
        x = M @ x + L @ rng.standard_normal((n, chains))
    sums = np.zeros((nb, n, n))
    if by_chain:
        groups = _batch_edges(chains, nb)
        counts = np.diff(groups) * steps
        for _ in range(steps):
            x = M @ x + L @ rng.standard_normal((n, chains))
            for b, (lo, hi) in enumerate(zip(groups[:-1], groups[1:])):
                sums[b] += x[:, lo:hi] @ x[:, lo:hi].T
    else:
        edges = _batch_edges(steps, nb)
        counts = np.diff(edges) * chains
        b = 0
        for t in range(steps):
            x = M @ x + L @ rng.standard_normal((n, chains))
            while t >= edges[b + 1]:
                b += 1
            sums[b] += x @ x.T
    means = sums / counts[:, None, None]
    means = (means + means.transpose(0, 2, 1)) / 2
    C = sums.sum(axis=0) / counts.sum()
    C = (C + C.T) / 2
    se = means.std(axis=0, ddof=1) / math.sqrt(nb)
    return StationaryEstimate(C, se, int(counts.sum()), nb)


def _augmented_operators(model: LinearModel, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact step for (v, integral of the mirror quadratures)."""
    n = model.A.shape[0]
    m = 4
    A = np.zeros((n + m, n + m))
    A[:n, :n] = model.A
    A[n:, :m] = np.eye(m)
    D = np.zeros_like(A)
    D[:n, :n] = model.D
    M, Q = _van_loan(A, D, h)
    _, L = _clamp_psd(Q)
    return M, L


def mirror_frequencies(model: LinearModel) -> tuple[float, float]:
    return float(model.A[0, 1]), float(model.A[2, 3])


@dataclass(frozen=True)
class ReadoutRecords:
    """Binned homodyne records, chain-major (each chain's bins contiguous)."""

    X1: np.ndarray
    Y1: np.ndarray
    X2: np.ndarray
    Y2: np.ndarray
    bin_time: float
    gains: tuple[float, float]
    omegas: tuple[float, float]

    def stacked(self) -> np.ndarray:
        return np.vstack([self.X1, self.Y1, self.X2, self.Y2])

    def swapped(self) -> "ReadoutRecords":
        return ReadoutRecords(
            self.X2, self.Y2, self.X1, self.Y1, self.bin_time, self.gains[::-1], self.omegas[::-1]
        )

    def __len__(self):
        return len(self.X1)


def simulate_readout(spec: SamplerSpec, readout: ReadoutSpec) -> ReadoutRecords:
    """Binned output records of one readout cavity per mirror.

    `spec.h` must divide the bin time; bin integrals are sampled exactly
    together with the state, so no quadrature error enters the bin averages.
    """
    model = spec.model
    if model.basis is not Basis.PER_MIRROR:
        raise WrongBasis("readout simulation needs a per-mirror model")
    if not stability(model).stable_eig:
        raise Unstable("readout simulation needs a stable model")
    tau = readout.bin_time
    n_sub = max(1, round(tau / spec.h))
    if abs(n_sub * spec.h - tau) > 1e-9 * tau:
        raise ValueError("step h must divide the bin time")
    rates = np.abs(np.linalg.eigvals(model.A)).max()
    if min(readout.kappa2) < 10 * rates:
        warnings.warn("kappa2 not much larger than the mirror rates; adiabatic readout is questionable",
                      ReadoutWarning, stacklevel=2)
    n = model.A.shape[0]
    M, L = _augmented_operators(model, tau / n_sub)
    Ms, Qs = _van_loan(model.A, model.D, tau / n_sub)
    _, Ls = _clamp_psd(Qs)

    rng = _make_rng(spec.seed)
    chains = spec.chains
    bins = math.ceil(spec.samples / chains)
    x = _initial_state(spec, rng, chains)
    for _ in range(spec.burn_in):
        x = Ms @ x + Ls @ rng.standard_normal((n, chains))

    g = readout.gains
    shot = math.sqrt(readout.shot_variance)
    out = np.empty((4, bins, chains))
    z = np.zeros((n + 4, chains))
    for b in range(bins):
        z[:n] = x
        z[n:] = 0.0
        for _ in range(n_sub):
            z = M @ z + L @ rng.standard_normal((n + 4, chains))
        x = z[:n]
        avg = z[n:] / tau
        noise = rng.standard_normal((4, chains)) * shot
        out[0, b] = -g[0] * avg[1] + noise[0]
        out[1, b] = g[0] * avg[0] + noise[1]
        out[2, b] = -g[1] * avg[3] + noise[2]
        out[3, b] = g[1] * avg[2] + noise[3]
    flat = out.transpose(0, 2, 1).reshape(4, -1)
    return ReadoutRecords(*flat, bin_time=tau, gains=tuple(g), omegas=mirror_frequencies(model))


@dataclass
class RecordMoments:
    """Per-batch sums of r r^T, r = (X1, Y1, X2, Y2); merging concatenates batches."""

    sums: list = field(default_factory=list)
    counts: list = field(default_factory=list)
    bin_time: float | None = None
    gains: tuple | None = None
    omegas: tuple | None = None

    @classmethod
    def from_records(cls, records: ReadoutRecords, batches: int = 32) -> "RecordMoments":
        r = records.stacked()
        edges = _batch_edges(r.shape[1], batches)
        sums = [r[:, a:b] @ r[:, a:b].T for a, b in zip(edges[:-1], edges[1:])]
        counts = list(np.diff(edges))
        return cls(sums, counts, records.bin_time, tuple(records.gains), tuple(records.omegas))

    def merge(self, other: "RecordMoments") -> "RecordMoments":
        if self.bin_time is not None and other.bin_time is not None and (
            self.bin_time != other.bin_time or self.gains != other.gains
        ):
            raise ValueError("cannot merge moments from different readout settings")
        return RecordMoments(
            self.sums + other.sums,
            self.counts + other.counts,
            self.bin_time if self.bin_time is not None else other.bin_time,
            self.gains if self.gains is not None else other.gains,
            self.omegas if self.omegas is not None else other.omegas,
        )

    @property
    def n_records(self) -> int:
        return int(sum(self.counts))


def simulate_readout_moments(spec: SamplerSpec, readout: ReadoutSpec, chunks: int) -> RecordMoments:
    """Run `chunks` independent copies of `spec` (derived seeds), one batch each.

    Memory stays bounded by one chunk; the merge order is fixed so results
    depend only on (spec, chunks).
    """
    if chunks < 30:
        raise ValueError("need >= 30 chunks for batch-means errors")
    total = RecordMoments()
    for seed in _child_seeds(spec.seed, chunks):
        recs = simulate_readout(replace(spec, seed=seed), readout)
        r = recs.stacked()
        total = total.merge(
            RecordMoments([r @ r.T], [r.shape[1]], recs.bin_time, tuple(recs.gains), tuple(recs.omegas))
        )
    return total


def bin_rotation(omega: float, tau: float) -> np.ndarray:
    """R with (qbar, pbar) = R (q, p) for a free oscillator averaged over one bin."""
    th = omega * tau
    if th == 0:
        return np.eye(2)
    a = math.sin(th) / th
    b = (1 - math.cos(th)) / th
    return np.array([[a, b], [-b, a]])


def binned_covariance(model: LinearModel, tau: float) -> np.ndarray:
    """Exact stationary covariance of bin averages: (F C + C F^T) / tau^2.

    F = int_0^tau (tau - u) exp(A u) du comes from one block exponential.
    """
    n = model.A.shape[0]
    C = lyapunov_steady(model).C
    H = np.zeros((3 * n, 3 * n))
    H[:n, :n] = model.A * tau
    H[:n, n:2 * n] = np.eye(n) * tau
    H[n:2 * n, 2 * n:] = np.eye(n) * tau
    F = expm(H)[:n, 2 * n:]
    K = (F @ C + C @ F.T) / tau**2
    return (K + K.T) / 2


@dataclass(frozen=True)
class ReconstructedCM:
    cm: MirrorCM
    stderr: np.ndarray
    nu_minus: float
    nu_stderr: float
    nonpositive_diagonal: tuple

    @property
    def log_negativity(self) -> float:
        return log_negativity_from_nu(self.nu_minus)

    def entangled_with_confidence(self, z: float = 1.645) -> bool:
        """One-sided test nu_minus + z*SE < 1/2."""
        return bool(self.nu_minus + z * self.nu_stderr < 0.5)


def _invert_readout(R: np.ndarray, gains, tau, omegas, rotation: bool) -> np.ndarray:
    g1, g2 = gains
    # (q1, p1, q2, p2) = T (X1, Y1, X2, Y2)
    T = np.array(
        [
            [0.0, 1 / g1, 0.0, 0.0],
            [-1 / g1, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1 / g2],
            [0.0, 0.0, -1 / g2, 0.0],
        ]
    )
    V = T @ R @ T.T
    shot = 1.0 / (2.0 * tau)
    V[0, 0] -= shot / g1**2
    V[1, 1] -= shot / g1**2
    V[2, 2] -= shot / g2**2
    V[3, 3] -= shot / g2**2
    if rotation:
        Rinv = np.zeros((4, 4))
        Rinv[:2, :2] = np.linalg.inv(bin_rotation(omegas[0], tau))
        Rinv[2:, 2:] = np.linalg.inv(bin_rotation(omegas[1], tau))
        V = Rinv @ V @ Rinv.T
    return (V + V.T) / 2


def reconstruct_cm(data, batches: int = 32, rotation: bool = True) -> ReconstructedCM:
    """Estimate the mirror CM from readout records (or pre-accumulated moments).

    Equal-time correlators are rescaled by the readout gains, the shot-noise
    offset 1/(2 tau_b) is removed from same-record variances (records of
    different outputs carry independent noise), and with `rotation` the
    free-oscillation mixing inside one bin is undone. Errors are batch means.
    """
    mom = data if isinstance(data, RecordMoments) else RecordMoments.from_records(data, batches)
    if len(mom.counts) < 2:
        raise ValueError("need several batches")
    args = (mom.gains, mom.bin_time, mom.omegas, rotation)
    pooled = sum(mom.sums) / mom.n_records
    V = _invert_readout((pooled + pooled.T) / 2, *args)
    per_batch = np.array([_invert_readout((s + s.T) / (2 * c), *args) for s, c in zip(mom.sums, mom.counts)])
    nb = len(mom.counts)
    se = per_batch.std(axis=0, ddof=1) / math.sqrt(nb)

    bad = tuple(int(i) for i in np.flatnonzero(np.diag(V) <= 0))
    if bad:
        warnings.warn(f"non-positive reconstructed variances at {bad}", ReadoutWarning, stacklevel=2)
    try:
        nu = nu_minus(V)
        nus = np.array([nu_minus(v) for v in per_batch])
        nu_se = float(nus.std(ddof=1) / math.sqrt(nb))
    except NonPhysicalCM:
        nu, nu_se = float("nan"), float("nan")
    return ReconstructedCM(MirrorCM(V), se, nu, nu_se, bad)
