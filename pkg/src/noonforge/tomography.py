"""Maximum-likelihood homodyne tomography in the Fock basis.

The estimator bins quadrature records, builds one POVM element per occupied
(phase, bin) cell and iterates ``rho <- N[R rho R]`` with
``R = sum_j (f_j / p_j) Pi_j``. If an undiluted step would lower the
likelihood, the step is diluted, ``rho <- N[(1 + eps R) rho (1 + eps R)]``,
with ``eps`` halved until the likelihood no longer decreases.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_cutoff, check_in_range, check_positive_int
from .errors import ConfigError
from .fock_core import DensityOp
from .homodyne import GRID_LIMIT, QuadratureDataset, quadrature_vectors, trapezoid_weights
from .optical_circuit import loss_channel

logger = logging.getLogger(__name__)

GRID_STEP = 0.01
MONOTONE_SLACK = 1e-12
MIN_PHASES = 2


def binned_povm(theta: float, x_bin, eta: float, cutoff: int) -> np.ndarray:
    """POVM element for a quadrature result in ``x_bin = (lo, hi)`` at phase ``theta``.

    The projector ``|X_theta><X_theta|`` is integrated over the bin and then
    pulled back through the loss of a detector with efficiency ``eta``, so that
    probabilities refer to the state before detection loss.
    """
    lo, hi = map(float, x_bin)
    if not hi > lo:
        raise ConfigError(f"empty bin {x_bin}", "x_bin")
    return _bin_povms(theta, np.array([[lo, hi]]), eta, check_cutoff(cutoff))[0]


def _bin_povms(theta, edges, eta, cutoff):
    eta = check_in_range(eta, 0.0, 1.0, "efficiency", low_open=True)
    widths = edges[:, 1] - edges[:, 0]
    k = max(1, int(math.ceil(np.max(widths) / GRID_STEP - 1e-9)))
    frac = np.linspace(0.0, 1.0, k + 1)
    pts = edges[:, :1] + widths[:, None] * frac[None, :]
    w = trapezoid_weights(frac)[None, :] * widths[:, None]
    v = quadrature_vectors(cutoff, pts.reshape(-1), theta).reshape(cutoff + 1, len(edges), k + 1)
    povm = np.einsum("mbs,bs,nbs->bmn", v, w, v.conj())
    if eta < 1.0:
        kraus = np.array(loss_channel(eta, cutoff).operators)
        povm = np.einsum("kim,bij,kjn->bmn", kraus.conj(), povm, kraus)
    return povm


@dataclass(frozen=True)
class TomographySettings:
    cutoff: int = 4
    efficiency: float | tuple = 1.0
    bin_width: float = 0.05
    max_iterations: int = 5000
    convergence_tol: float = 1e-10
    bootstrap_resamples: int = 20

    def __post_init__(self):
        check_cutoff(self.cutoff)
        effs = self.efficiency if isinstance(self.efficiency, (tuple, list)) else (self.efficiency,)
        for e in effs:
            check_in_range(e, 0.0, 1.0, "efficiency", low_open=True)
        check_in_range(self.bin_width, 0.0, 2 * GRID_LIMIT, "bin_width", low_open=True)
        check_positive_int(self.max_iterations, "max_iterations")
        check_in_range(self.convergence_tol, 0.0, np.inf, "convergence_tol", low_open=True)
        if isinstance(self.efficiency, list):
            object.__setattr__(self, "efficiency", tuple(self.efficiency))

    def estimator(self, **overrides) -> "MaxLikTomography":
        params = dict(
            cutoff=self.cutoff,
            efficiency=self.efficiency,
            bin_width=self.bin_width,
            max_iterations=self.max_iterations,
            convergence_tol=self.convergence_tol,
        )
        params.update(overrides)
        return MaxLikTomography(**params)


class _Binned:
    """Occupied measurement cells of a dataset and their POVM factors."""

    def __init__(self, data: QuadratureDataset, cutoff, efficiencies, bin_width, x_limit):
        if data.n_modes not in (1, 2):
            raise ConfigError("tomography supports one- and two-mode data", "modes")
        n_bins = int(round(2 * x_limit / bin_width))
        bins = np.floor((data.x + x_limit) / bin_width).astype(int)
        inside = np.all((bins >= 0) & (bins < n_bins), axis=1)
        dropped = int((~inside).sum())
        if dropped:
            logger.info("dropping %d records outside +-%g", dropped, x_limit)
        bins, theta = bins[inside], np.round(data.theta[inside], 12)
        settings, setting_idx = np.unique(theta, axis=0, return_inverse=True)
        setting_idx = setting_idx.reshape(-1)
        if len(settings) < MIN_PHASES:
            raise ConfigError(f"need at least {MIN_PHASES} distinct phase settings, got {len(settings)}", "theta")
        self.n_modes = data.n_modes
        self.cutoff = cutoff
        self.factors, factor_idx = [], []
        for mode in range(data.n_modes):
            keys, inv = np.unique(np.stack([theta[:, mode], bins[:, mode]], axis=1), axis=0, return_inverse=True)
            povms = np.empty((len(keys), cutoff + 1, cutoff + 1), dtype=complex)
            for th in np.unique(keys[:, 0]):
                sel = np.flatnonzero(keys[:, 0] == th)
                b = keys[sel, 1]
                edges = np.stack([-x_limit + b * bin_width, -x_limit + (b + 1) * bin_width], axis=1)
                povms[sel] = _bin_povms(th, edges, efficiencies[mode], cutoff)
            self.factors.append(povms)
            factor_idx.append(inv.reshape(-1))
        cell_keys = np.stack([setting_idx] + factor_idx, axis=1)
        cells, cell_inv, counts = np.unique(cell_keys, axis=0, return_inverse=True, return_counts=True)
        self.cell_setting = cells[:, 0]
        self.cell_factor = [cells[:, 1 + m] for m in range(data.n_modes)]
        self.counts = counts.astype(float)
        self.record_cell = np.full(len(data), -1)
        self.record_cell[np.flatnonzero(inside)] = cell_inv.reshape(-1)
        self.n_settings = len(settings)
        self.dim = (cutoff + 1) ** data.n_modes

    def weights(self, counts):
        per_setting = np.bincount(self.cell_setting, weights=counts, minlength=self.n_settings)
        used = per_setting > 0
        w = np.zeros_like(counts)
        nz = per_setting[self.cell_setting] > 0
        w[nz] = counts[nz] / per_setting[self.cell_setting][nz] / used.sum()
        return w

    def probabilities(self, rho):
        d = self.cutoff + 1
        if self.n_modes == 1:
            q = np.real(np.einsum("uab,ba->u", self.factors[0], rho))
            return q[self.cell_factor[0]]
        pa, pb = self.factors
        r4 = rho.reshape(d, d, d, d)
        m = np.einsum("abcd,uca->ubd", r4, pa)
        return np.real(np.einsum("jbd,jdb->j", m[self.cell_factor[0]], pb[self.cell_factor[1]]))

    def r_operator(self, coeff):
        if self.n_modes == 1:
            q = np.bincount(self.cell_factor[0], weights=coeff, minlength=len(self.factors[0]))
            return np.einsum("u,uab->ab", q, self.factors[0])
        d = self.cutoff + 1
        pa, pb = self.factors
        c = sparse.csr_matrix((coeff, (self.cell_factor[0], self.cell_factor[1])), shape=(len(pa), len(pb)))
        s = (c @ pb.reshape(len(pb), -1)).reshape(len(pa), d, d)
        return np.einsum("uac,ubd->abcd", pa, s).reshape(d * d, d * d)


def _loglik(counts, p):
    mask = counts > 0
    return float(np.sum(counts[mask] * np.log(np.clip(p[mask], 1e-300, None))))


def _normalized(m):
    m = 0.5 * (m + m.conj().T)
    return m / np.real(np.trace(m))


def _rrho_r(binned, counts, rho0, max_iterations, tol):
    w = binned.weights(counts)
    mask = counts > 0
    rho = rho0
    p = binned.probabilities(rho)
    ll = _loglik(counts, p)
    history = [ll]
    monotone, converged = True, False
    eye = np.eye(binned.dim)
    for _ in range(max_iterations):
        coeff = np.zeros_like(w)
        coeff[mask] = w[mask] / np.clip(p[mask], 1e-300, None)
        r = binned.r_operator(coeff)
        cand = _normalized(r @ rho @ r)
        p_new = binned.probabilities(cand)
        ll_new = _loglik(counts, p_new)
        eps = 1.0
        while ll_new < ll - MONOTONE_SLACK * abs(ll) and eps > 1e-8:
            g = eye + eps * r
            cand = _normalized(g @ rho @ g)
            p_new = binned.probabilities(cand)
            ll_new = _loglik(counts, p_new)
            eps /= 2
        if ll_new < ll - MONOTONE_SLACK * abs(ll):
            monotone = False
        rho, p = cand, p_new
        history.append(ll_new)
        change = abs(ll_new - ll) / max(abs(ll), 1e-300)
        ll = ll_new
        if change < tol:
            converged = True
            break
    return rho, np.array(history), converged, monotone


class MaxLikTomography(BaseEstimator):
    """Iterative maximum-likelihood reconstruction from a :class:`QuadratureDataset`.

    ``efficiency`` is the homodyne detection efficiency to correct for (one
    value, or one per mode). After ``fit`` the estimate is in ``state_`` and the
    diagnostics in ``loglik_history_``, ``n_iter_``, ``converged_`` and
    ``monotone_``.
    """

    def __init__(
        self,
        cutoff=4,
        efficiency=1.0,
        bin_width=0.05,
        max_iterations=5000,
        convergence_tol=1e-10,
        x_limit=GRID_LIMIT,
    ):
        self.cutoff = cutoff
        self.efficiency = efficiency
        self.bin_width = bin_width
        self.max_iterations = max_iterations
        self.convergence_tol = convergence_tol
        self.x_limit = x_limit

    def _efficiencies(self, n_modes):
        e = self.efficiency
        effs = tuple(e) if isinstance(e, (tuple, list, np.ndarray)) else (e,) * n_modes
        if len(effs) != n_modes:
            raise ConfigError(f"need {n_modes} efficiencies, got {len(effs)}", "efficiency")
        return effs

    def _bin(self, data):
        if not isinstance(data, QuadratureDataset):
            raise ConfigError("expected a QuadratureDataset", "data")
        TomographySettings(self.cutoff, self._efficiencies(data.n_modes), self.bin_width,
                           self.max_iterations, self.convergence_tol)
        return _Binned(data, self.cutoff, self._efficiencies(data.n_modes), self.bin_width, self.x_limit)

    def fit(self, X, y=None, init=None):
        binned = self._bin(X)
        rho0 = np.eye(binned.dim, dtype=complex) / binned.dim if init is None else np.asarray(init)
        rho, hist, conv, mono = _rrho_r(binned, binned.counts, rho0, self.max_iterations, self.convergence_tol)
        if not conv:
            logger.warning("MaxLik did not converge in %d iterations", self.max_iterations)
        self.binned_ = binned
        self.state_ = DensityOp(rho, binned.n_modes, self.cutoff)
        self.loglik_history_ = hist
        self.n_iter_ = len(hist) - 1
        self.converged_ = conv
        self.monotone_ = mono
        return self

    def diagnostics(self) -> dict:
        check_is_fitted(self, "state_")
        return {
            "iterations": int(self.n_iter_),
            "final_loglik": float(self.loglik_history_[-1]),
            "converged": bool(self.converged_),
            "monotone": bool(self.monotone_),
        }

    def score(self, X, y=None) -> float:
        """Mean binned log-likelihood per record of ``X`` under the fitted state."""
        check_is_fitted(self, "state_")
        binned = self._bin(X)
        p = binned.probabilities(np.asarray(self.state_.matrix))
        return _loglik(binned.counts, p) / binned.counts.sum()

    def bootstrap(self, X, n_resamples=20, seed=0) -> np.ndarray:
        """Elementwise standard deviation of the estimate over bootstrap replicas.

        Replicas resample the records with replacement (a multinomial draw over
        the occupied cells). Each replica restarts from the maximally mixed
        state: with a relative-likelihood stopping rule a warm start would stop
        after a few steps and understate the spread.
        """
        if isinstance(n_resamples, bool) or not isinstance(n_resamples, (int, np.integer)) or n_resamples < 10:
            raise ConfigError(f"bootstrap_resamples must be an integer >= 10, got {n_resamples!r}",
                              "bootstrap_resamples")
        binned = self.fit(X).binned_
        rng = np.random.default_rng(seed)
        total = int(binned.counts.sum())
        probs = binned.counts / total
        reps = []
        for _ in range(n_resamples):
            counts = rng.multinomial(total, probs).astype(float)
            rho0 = np.eye(binned.dim, dtype=complex) / binned.dim
            rho, *_ = _rrho_r(binned, counts, rho0, self.max_iterations, self.convergence_tol)
            reps.append(rho)
        reps = np.array(reps)
        return np.sqrt(np.var(reps.real, axis=0) + np.var(reps.imag, axis=0))


def maxlik_reconstruct(data: QuadratureDataset, settings: TomographySettings = TomographySettings()):
    """Reconstruct a density operator; returns ``(DensityOp, diagnostics dict)``."""
    est = settings.estimator().fit(data)
    return est.state_, est.diagnostics()


def bootstrap_errors(data: QuadratureDataset, settings: TomographySettings = TomographySettings(), seed=0):
    est = settings.estimator()
    return est.bootstrap(data, settings.bootstrap_resamples, seed)
