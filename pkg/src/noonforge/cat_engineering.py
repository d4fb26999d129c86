"""Coherent-state superpositions, Wigner functions and best-fit cat search.

Squeezing convention: ``S(z) = exp(z/2 (a^2 - a^dag^2))``, so ``z > 0``
squeezes the ``theta = 0`` quadrature, ``Var(X_0) = exp(-2 z) / 2`` on vacuum.
Squeezed cats are built in a large working space and truncated afterwards.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import eval_genlaguerre, gammaln
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_cutoff
from .errors import ConfigError, NumericalGuardError
from .fock_core import DensityOp, FockKet, apply_channel
from .heralding import noon_ket
from .homodyne import DEFAULT_WINDOW, remote_condition
from .optical_circuit import loss_channel

logger = logging.getLogger(__name__)

WORKING_CUTOFF = 160
TRUNCATION_TOL = 1e-6
ALPHA_MAX = 3.0
Z_MAX = 1.0
GRID_STEP = 0.02
REFINE_TOL = 1e-4
TIE_TOL = 1e-12
FIG5_ALICE_EFFICIENCY = 0.55
FIG5_ALICE_PHASE = math.pi / 2

_PARITY_SIGN = {"even": 1.0, "odd": -1.0}


@dataclass(frozen=True)
class CssParams:
    alpha: complex
    z: float = 0.0
    parity: str = "even"

    def __post_init__(self):
        if self.parity not in _PARITY_SIGN:
            raise ConfigError(f"parity must be 'even' or 'odd', got {self.parity!r}", "parity")
        a, z = complex(self.alpha), float(self.z)
        if not (np.isfinite(a) and np.isfinite(z)):
            raise ConfigError("alpha and z must be finite", "alpha")
        if self.parity == "odd" and abs(a) == 0:
            raise ConfigError("the odd superposition vanishes at alpha = 0", "alpha")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "z", z)

    def to_dict(self, fidelity: float | None = None) -> dict:
        out = {
            "alpha": self.alpha.real if self.alpha.imag == 0 else [self.alpha.real, self.alpha.imag],
            "z": self.z,
            "parity": self.parity,
        }
        if fidelity is not None:
            out["fidelity"] = float(fidelity)
        return out

    def to_json(self, fidelity: float | None = None) -> str:
        return json.dumps(self.to_dict(fidelity), sort_keys=True)


def coherent_amplitudes(alpha: complex, cutoff: int) -> np.ndarray:
    """Fock amplitudes of the coherent state ``|alpha>`` up to ``cutoff``."""
    n = np.arange(cutoff + 1)
    alpha = complex(alpha)
    if alpha == 0:
        out = np.zeros(cutoff + 1, dtype=complex)
        out[0] = 1.0
        return out
    logmag = -0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(logmag + 1j * n * np.angle(alpha))


@lru_cache(maxsize=8)
def _squeeze_eig(dim: int, parity: int):
    # a^2 - a^dag^2 is real antisymmetric and keeps photon-number parity, so
    # h = i(a^2 - a^dag^2) is diagonalized on the even and odd blocks separately.
    n = np.arange(parity, dim, 2)
    off = np.sqrt(n[:-1] + 1.0) * np.sqrt(n[:-1] + 2.0)  # <n|a^2|n+2>
    a2 = np.diag(off, 1)
    h = 1j * (a2 - a2.T)
    w, v = np.linalg.eigh(h)
    return n, w, v


def squeeze_operator(z: float, dim: int = WORKING_CUTOFF + 1) -> np.ndarray:
    """``S(z)`` on a truncated space of dimension ``dim``; accurate well below the edge."""
    out = np.zeros((dim, dim), dtype=complex)
    for parity in (0, 1):
        n, w, v = _squeeze_eig(dim, parity)
        # z/2 (a^2 - a^dag^2) = -i z/2 h
        out[np.ix_(n, n)] = (v * np.exp(-0.5j * z * w)) @ v.conj().T
    return out


def _css_norm(alpha, parity) -> float:
    s = _PARITY_SIGN[parity]
    return math.sqrt(2.0 * (1.0 + s * math.exp(-2.0 * abs(alpha) ** 2)))


def _css_working(p: CssParams, dim: int) -> np.ndarray:
    s = _PARITY_SIGN[p.parity]
    # <n|-alpha> = (-1)^n <n|alpha>; combining the signs first keeps the
    # wrong-parity amplitudes exactly zero
    vec = coherent_amplitudes(p.alpha, dim - 1) * (1.0 + s * (-1.0) ** np.arange(dim))
    if p.z != 0:
        vec = squeeze_operator(p.z, dim) @ vec
    return vec / _css_norm(p.alpha, p.parity)


def squeezed_css_state(p: CssParams, cutoff: int, working_cutoff: int = WORKING_CUTOFF) -> FockKet:
    """``S(z)(|alpha> + parity |-alpha>)``, normalized and truncated at ``cutoff``.

    Raises :class:`NumericalGuardError` if more than 1e-6 of the weight lies
    above ``cutoff`` (or near the edge of the working space).
    """
    cutoff = check_cutoff(cutoff)
    dim = max(working_cutoff, cutoff + 20) + 1
    vec = _css_working(p, dim)
    edge = float(np.sum(np.abs(vec[-20:]) ** 2))
    if edge > TRUNCATION_TOL:
        raise NumericalGuardError(f"working space too small for {p}: edge weight {edge:.3g}")
    tail = float(np.sum(np.abs(vec[cutoff + 1 :]) ** 2))
    if tail > TRUNCATION_TOL:
        raise NumericalGuardError(f"{p} leaks {tail:.3g} beyond cutoff {cutoff}")
    return FockKet(vec[: cutoff + 1], cutoff).normalize()


# -- Wigner functions ---------------------------------------------------------


@dataclass(frozen=True)
class WignerGrid:
    """Wigner function sampled on ``q x p``; ``values[i, j] = W(q[i], p[j])``."""

    q: np.ndarray
    p: np.ndarray
    values: np.ndarray

    @property
    def resolution(self) -> tuple:
        return len(self.q), len(self.p)

    @property
    def q_range(self) -> tuple:
        return float(self.q[0]), float(self.q[-1])

    @property
    def p_range(self) -> tuple:
        return float(self.p[0]), float(self.p[-1])

    def integral(self) -> float:
        return float(np.trapezoid(np.trapezoid(self.values, self.p, axis=1), self.q))

    def at(self, q: float, p: float) -> float:
        i, j = np.argmin(np.abs(self.q - q)), np.argmin(np.abs(self.p - p))
        return float(self.values[i, j])

    def to_csv(self, path) -> tuple:
        """Write ``q,p,W`` rows and a JSON header next to it; returns both paths."""
        path = Path(path)
        qq, pp = np.meshgrid(self.q, self.p, indexing="ij")
        table = np.column_stack([qq.ravel(), pp.ravel(), self.values.ravel()])
        np.savetxt(path, table, fmt="%.12g", delimiter=",", header="q,p,W", comments="")
        header = path.with_suffix(".json")
        header.write_text(
            json.dumps(
                {"q_range": list(self.q_range), "p_range": list(self.p_range), "resolution": list(self.resolution)},
                sort_keys=True,
                indent=2,
            )
            + "\n"
        )
        return path, header

    @classmethod
    def from_csv(cls, path) -> "WignerGrid":
        path = Path(path)
        head = json.loads(path.with_suffix(".json").read_text())
        nq, npts = head["resolution"]
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(table[::npts, 0].copy(), table[:npts, 1].copy(), table[:, 2].reshape(nq, npts))


def wigner(state, q_range=(-4.0, 4.0), p_range=(-4.0, 4.0), resolution=(161, 161)) -> WignerGrid:
    """Wigner function of a single-mode state with ``X = (a + a^dag)/sqrt2``.

    Normalized to unit integral; the vacuum gives ``W(0, 0) = 1/pi``.
    """
    if isinstance(state, FockKet):
        state = state.to_density()
    if state.mode_count != 1:
        raise ConfigError(f"wigner needs a single-mode state, got {state.mode_count} modes", "state")
    q = np.linspace(*q_range, int(resolution[0]))
    p = np.linspace(*p_range, int(resolution[1]))
    qq, pp = np.meshgrid(q, p, indexing="ij")
    return WignerGrid(q, p, wigner_values(state, qq, pp))


def wigner_values(state: DensityOp, q, p) -> np.ndarray:
    rho = np.asarray(state.matrix)
    beta = np.asarray(q) - 1j * np.asarray(p)
    r2 = np.abs(beta) ** 2
    gauss = np.exp(-r2) / math.pi
    out = np.zeros(beta.shape)
    d = rho.shape[0]
    for n in range(d):
        for m in range(n, d):
            c = rho[m, n]
            if c == 0:
                continue
            k = m - n
            coef = (-1) ** n * math.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)))
            term = coef * (math.sqrt(2.0) * beta) ** k * eval_genlaguerre(n, k, 2.0 * r2) * gauss
            out += (c * term).real if k == 0 else 2.0 * (c * term).real
    return out


def parity_expectation(state: DensityOp) -> float:
    pops = state.populations()
    return float(np.sum(pops * (-1.0) ** np.arange(len(pops))))


# -- best-fit search ----------------------------------------------------------


def _fit_dim(cutoff):
    return max(WORKING_CUTOFF, cutoff + 20) + 1


def _css_fidelity(rho, cutoff, alpha, z, parity):
    vec = _css_working(CssParams(alpha, z, parity), _fit_dim(cutoff))[: cutoff + 1]
    return float(np.real(vec.conj() @ rho @ vec))


def _grid_fidelities(rho, cutoff, alphas, zs, parity):
    dim = _fit_dim(cutoff)
    s = _PARITY_SIGN[parity]
    coh = np.stack([coherent_amplitudes(a, dim - 1) + s * coherent_amplitudes(-a, dim - 1) for a in alphas], axis=1)
    norms = np.array([_css_norm(a, parity) if (parity == "even" or a > 0) else np.inf for a in alphas])
    out = np.empty((len(alphas), len(zs)))
    for j, z in enumerate(zs):
        vec = (squeeze_operator(z, dim)[: cutoff + 1] @ coh) / norms
        out[:, j] = np.real(np.einsum("ia,ij,ja->a", vec.conj(), rho, vec))
    return out


def best_css_fit(state, parity: str = "even", alpha_max: float = ALPHA_MAX, z_max: float = Z_MAX,
                 step: float = GRID_STEP, tol: float = REFINE_TOL):
    """Squeezed cat ``(alpha >= 0 real, z)`` of highest fidelity with ``state``.

    A coarse grid locates the basin (ties go to the smaller ``alpha``), then
    bounded one-dimensional searches alternate over ``alpha`` and ``z``
    until both move by less than ``tol``. Returns ``(CssParams, fidelity)``.
    """
    if isinstance(state, FockKet):
        state = state.to_density()
    if state.mode_count != 1:
        raise ConfigError(f"best_css_fit needs a single-mode state, got {state.mode_count} modes", "state")
    rho = np.asarray(state.matrix)
    cutoff = state.cutoff
    alphas = np.round(np.arange(0.0, alpha_max + step / 2, step), 10)
    zs = np.round(np.arange(-z_max, z_max + step / 2, step), 10)
    surf = _grid_fidelities(rho, cutoff, alphas, zs, parity)
    best = np.max(surf)
    ia, iz = np.argwhere(surf >= best - TIE_TOL)[0]
    alpha, z, f = float(alphas[ia]), float(zs[iz]), float(surf[ia, iz])
    alpha_lo = 1e-6 if parity == "odd" else 0.0
    for _ in range(50):
        moved = 0.0
        res = minimize_scalar(
            lambda a: -_css_fidelity(rho, cutoff, a, z, parity),
            bounds=(max(alpha_lo, alpha - step), min(alpha_max, alpha + step)),
            method="bounded",
            options={"xatol": tol / 10},
        )
        if -res.fun > f:
            moved = max(moved, abs(res.x - alpha))
            alpha, f = float(res.x), float(-res.fun)
        res = minimize_scalar(
            lambda t: -_css_fidelity(rho, cutoff, alpha, t, parity),
            bounds=(max(-z_max, z - step), min(z_max, z + step)),
            method="bounded",
            options={"xatol": tol / 10},
        )
        if -res.fun > f:
            moved = max(moved, abs(res.x - z))
            z, f = float(res.x), float(-res.fun)
        if moved < tol:
            break
    return CssParams(alpha, z, parity), f


class CssFitter(BaseEstimator):
    """Estimator wrapper around :func:`best_css_fit`.

    ``fit`` takes a single-mode state; the result is in ``params_`` and
    ``fidelity_``. ``score`` returns the fidelity of another state with the
    fitted cat.
    """

    def __init__(self, parity="even", alpha_max=ALPHA_MAX, z_max=Z_MAX, step=GRID_STEP, tol=REFINE_TOL):
        self.parity = parity
        self.alpha_max = alpha_max
        self.z_max = z_max
        self.step = step
        self.tol = tol

    def fit(self, X, y=None):
        self.params_, self.fidelity_ = best_css_fit(X, self.parity, self.alpha_max, self.z_max, self.step, self.tol)
        return self

    def score(self, X, y=None) -> float:
        check_is_fitted(self, "params_")
        if isinstance(X, FockKet):
            X = X.to_density()
        return _css_fidelity(np.asarray(X.matrix), X.cutoff, self.params_.alpha, self.params_.z, self.params_.parity)


# -- remote preparation on a N00N state ---------------------------------------


def remote_bob_state(
    x_alice: float,
    alice_efficiency: float = FIG5_ALICE_EFFICIENCY,
    theta: float = FIG5_ALICE_PHASE,
    window: float = DEFAULT_WINDOW,
    source: DensityOp | None = None,
):
    """Bob's mode after Alice's homodyne result ``x_alice`` on a two-photon N00N state.

    Alice's detection efficiency is modelled as loss on her mode before an
    ideal homodyne measurement. The default phase ``pi/2`` orients Bob's state
    so that the cat fit lands on real ``alpha``. Returns ``(DensityOp | None,
    acceptance probability)``.
    """
    if source is None:
        source = noon_ket(2, 2).to_density()
    rho = source
    if alice_efficiency < 1.0:
        rho = apply_channel(rho, loss_channel(alice_efficiency, rho.cutoff), 0)
    return remote_condition(rho, 0, theta, x_alice, window)
