"""Quadratures, Fock wavefunctions, homodyne sampling and remote conditioning.

Convention: ``X_theta = (a e^{-i theta} + a^dag e^{i theta}) / sqrt2``, so the
vacuum variance is 1/2 and ``X_{pi/2}`` is the momentum quadrature. The
eigenvector ``|X_theta>`` has Fock components ``<m|X_theta> = e^{i m theta}
psi_m(X)`` with the normalized Hermite functions ``psi_m``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_cutoff, check_in_range, check_mode, check_positive_int
from .errors import ConfigError, NumericalGuardError
from .fock_core import DensityOp, FockKet, annihilation, partial_trace

GRID_LIMIT = 6.0
GRID_POINTS = 1201
DEFAULT_WINDOW = 0.1
SAMPLE_CHUNK = 1 << 16
NORM_TOL = 1e-6


def quadrature_grid(limit: float = GRID_LIMIT, points: int = GRID_POINTS) -> np.ndarray:
    return np.linspace(-limit, limit, points)


def trapezoid_weights(x: np.ndarray) -> np.ndarray:
    h = np.diff(x)
    w = np.zeros(len(x))
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def hermite_functions(cutoff: int, x) -> np.ndarray:
    """``psi_m(x)`` for ``m = 0..cutoff``; shape ``(cutoff + 1,) + x.shape``.

    Computed by the stable three-term recursion of the normalized functions.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((cutoff + 1,) + x.shape)
    out[0] = np.pi**-0.25 * np.exp(-(x**2) / 2)
    if cutoff >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for m in range(1, cutoff):
        out[m + 1] = math.sqrt(2.0 / (m + 1)) * x * out[m] - math.sqrt(m / (m + 1)) * out[m - 1]
    return out


def fock_wavefunction(m: int, x, theta: float = 0.0):
    """``<m|X_theta> = e^{i m theta} pi^{-1/4} e^{-x^2/2} H_m(x) / sqrt(2^m m!)``."""
    m = check_cutoff(m, "m")
    return np.exp(1j * m * theta) * hermite_functions(m, x)[m]


def quadrature_vectors(cutoff: int, x, theta: float) -> np.ndarray:
    """Columns ``<m|X_theta>`` for every ``x``; shape ``(cutoff + 1, len(x))``."""
    phase = np.exp(1j * theta * np.arange(cutoff + 1))
    return phase[:, None] * hermite_functions(cutoff, np.atleast_1d(x))


def quadrature_operator(theta: float, cutoff: int) -> np.ndarray:
    a = annihilation(check_cutoff(cutoff))
    return (a * np.exp(-1j * theta) + a.conj().T * np.exp(1j * theta)) / math.sqrt(2.0)


def _quadrature_power(theta, power, cutoff):
    # built on an enlarged space so that truncation does not corrupt X^p
    big = quadrature_operator(theta, cutoff + power)
    return np.linalg.matrix_power(big, power)[: cutoff + 1, : cutoff + 1]


@dataclass(frozen=True)
class QuadratureSetting:
    theta_a: float
    theta_b: float

    def __post_init__(self):
        object.__setattr__(self, "theta_a", float(self.theta_a) % (2 * math.pi))
        object.__setattr__(self, "theta_b", float(self.theta_b) % (2 * math.pi))

    @property
    def delta(self) -> float:
        return self.theta_a - self.theta_b


def joint_moment(state, s: QuadratureSetting, p: int, q: int) -> float:
    """``Tr[rho X_{theta_A}^p (x) X_{theta_B}^q]`` for a two-mode state."""
    if isinstance(state, FockKet):
        state = state.to_density()
    if state.mode_count != 2:
        raise ConfigError("joint_moment needs a two-mode state", "state")
    c = state.cutoff
    xa = _quadrature_power(s.theta_a, p, c)
    xb = _quadrature_power(s.theta_b, q, c)
    val = np.trace(state.matrix @ np.kron(xa, xb))
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise NumericalGuardError(f"joint moment has imaginary part {val.imag:.3g}")
    return float(val.real)


def single_mode_moment(state, theta: float, power: int) -> float:
    if isinstance(state, FockKet):
        state = state.to_density()
    if state.mode_count != 1:
        raise ConfigError("single_mode_moment needs a single-mode state", "state")
    x = _quadrature_power(theta, power, state.cutoff)
    return float(np.real(np.trace(state.matrix @ x)))


def quadrature_variance(state, theta: float) -> float:
    return single_mode_moment(state, theta, 2) - single_mode_moment(state, theta, 1) ** 2


def squeezing_db(state, theta: float) -> float:
    """``10 log10(Var(X_theta) / (1/2))``; negative below vacuum noise."""
    return 10.0 * math.log10(quadrature_variance(state, theta) / 0.5)


def optimal_squeezing(state) -> tuple:
    """Phase of minimal quadrature variance and the squeezing there (dB)."""
    if isinstance(state, FockKet):
        state = state.to_density()
    a = annihilation(state.cutoff + 2)[: state.cutoff + 1, : state.cutoff + 1]
    rho = state.matrix
    a1 = np.trace(rho @ a)
    a2 = np.trace(rho @ a @ a)
    n = np.real(np.trace(rho @ a.conj().T @ a))
    m = a2 - a1**2
    # Var(X_theta) = 1/2 + n - |<a>|^2 + Re(m e^{-2 i theta})
    theta = (float(np.angle(m)) + math.pi) / 2 % math.pi
    return theta, squeezing_db(state, theta)


def marginal_density(state, theta: float, x) -> np.ndarray:
    """``p(x|theta) = <X_theta|rho|X_theta>`` of a single-mode state."""
    if isinstance(state, FockKet):
        state = state.to_density()
    if state.mode_count != 1:
        raise ConfigError("marginal_density needs a single-mode state", "state")
    v = quadrature_vectors(state.cutoff, x, theta)
    return np.real(np.einsum("mx,mn,nx->x", v.conj(), state.matrix, v))


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True, eq=False)
class QuadratureDataset:
    """Homodyne records; ``x`` and ``theta`` have shape ``(n_records, len(modes))``.

    Single-mode data have one column; joint two-mode data have one column per
    mode, each row being one simultaneous record.
    """

    x: np.ndarray
    theta: np.ndarray
    modes: tuple = (0,)
    seed: int | None = None
    source_state_id: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        th = np.atleast_2d(np.asarray(self.theta, dtype=float))
        if x.shape[0] == 1 and len(self.modes) == 1 and x.shape[1] != 1:
            x, th = x.T, th.T
        if x.shape != th.shape or x.shape[1] != len(self.modes):
            raise ConfigError(f"x {x.shape} / theta {th.shape} inconsistent with modes {self.modes}", "x")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(th)):
            raise ConfigError("quadrature records must be finite", "x")
        x.setflags(write=False)
        th.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))

    def __len__(self):
        return self.x.shape[0]

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def take(self, idx) -> "QuadratureDataset":
        return QuadratureDataset(self.x[idx], self.theta[idx], self.modes, self.seed, self.source_state_id)

    @classmethod
    def concatenate(cls, parts) -> "QuadratureDataset":
        parts = list(parts)
        return cls(
            np.concatenate([p.x for p in parts]),
            np.concatenate([p.theta for p in parts]),
            parts[0].modes,
            parts[0].seed,
            parts[0].source_state_id,
        )

    def to_csv(self, path) -> tuple:
        """Write ``mode_id,theta_rad,x`` rows (one row per mode of each record)
        plus a JSON sidecar; returns both paths."""
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mode_id", "theta_rad", "x"])
            for xs, ts in zip(self.x, self.theta):
                for mode, th, xv in zip(self.modes, ts, xs):
                    w.writerow([mode, f"{th:.12g}", f"{xv:.12g}"])
        sidecar = path.with_suffix(".json")
        sidecar.write_text(
            json.dumps(
                {"seed": self.seed, "source_state_id": self.source_state_id, "modes": list(self.modes),
                 "n_records": len(self)},
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )
        return path, sidecar

    @classmethod
    def from_csv(cls, path) -> "QuadratureDataset":
        path = Path(path)
        sidecar = path.with_suffix(".json")
        meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        ids = rows[:, 0].astype(int)
        modes = tuple(meta.get("modes", sorted(set(ids.tolist()))))
        k = len(modes)
        if len(rows) % k or np.any(ids.reshape(-1, k) != np.array(modes)):
            raise ConfigError(f"{path}: rows do not cycle through modes {modes}", "mode_id")
        return cls(
            rows[:, 2].reshape(-1, k),
            rows[:, 1].reshape(-1, k),
            modes,
            meta.get("seed"),
            meta.get("source_state_id", ""),
        )


def _cell_sampler(density, grid, u_cell, u_pos):
    """Inverse-CDF draw from a piecewise-linear-CDF density on ``grid``."""
    h = np.diff(grid)
    mass = 0.5 * (density[:-1] + density[1:]) * h
    mass = np.clip(mass, 0.0, None)
    cdf = np.cumsum(mass)
    total = cdf[-1]
    idx = np.searchsorted(cdf, u_cell * total, side="right")
    idx = np.minimum(idx, len(mass) - 1)
    return grid[idx] + u_pos * h[idx]


def _chunk_generators(seed, n_samples):
    n_chunks = max(1, -(-n_samples // SAMPLE_CHUNK))
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seqs = root.spawn(n_chunks)
    sizes = [SAMPLE_CHUNK] * (n_chunks - 1) + [n_samples - SAMPLE_CHUNK * (n_chunks - 1)]
    return [(np.random.default_rng(s), n) for s, n in zip(seqs, sizes)]


def sample_homodyne(state, mode: int, theta, n_samples: int, seed: int, source_state_id: str = ""):
    """Draw ``n_samples`` quadrature values of ``mode`` at each phase in ``theta``.

    Sampling uses the inverse CDF of the marginal tabulated on the quadrature
    grid. Draws are made in fixed-size chunks with seeds spawned from ``seed``,
    so the result does not depend on how chunks are scheduled.
    """
    n_samples = check_positive_int(n_samples, "n_samples")
    if isinstance(state, FockKet):
        state = state.to_density()
    mode = check_mode(mode, state.mode_count)
    if abs(state.trace() - 1.0) > NORM_TOL:
        raise ConfigError(f"state is not normalized (trace {state.trace():.9g})", "state")
    single = partial_trace(state, [mode]) if state.mode_count > 1 else state
    thetas = np.atleast_1d(np.asarray(theta, dtype=float))
    grid = quadrature_grid()
    seeds = np.random.SeedSequence(seed).spawn(len(thetas))
    xs, ts = [], []
    for th, sq in zip(thetas, seeds):
        dens = marginal_density(single, th, grid)
        parts = []
        for rng, n in _chunk_generators(sq, n_samples):
            u = rng.random((2, n))
            parts.append(_cell_sampler(dens, grid, u[0], u[1]))
        xs.append(np.concatenate(parts))
        ts.append(np.full(n_samples, th))
    return QuadratureDataset(np.concatenate(xs)[:, None], np.concatenate(ts)[:, None], (mode,), seed, source_state_id)


def joint_density(state: DensityOp, theta_a: float, theta_b: float, grid) -> np.ndarray:
    """``p(x_A, x_B)`` of a two-mode state on ``grid x grid``."""
    c = state.cutoff
    va = quadrature_vectors(c, grid, theta_a)
    vb = quadrature_vectors(c, grid, theta_b)
    rho = state.tensor  # (a, b, a', b')
    t = np.einsum("mx,mknl,nx->xkl", va.conj(), rho, va, optimize=True)
    return np.real(np.einsum("ky,xkl,ly->xy", vb.conj(), t, vb, optimize=True))


def sample_joint_homodyne(state, settings, n_per_setting: int, seed: int, source_state_id: str = ""):
    """Joint records ``(x_A, x_B)`` of a two-mode state for each phase pair in ``settings``."""
    n = check_positive_int(n_per_setting, "n_per_setting")
    if isinstance(state, FockKet):
        state = state.to_density()
    if state.mode_count != 2:
        raise ConfigError("joint sampling needs a two-mode state", "state")
    if abs(state.trace() - 1.0) > NORM_TOL:
        raise ConfigError(f"state is not normalized (trace {state.trace():.9g})", "state")
    grid = quadrature_grid()
    h = np.diff(grid)
    seeds = np.random.SeedSequence(seed).spawn(len(settings))
    xs, ts = [], []
    for s, sq in zip(settings, seeds):
        if not isinstance(s, QuadratureSetting):
            s = QuadratureSetting(*s)
        p = np.clip(joint_density(state, s.theta_a, s.theta_b, grid), 0.0, None)
        cell = 0.25 * (p[:-1, :-1] + p[1:, :-1] + p[:-1, 1:] + p[1:, 1:]) * np.outer(h, h)
        row_mass = cell.sum(axis=1)
        row_cdf = np.cumsum(row_mass)
        row_cdf_cells = np.cumsum(cell, axis=1)
        parts = []
        for rng, m in _chunk_generators(sq, n):
            u = rng.random((4, m))
            i = np.minimum(np.searchsorted(row_cdf, u[0] * row_cdf[-1], side="right"), len(h) - 1)
            j = np.empty(m, dtype=int)
            for row in np.unique(i):
                sel = i == row
                rc = row_cdf_cells[row]
                j[sel] = np.searchsorted(rc, u[1, sel] * rc[-1], side="right")
            j = np.minimum(j, len(h) - 1)
            parts.append(np.stack([grid[i] + u[2] * h[i], grid[j] + u[3] * h[j]], axis=1))
        xs.append(np.concatenate(parts))
        ts.append(np.tile([s.theta_a, s.theta_b], (n, 1)))
    return QuadratureDataset(np.concatenate(xs), np.concatenate(ts), (0, 1), seed, source_state_id)


# ---------------------------------------------------------------------------
# remote preparation


def window_projector(theta: float, x_center: float, window: float, cutoff: int, points: int = 41):
    """``int |X_theta><X_theta| dX`` over ``[x_center - window/2, x_center + window/2]``."""
    window = check_in_range(window, 0.0, np.inf, "window", low_open=True, high_open=True)
    xs = np.linspace(x_center - window / 2, x_center + window / 2, points)
    v = quadrature_vectors(cutoff, xs, theta) * np.sqrt(trapezoid_weights(xs))[None, :]
    return v @ v.conj().T


def remote_condition(state, alice_mode: int, theta: float, x_center: float, window: float = DEFAULT_WINDOW):
    """Bob's state after Alice's quadrature result falls in the window.

    Returns ``(DensityOp | None, acceptance_probability)``; ``None`` signals a
    null result.
    """
    if isinstance(state, FockKet):
        state = state.to_density()
    if state.mode_count != 2:
        raise ConfigError("remote_condition needs a two-mode state", "state")
    alice_mode = check_mode(alice_mode, 2, "alice_mode")
    proj = window_projector(theta, x_center, window, state.cutoff)
    rho = state.tensor
    if alice_mode == 0:
        bob = np.einsum("nm,mbnc->bc", proj, rho)
    else:
        bob = np.einsum("nm,amcn->ac", proj, rho)
    prob = float(np.real(np.trace(bob)))
    if prob < 1e-300:
        return None, max(prob, 0.0)
    bob = 0.5 * (bob + bob.conj().T)
    return DensityOp(bob / prob, 1, state.cutoff), prob
