"""Optical elements: two-mode squeezed sources, passive two-mode mixers,
phase shifts, attenuation, and the temporal-mode split used for delays.

Mixer convention. ``linear_element(state, i, j, r, phi)`` maps creation
operators as::

    a_i^dag -> t a_i^dag + s a_j^dag
    a_j^dag -> e^{i phi} (-s a_i^dag + t a_j^dag),     t = sqrt(1 - r), s = sqrt(r)

i.e. a phase ``phi`` on mode ``j`` followed by a real mixer. With ``r = 0`` it
is a pure phase shift on mode ``j``. The symmetric beam splitter is
``r = 1/2, phi = pi``, giving ``(c, d) -> ((c + d)/sqrt2, (c - d)/sqrt2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import comb

from ._validation import check_cutoff, check_in_range, check_mode
from .errors import ConfigError, NumericalGuardError
from .fock_core import (
    DensityOp,
    FockKet,
    KrausChannel,
    apply_operator,
    tensor_product,
)

LEAKAGE_TOL = 1e-6
SYMMETRIC_BS_PHASE = math.pi
DEFAULT_COHERENCE_TIME_PS = 1.6


def db_to_transmission(loss_db: float) -> float:
    """Power transmission for a loss given in dB (10 dB -> 0.1)."""
    loss_db = check_in_range(loss_db, 0.0, np.inf, "loss_db", high_open=True)
    return 10.0 ** (-loss_db / 10.0)


@dataclass(frozen=True)
class SourceParams:
    """Down-conversion amplitude ``gamma`` and per-mode cutoff of a pair source."""

    gamma: complex
    cutoff: int = 6

    def __post_init__(self):
        check_cutoff(self.cutoff)
        g = complex(self.gamma)
        if not abs(g) < 1:
            raise ConfigError(f"|gamma| must be < 1, got {abs(g)}", "gamma")
        object.__setattr__(self, "gamma", g)
        if self.leakage() > LEAKAGE_TOL * (1 + 1e-9):
            raise NumericalGuardError(
                f"two-mode squeezed state with |gamma|={abs(g):.4g} leaks {self.leakage():.3g} "
                f"beyond cutoff {self.cutoff}"
            )

    @classmethod
    def from_pair_probability(cls, gamma_sq: float, cutoff: int = 6) -> "SourceParams":
        return cls(math.sqrt(gamma_sq), cutoff)

    def leakage(self) -> float:
        """Weight of the untruncated state on pairs beyond the cutoff."""
        return abs(self.gamma) ** (2 * (self.cutoff + 1))


def tmsv_state(p: SourceParams) -> FockKet:
    """Normalized ``sum_n gamma^n |n, n>`` truncated at ``p.cutoff``."""
    d = p.cutoff + 1
    amps = np.zeros((d, d), dtype=complex)
    idx = np.arange(d)
    amps[idx, idx] = p.gamma**idx
    return FockKet(amps, p.cutoff).normalize()


def mode_matrix(r: float, phi: float) -> np.ndarray:
    """2x2 matrix ``M`` with ``a_k^dag -> sum_l M[l, k] a_l^dag``."""
    t, s = math.sqrt(1.0 - r), math.sqrt(r)
    e = np.exp(1j * phi)
    return np.array([[t, -s * e], [s, t * e]], dtype=complex)


@lru_cache(maxsize=64)
def _two_mode_unitary(r: float, phi: float, cutoff: int) -> np.ndarray:
    d = cutoff + 1
    t, s = math.sqrt(1.0 - r), math.sqrt(r)
    e = np.exp(1j * phi)
    fact = [math.factorial(k) for k in range(2 * d + 1)]
    u = np.zeros((d, d, d, d), dtype=complex)
    for n in range(d):
        for m in range(d):
            pref = e**m / math.sqrt(fact[n] * fact[m])
            for k in range(n + 1):
                ck = comb(n, k, exact=True) * t**k * s ** (n - k)
                if ck == 0:
                    continue
                for l in range(m + 1):
                    cl = comb(m, l, exact=True) * (-s) ** l * t ** (m - l)
                    if cl == 0:
                        continue
                    p, q = k + l, n + m - k - l
                    if p > cutoff or q > cutoff:
                        continue
                    u[p, q, n, m] += pref * ck * cl * math.sqrt(fact[p] * fact[q])
    u.setflags(write=False)
    return u


def two_mode_unitary(r: float, phi: float, cutoff: int) -> np.ndarray:
    """Fock-space tensor ``U[p, q, n, m] = <p, q|U|n, m>`` of the mixer.

    Exact on the block of total photon number <= cutoff; amplitudes that would
    land above the cutoff are dropped.
    """
    r = check_in_range(r, 0.0, 1.0, "r")
    return _two_mode_unitary(float(r), float(phi) % (2 * math.pi), check_cutoff(cutoff))


def linear_element(state, mode_i: int, mode_j: int, r: float, phi: float = 0.0):
    """Apply the passive two-mode element described in the module docstring."""
    mode_i = check_mode(mode_i, state.mode_count, "mode_i")
    mode_j = check_mode(mode_j, state.mode_count, "mode_j")
    if mode_i == mode_j:
        raise ConfigError("linear_element needs two distinct modes", "mode_j")
    u = two_mode_unitary(r, phi, state.cutoff)
    return apply_operator(state, u, (mode_i, mode_j))


def beam_splitter(state, mode_i: int, mode_j: int):
    """Symmetric beam splitter, ``(c, d) -> ((c + d)/sqrt2, (c - d)/sqrt2)``."""
    return linear_element(state, mode_i, mode_j, 0.5, SYMMETRIC_BS_PHASE)


def phase_shift(state, mode: int, phi: float):
    """``|n> -> e^{i n phi}|n>`` on one mode."""
    mode = check_mode(mode, state.mode_count)
    d = state.cutoff + 1
    return apply_operator(state, np.diag(np.exp(1j * phi * np.arange(d))), (mode,))


def loss_channel(eta: float, cutoff: int) -> KrausChannel:
    """Bosonic attenuation with power transmission ``eta``.

    ``K_k = sum_n sqrt(C(n, k) eta^(n-k) (1-eta)^k) |n-k><n|`` removes k photons.
    The set is exactly trace preserving on the truncated space.
    """
    eta = check_in_range(eta, 0.0, 1.0, "eta")
    cutoff = check_cutoff(cutoff)
    d = cutoff + 1
    ops = []
    for k in range(d):
        kop = np.zeros((d, d))
        for n in range(k, d):
            kop[n - k, n] = math.sqrt(comb(n, k) * eta ** (n - k) * (1.0 - eta) ** k)
        ops.append(kop)
    ch = KrausChannel(tuple(ops), name=f"loss(eta={eta:g})")
    if ch.leakage() > LEAKAGE_TOL:
        raise NumericalGuardError(f"loss channel leaks {ch.leakage():.3g}")
    return ch


def add_vacuum_mode(state):
    """Append one vacuum mode at the end of the register."""
    vac = FockKet.vacuum(1, state.cutoff)
    if isinstance(state, DensityOp):
        return tensor_product(state, vac.to_density())
    return tensor_product(state, vac)


@dataclass(frozen=True)
class DistinguishabilityModel:
    """Temporal mismatch between two pulses.

    ``overlap`` is the field-amplitude overlap ``exp(-delay^2 / (2 T^2))`` with
    ``T = coherence_time``; both times in ps.
    """

    delay: float = 0.0
    coherence_time: float = DEFAULT_COHERENCE_TIME_PS

    def __post_init__(self):
        d = float(self.delay)
        if math.isnan(d):
            raise ConfigError("delay must be a number", "delay")
        check_in_range(self.coherence_time, 0.0, np.inf, "coherence_time", low_open=True, high_open=True)
        object.__setattr__(self, "delay", d)

    @property
    def overlap(self) -> float:
        if math.isinf(self.delay):
            return 0.0
        return math.exp(-self.delay**2 / (2.0 * self.coherence_time**2))

    def classical_visibility(self) -> float:
        """First-order fringe visibility between two equal classical pulses."""
        return self.overlap


def delay_embedding(state, mode: int, model: DistinguishabilityModel):
    """Split ``mode`` into matched and orthogonal temporal modes.

    ``d^dag -> xi d_m^dag + sqrt(1 - xi^2) d_o^dag``; the matched part stays at
    ``mode`` and the orthogonal part is appended as the last mode.
    """
    mode = check_mode(mode, state.mode_count)
    xi = model.overlap
    out = add_vacuum_mode(state)
    return linear_element(out, mode, out.mode_count - 1, 1.0 - xi**2, 0.0)
