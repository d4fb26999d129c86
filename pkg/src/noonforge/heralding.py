"""Click detectors, coincidence heralding and the N00N projection schemes.

The reverse Hong-Ou-Mandel station is a 50:50 mixer with a quarter-wave
relative phase (``linear_element(r=1/2, phi=pi/2)``); a click in each output
then projects its input onto ``(|2,0> + |0,2>)/sqrt2``.

Register layout of the pair-source setup: modes ``A, B, C, D`` = 0, 1, 2, 3,
with (A, C) and (B, D) each prepared in a two-mode squeezed state. When a
delay is simulated, the orthogonal temporal modes of D and C are appended as
modes 4 and 5.
"""

from __future__ import annotations

import json
import math
import numbers
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ._validation import check_cutoff, check_in_range, check_mode, check_probability
from .errors import ConfigError
from .fock_core import (
    DensityOp,
    FockKet,
    annihilation,
    apply_operator,
    permute_modes,
    tensor_product,
    unravel_channel,
    apply_channel,
)
from .optical_circuit import (
    DistinguishabilityModel,
    SourceParams,
    add_vacuum_mode,
    beam_splitter,
    db_to_transmission,
    delay_embedding,
    linear_element,
    loss_channel,
    phase_shift,
    tmsv_state,
    two_mode_unitary,
)

HOM_PHASE = math.pi / 2
NULL_PROBABILITY = 1e-300
DEFAULT_SPCM_EFFICIENCY = 0.15
DEFAULT_TAP_REFLECTIVITY = 0.05
MODE_A, MODE_B, MODE_C, MODE_D = 0, 1, 2, 3


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon counting module with efficiency ``efficiency``.

    Non-resolving detectors click on any photon; number-resolving ones herald
    exactly one detected photon.
    """

    efficiency: float = DEFAULT_SPCM_EFFICIENCY
    number_resolving: bool = False

    def __post_init__(self):
        object.__setattr__(self, "efficiency", check_probability(self.efficiency, "efficiency"))

    def click_probability(self, n) -> np.ndarray:
        """Probability of a (heralding) click given ``n`` incident photons."""
        n = np.asarray(n)
        eta = self.efficiency
        if self.number_resolving:
            with np.errstate(invalid="ignore"):
                p = n * eta * (1.0 - eta) ** np.maximum(n - 1, 0)
            return np.where(n == 0, 0.0, p)
        return 1.0 - (1.0 - eta) ** n

    def with_efficiency(self, efficiency: float) -> "DetectorModel":
        return DetectorModel(efficiency, self.number_resolving)


def spcm_povm(d: DetectorModel, cutoff: int):
    """``(E_noclick, E_click)`` on one mode."""
    n = np.arange(check_cutoff(cutoff) + 1)
    click = d.click_probability(n)
    if d.number_resolving:
        return np.diag(1.0 - click).astype(complex), np.diag(click).astype(complex)
    noclick = (1.0 - d.efficiency) ** n
    return np.diag(noclick).astype(complex), np.eye(len(n), dtype=complex) - np.diag(noclick)


@dataclass(frozen=True, eq=False)
class HeraldOutcome:
    """Conditioned state and the probability of the conditioning event.

    ``state`` is ``None`` for a null herald (probability below 1e-300).
    """

    state: DensityOp | None
    probability: float

    @property
    def is_null(self) -> bool:
        return self.state is None

    def to_dict(self) -> dict:
        return {"probability": self.probability, "state": None if self.state is None else self.state.to_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data) -> "HeraldOutcome":
        st = data.get("state")
        return cls(None if st is None else DensityOp.from_dict(st), float(data["probability"]))


def _as_group(entry, mode_count):
    if isinstance(entry, numbers.Integral):
        entry = (entry,)
    return tuple(check_mode(m, mode_count, "detector_modes") for m in entry)


def _branches(state):
    if isinstance(state, (FockKet, DensityOp)):
        return [state]
    state = list(state)
    if not state:
        raise ConfigError("empty ensemble", "state")
    return state


def condition_on_pattern(state, detector_modes, detectors, pattern, keep) -> HeraldOutcome:
    """Condition on a click/no-click ``pattern`` of several detectors.

    ``state`` is a :class:`FockKet`, a :class:`DensityOp`, or a list of
    unnormalized ket branches forming an ensemble. Each entry of
    ``detector_modes`` is a mode index or a tuple of modes seen by one physical
    detector (its temporal sub-modes); the detector fires according to the total
    photon number in the group. Modes neither kept nor detected are traced out.
    """
    branches = _branches(state)
    first = branches[0]
    m, cutoff = first.mode_count, first.cutoff
    groups = [_as_group(g, m) for g in detector_modes]
    if isinstance(detectors, DetectorModel):
        detectors = [detectors] * len(groups)
    if len(detectors) != len(groups) or len(pattern) != len(groups):
        raise ConfigError("detector_modes, detectors and pattern must have equal length", "pattern")
    keep = tuple(check_mode(k, m, "keep") for k in keep)
    det_modes = [x for g in groups for x in g]
    if len(set(det_modes)) != len(det_modes):
        raise ConfigError("detector groups overlap", "detector_modes")
    if set(det_modes) & set(keep):
        raise ConfigError("detector modes must be disjoint from kept modes", "keep")
    rest = [x for x in range(m) if x not in keep and x not in det_modes]
    order = list(keep) + det_modes + rest
    d = cutoff + 1

    weights = np.ones(())
    for g, det, click in zip(groups, detectors, pattern):
        n_tot = np.indices((d,) * len(g)).sum(axis=0)
        p = det.click_probability(n_tot)
        weights = np.multiply.outer(weights, p if click else 1.0 - p)
    w = weights.reshape(-1)

    dk, dd = d ** len(keep), d ** len(det_modes)
    out = np.zeros((dk, dk), dtype=complex)
    for br in branches:
        br = permute_modes(br, order)
        if isinstance(br, FockKet):
            psi = br.amplitudes.reshape(dk, dd, -1)
            out += np.einsum("adr,d,bdr->ab", psi, w, psi.conj())
        else:
            rho = br.matrix.reshape(dk, dd, -1, dk, dd, d ** len(rest))
            out += np.einsum("adrbdr,d->ab", rho, w)
    prob = float(np.real(np.trace(out)))
    if prob < NULL_PROBABILITY:
        return HeraldOutcome(None, max(prob, 0.0))
    return HeraldOutcome(DensityOp(out / prob, len(keep), cutoff), prob)


def herald_coincidence(state, detector_modes, d: DetectorModel, keep) -> HeraldOutcome:
    """Condition on a click of both detectors in ``detector_modes``."""
    if len(detector_modes) != 2:
        raise ConfigError("herald_coincidence takes exactly two detectors", "detector_modes")
    return condition_on_pattern(state, detector_modes, d, (True, True), keep)


def reverse_hom_station(state, mode_c: int, mode_d: int):
    """Mixer whose coincidence output projects ``(c, d)`` onto ``(|2,0> + |0,2>)/sqrt2``."""
    return linear_element(state, mode_c, mode_d, 0.5, HOM_PHASE)


class Subtraction(NamedTuple):
    state: FockKet
    weight: float

    @property
    def is_null(self) -> bool:
        return self.weight == 0.0


def photon_subtract(state: FockKet, mode: int) -> Subtraction:
    """Apply the annihilation operator; returns the unnormalized ket and its squared norm."""
    mode = check_mode(mode, state.mode_count)
    out = apply_operator(state, annihilation(state.cutoff), (mode,))
    return Subtraction(out, out.norm() ** 2)


# ---------------------------------------------------------------------------
# two-photon N00N heralding from two pair sources


def pair_sources(gamma: complex, cutoff: int) -> FockKet:
    """Modes (A, B, C, D) with (A, C) and (B, D) in two-mode squeezed states."""
    src = tmsv_state(SourceParams(gamma, cutoff))
    return permute_modes(tensor_product(src, src), (0, 2, 1, 3))


def _loss_transmissions(loss_db):
    if isinstance(loss_db, numbers.Real):
        loss_db = (loss_db, loss_db)
    if len(loss_db) != 2:
        raise ConfigError("loss_db must be a number or a (C, D) pair", "loss_db")
    return tuple(db_to_transmission(x) for x in loss_db)


def herald_noon(
    gamma: complex,
    detector: DetectorModel = DetectorModel(),
    loss_db=0.0,
    delay: DistinguishabilityModel | None = None,
    cutoff: int = 6,
    dense: bool = False,
    pattern=(True, True),
) -> HeraldOutcome:
    """State of modes A, B after the reverse-HOM herald on C, D.

    ``loss_db`` is the channel loss placed on C and D before the mixer, either
    one value for both arms or a ``(C, D)`` pair. The default ket path unravels
    the loss into Kraus branches; ``dense=True`` runs the same circuit on
    density operators.
    """
    eta_c, eta_d = _loss_transmissions(loss_db)
    state = pair_sources(gamma, cutoff)
    c_modes, d_modes = [MODE_C], [MODE_D]
    if delay is not None:
        state = delay_embedding(state, MODE_D, delay)
        state = add_vacuum_mode(state)
        d_modes.append(4)
        c_modes.append(5)
    if dense:
        state = state.to_density()
        for modes, eta in ((c_modes, eta_c), (d_modes, eta_d)):
            if eta < 1.0:
                ch = loss_channel(eta, cutoff)
                for mode in modes:
                    state = apply_channel(state, ch, mode)
        branches = [state]
    else:
        branches = [state]
        for modes, eta in ((c_modes, eta_c), (d_modes, eta_d)):
            if eta < 1.0:
                ch = loss_channel(eta, cutoff)
                for mode in modes:
                    branches = [b for br in branches for b in unravel_channel(br, ch, mode)]
    branches = [_station(b, c_modes, d_modes) for b in branches]
    groups = (tuple(c_modes), tuple(d_modes))
    return condition_on_pattern(branches, groups, detector, pattern, (MODE_A, MODE_B))


def _station(state, c_modes, d_modes):
    for c, d in zip(c_modes, d_modes):
        state = reverse_hom_station(state, c, d)
    return state


def noon_ket(n: int, cutoff: int, sign: complex = 1.0) -> FockKet:
    """``(|n, 0> + sign |0, n>)/sqrt2``."""
    return FockKet.from_terms({(n, 0): 1.0, (0, n): sign}, cutoff, normalize=True)


# ---------------------------------------------------------------------------
# higher-order N00N states


@dataclass(frozen=True, eq=False)
class Factorization:
    n: int
    phases: np.ndarray
    operator: np.ndarray
    target: np.ndarray
    error: float
    literal_phases: np.ndarray
    literal_operator: np.ndarray
    literal_sign: int
    literal_error: float


def _two_mode_ladders(cutoff):
    a = annihilation(cutoff)
    eye = np.eye(cutoff + 1)
    return np.kron(a, eye), np.kron(eye, a)


def _factor_product(c2, d2, phases):
    out = np.eye(c2.shape[0], dtype=complex)
    for ph in phases:
        out = out @ (c2 + np.exp(1j * ph) * d2)
    return out


def noon_factorization(n: int, cutoff: int = 8) -> Factorization:
    """Phases ``psi_k`` with ``prod_k (c^2 + e^{i psi_k} d^2) = c^N + d^N``.

    ``psi_k = pi - pi (2k - 1) / (N/2)``. The literal phases ``4 pi k / N`` are
    evaluated as well; they give ``c^N + d^N`` when ``N/2`` is odd and
    ``c^N - d^N`` when it is even (``literal_sign``).
    """
    if isinstance(n, bool) or not isinstance(n, numbers.Integral) or n < 2 or n % 2:
        raise ConfigError(f"N must be an even integer >= 2, got {n!r}", "N")
    cutoff = check_cutoff(cutoff)
    if cutoff < n:
        raise ConfigError(f"cutoff {cutoff} too small for N={n}", "cutoff")
    c, d = _two_mode_ladders(cutoff)
    c2, d2 = c @ c, d @ d
    cn = np.linalg.matrix_power(c, n)
    dn = np.linalg.matrix_power(d, n)
    half = n // 2
    k = np.arange(1, half + 1)
    phases = np.pi - np.pi * (2 * k - 1) / half
    op = _factor_product(c2, d2, phases)
    target = cn + dn
    literal_phases = 4 * np.pi * k / n
    literal_op = _factor_product(c2, d2, literal_phases)
    err_plus = np.max(np.abs(literal_op - (cn + dn)))
    err_minus = np.max(np.abs(literal_op - (cn - dn)))
    sign = 1 if err_plus <= err_minus else -1
    return Factorization(
        n=n,
        phases=phases,
        operator=op,
        target=target,
        error=float(np.max(np.abs(op - target))),
        literal_phases=literal_phases,
        literal_operator=literal_op,
        literal_sign=sign,
        literal_error=float(min(err_plus, err_minus)),
    )


# Phase on mode D before the first mixer of the N=4 cascade that makes the
# heralded state (|4,0> + |0,4>)/sqrt2 rather than a rotated N00N state.
NOON4_PHASE = math.pi / 4


def _herald_noon4(gamma, detector, r_tap, cutoff):
    state = pair_sources(gamma, cutoff)
    state = phase_shift(state, MODE_D, NOON4_PHASE)
    state = beam_splitter(state, MODE_C, MODE_D)
    state = add_vacuum_mode(add_vacuum_mode(state))  # taps C' = 4, D' = 5
    state = linear_element(state, MODE_C, 4, r_tap, 0.0)
    state = linear_element(state, MODE_D, 5, r_tap, 0.0)
    state = reverse_hom_station(state, MODE_C, MODE_D)
    return condition_on_pattern(state, (4, 5, MODE_C, MODE_D), detector, (True,) * 4, (MODE_A, MODE_B))


def higher_order_herald(
    n: int,
    gamma: complex,
    detector: DetectorModel = DetectorModel(),
    r_tap: float = DEFAULT_TAP_REFLECTIVITY,
    cutoff: int | None = None,
) -> HeraldOutcome:
    """Herald ``|N::0>`` in modes A, B for N in {2, 4}.

    N=2 is the plain reverse-HOM herald. N=4 mixes C and D on a symmetric beam
    splitter, subtracts one photon from each arm with taps of reflectivity
    ``r_tap`` (clicks required on both tap detectors), then applies the
    reverse-HOM herald. The register is kept as a dense ket of
    ``(cutoff + 1)**6`` amplitudes.
    """
    r_tap = check_probability(r_tap, "r_tap")
    if n == 2:
        return herald_noon(gamma, detector, cutoff=6 if cutoff is None else cutoff)
    if n == 4:
        cutoff = 5 if cutoff is None else check_cutoff(cutoff)
        if cutoff < n:
            raise ConfigError(f"cutoff {cutoff} too small for N={n}", "cutoff")
        return _herald_noon4(gamma, detector, r_tap, cutoff)
    raise ConfigError(f"full-state heralding supports N in {{2, 4}}, got {n}", "N")


def _stage(batch, phase, r_tap, detector):
    """One ``c^2 + e^{i phase} d^2`` stage on a batch of (C, D) kets."""
    b, d = batch.shape[0], batch.shape[1]
    cutoff = d - 1
    psi = np.zeros((b, d, d, d, d), dtype=complex)
    psi[:, :, :, 0, 0] = batch
    tap = two_mode_unitary(r_tap, 0.0, cutoff)
    # modes: 1=C 2=D 3=C' 4=D'
    psi = np.einsum("pqnm,bnjmk->bpjqk", tap, psi)
    psi = np.einsum("pqnm,bincm->bipcq", tap, psi)
    ph = np.exp(1j * (phase / 2) * np.arange(d))
    psi = psi * ph[None, None, None, None, :]
    hom = two_mode_unitary(0.5, HOM_PHASE, cutoff)
    psi = np.einsum("pqnm,bijnm->bijpq", hom, psi)
    click = detector.click_probability(np.arange(d))
    amp = np.sqrt(click)
    psi = psi * amp[None, None, None, :, None] * amp[None, None, None, None, :]
    out = np.moveaxis(psi.reshape(b, d, d, d * d), 3, 1).reshape(b * d * d, d, d)
    keep = np.sum(np.abs(out) ** 2, axis=(1, 2)) > 0
    return out[keep]


def noon_herald_probability(
    n_values: Sequence[int],
    gamma: complex,
    detector: DetectorModel = DetectorModel(),
    r_tap: float = DEFAULT_TAP_REFLECTIVITY,
    extra_photons: int = 2,
) -> np.ndarray:
    """Per-pulse success probability of the factorized ``c^N + d^N`` herald.

    Each factor ``c^2 + e^{i psi_k} d^2`` taps both arms with reflectivity
    ``r_tap``, shifts the tapped D photons by ``psi_k/2`` and requires a
    coincidence behind a reverse-HOM station. Modes C and D start in the
    thermal mixture left by the two pair sources, restricted to at most
    ``N + extra_photons`` photons in total.
    """
    r_tap = check_probability(r_tap, "r_tap")
    g2 = abs(complex(gamma)) ** 2
    if not g2 < 1:
        raise ConfigError("|gamma| must be < 1", "gamma")
    out = []
    for n in n_values:
        fac = noon_factorization(int(n), cutoff=int(n))
        cutoff = int(n) + extra_photons
        d = cutoff + 1
        kets, weights = [], []
        for k in range(d):
            for l in range(d - k):
                v = np.zeros((d, d), dtype=complex)
                v[k, l] = 1.0
                kets.append(v)
                weights.append((1 - g2) ** 2 * g2 ** (k + l))
        batch = np.array(kets) * np.sqrt(np.array(weights))[:, None, None]
        for ph in fac.phases:
            batch = _stage(batch, ph, r_tap, detector)
        out.append(float(np.sum(np.abs(batch) ** 2)))
    return np.array(out)


def coincidence_rate_model(
    gamma: complex,
    eta_spcm: float = DEFAULT_SPCM_EFFICIENCY,
    per_arm_loss_db=0.0,
    rep_rate_hz: float = 76e6,
    cutoff: int = 6,
):
    """Per-pulse coincidence probability of the reverse-HOM herald and the rate in Hz."""
    check_in_range(rep_rate_hz, 0.0, np.inf, "rep_rate_hz", high_open=True)
    if abs(complex(gamma)) == 0:
        return 0.0, 0.0
    out = herald_noon(gamma, DetectorModel(eta_spcm), per_arm_loss_db, cutoff=cutoff)
    return out.probability, out.probability * rep_rate_hz
