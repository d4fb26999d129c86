"""Truncated multimode Fock-space states and the operations on them.

Basis layout: a ``mode_count``-mode register with per-mode cutoff ``c`` has
``(c + 1) ** mode_count`` basis states indexed by occupation tuples
``(n_1, ..., n_M)`` in row-major order, mode 1 slowest-varying. Kets are stored
as tensors of shape ``(c + 1,) * M``; density operators as ``(D, D)`` matrices
over the flattened index, with a tensor view of shape ``(c + 1,) * 2M``
(ket axes first, then bra axes).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._validation import check_cutoff, check_mode, check_modes
from .errors import ConfigError, NumericalGuardError

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-8


def _frozen(arr):
    arr = np.array(arr, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


def annihilation(cutoff: int) -> np.ndarray:
    """Truncated annihilation operator on ``cutoff + 1`` levels."""
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1).astype(complex)


def creation(cutoff: int) -> np.ndarray:
    return annihilation(cutoff).T.copy()


def number_operator(cutoff: int) -> np.ndarray:
    return np.diag(np.arange(cutoff + 1, dtype=float)).astype(complex)


@dataclass(frozen=True, eq=False)
class FockKet:
    """Pure state over a truncated multimode Fock space.

    ``amplitudes`` is a tensor of shape ``(cutoff + 1,) * mode_count``.
    """

    amplitudes: np.ndarray
    cutoff: int

    def __post_init__(self):
        cutoff = check_cutoff(self.cutoff)
        amps = _frozen(self.amplitudes)
        d = cutoff + 1
        if amps.ndim == 0 or any(s != d for s in amps.shape):
            raise ConfigError(
                f"amplitude tensor shape {amps.shape} does not match cutoff {cutoff}", "amplitudes"
            )
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "cutoff", cutoff)

    @property
    def mode_count(self) -> int:
        return self.amplitudes.ndim

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def vector(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    @classmethod
    def from_vector(cls, vector, mode_count: int, cutoff: int) -> "FockKet":
        d = check_cutoff(cutoff) + 1
        return cls(np.asarray(vector, dtype=complex).reshape((d,) * mode_count), cutoff)

    @classmethod
    def vacuum(cls, mode_count: int, cutoff: int) -> "FockKet":
        return cls.basis((0,) * mode_count, cutoff)

    @classmethod
    def basis(cls, occupations: Sequence[int], cutoff: int) -> "FockKet":
        return cls.from_terms({tuple(occupations): 1.0}, cutoff)

    @classmethod
    def from_terms(cls, terms: Mapping[tuple, complex], cutoff: int, normalize=False) -> "FockKet":
        """Build a ket from ``{occupation_tuple: amplitude}``."""
        cutoff = check_cutoff(cutoff)
        lengths = {len(k) for k in terms}
        if len(lengths) != 1:
            raise ConfigError("all occupation tuples must have the same length", "terms")
        (m,) = lengths
        amps = np.zeros((cutoff + 1,) * m, dtype=complex)
        for occ, amp in terms.items():
            if any(n < 0 or n > cutoff for n in occ):
                raise ConfigError(f"occupation {occ} exceeds cutoff {cutoff}", "terms")
            amps[tuple(occ)] += amp
        ket = cls(amps, cutoff)
        return ket.normalize() if normalize else ket

    def amplitude(self, *occupations) -> complex:
        return complex(self.amplitudes[tuple(occupations)])

    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def normalize(self) -> "FockKet":
        n = self.norm()
        if n == 0:
            raise NumericalGuardError("cannot normalize the zero vector")
        return FockKet(self.amplitudes / n, self.cutoff)

    def inner(self, other: "FockKet") -> complex:
        """``<self|other>``."""
        return complex(np.vdot(self.vector, other.vector))

    def to_density(self) -> "DensityOp":
        v = self.vector
        return DensityOp(np.outer(v, v.conj()), self.mode_count, self.cutoff)

    def __repr__(self):
        return f"FockKet(mode_count={self.mode_count}, cutoff={self.cutoff}, norm={self.norm():.6g})"


@dataclass(frozen=True, eq=False)
class DensityOp:
    """Mixed state over the same basis as :class:`FockKet`."""

    matrix: np.ndarray
    mode_count: int
    cutoff: int

    def __post_init__(self):
        cutoff = check_cutoff(self.cutoff)
        mat = _frozen(self.matrix)
        dim = (cutoff + 1) ** self.mode_count
        if mat.shape == (cutoff + 1,) * (2 * self.mode_count) and self.mode_count > 1:
            mat = _frozen(mat.reshape(dim, dim))
        if mat.shape != (dim, dim):
            raise ConfigError(
                f"matrix shape {mat.shape} inconsistent with {self.mode_count} modes at cutoff {cutoff}",
                "matrix",
            )
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "cutoff", cutoff)
        object.__setattr__(self, "mode_count", int(self.mode_count))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def tensor(self) -> np.ndarray:
        return self.matrix.reshape((self.cutoff + 1,) * (2 * self.mode_count))

    @classmethod
    def from_ket(cls, ket: FockKet) -> "DensityOp":
        return ket.to_density()

    @classmethod
    def from_tensor(cls, tensor, cutoff: int) -> "DensityOp":
        tensor = np.asarray(tensor)
        m = tensor.ndim // 2
        dim = (cutoff + 1) ** m
        return cls(tensor.reshape(dim, dim), m, cutoff)

    @classmethod
    def diagonal(cls, populations: Mapping[tuple, float], cutoff: int) -> "DensityOp":
        """Mixture of Fock basis states, ``{occupation_tuple: weight}``."""
        (m,) = {len(k) for k in populations}
        d = cutoff + 1
        diag = np.zeros((d,) * m)
        for occ, w in populations.items():
            diag[tuple(occ)] += w
        return cls(np.diag(diag.reshape(-1)).astype(complex), m, cutoff)

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def normalize(self) -> "DensityOp":
        tr = self.trace()
        if tr <= 0:
            raise NumericalGuardError(f"cannot normalize a density operator with trace {tr}")
        return DensityOp(self.matrix / tr, self.mode_count, self.cutoff)

    def populations(self) -> np.ndarray:
        """Diagonal as a tensor indexed by occupation tuples."""
        return np.real(np.diagonal(self.matrix)).reshape((self.cutoff + 1,) * self.mode_count)

    def element(self, ket_occ: Sequence[int], bra_occ: Sequence[int]) -> complex:
        return complex(self.tensor[tuple(ket_occ) + tuple(bra_occ)])

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def eigenvalues(self) -> np.ndarray:
        h = 0.5 * (self.matrix + self.matrix.conj().T)
        return np.linalg.eigvalsh(h)

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def check(self, normalized=True) -> "DensityOp":
        """Raise :class:`NumericalGuardError` unless all invariants hold."""
        herm = self.hermiticity_error()
        if herm > HERMITIAN_TOL:
            raise NumericalGuardError(f"density operator not Hermitian (max deviation {herm:.3g})")
        if normalized and abs(self.trace() - 1.0) > TRACE_TOL:
            raise NumericalGuardError(f"density operator trace {self.trace():.12g} != 1")
        lam = self.eigenvalues().min()
        if lam < -POSITIVITY_TOL:
            raise NumericalGuardError(f"density operator has eigenvalue {lam:.3g} < 0")
        return self

    def clip_negative(self) -> "DensityOp":
        """Explicit positivity repair: zero negative eigenvalues and renormalize."""
        h = 0.5 * (self.matrix + self.matrix.conj().T)
        lam, vec = np.linalg.eigh(h)
        if lam.min() < 0:
            logger.warning("clipping %d negative eigenvalue(s), min %.3g", int((lam < 0).sum()), lam.min())
        lam = np.clip(lam, 0.0, None)
        out = (vec * lam) @ vec.conj().T
        return DensityOp(out / lam.sum(), self.mode_count, self.cutoff)

    def pad(self, cutoff: int) -> "DensityOp":
        """Embed into a larger per-mode cutoff (zeros on the new levels)."""
        if cutoff < self.cutoff:
            raise ConfigError(f"cannot pad cutoff {self.cutoff} down to {cutoff}", "cutoff")
        d = self.cutoff + 1
        out = np.zeros((cutoff + 1,) * (2 * self.mode_count), dtype=complex)
        out[(slice(0, d),) * (2 * self.mode_count)] = self.tensor
        return DensityOp.from_tensor(out, cutoff)

    def truncate(self, cutoff: int) -> "DensityOp":
        """Restrict every mode to ``cutoff`` and renormalize."""
        if cutoff > self.cutoff:
            raise ConfigError(f"cannot truncate cutoff {self.cutoff} up to {cutoff}", "cutoff")
        sub = self.tensor[(slice(0, cutoff + 1),) * (2 * self.mode_count)]
        out = DensityOp.from_tensor(sub, cutoff)
        return out.normalize()

    def to_dict(self) -> dict:
        m = np.asarray(self.matrix)
        return {
            "cutoff": self.cutoff,
            "mode_count": self.mode_count,
            "re": np.real(m).tolist(),
            "im": np.imag(m).tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DensityOp":
        try:
            mat = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
            return cls(mat, int(data["mode_count"]), int(data["cutoff"]))
        except KeyError as exc:
            raise ConfigError(f"density operator JSON missing key {exc}", str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DensityOp":
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return f"DensityOp(mode_count={self.mode_count}, cutoff={self.cutoff}, trace={self.trace():.6g})"


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Completely positive map on one mode, given by its Kraus operators."""

    operators: tuple = field(default_factory=tuple)
    name: str = "channel"

    def __post_init__(self):
        ops = tuple(_frozen(k) for k in self.operators)
        if not ops:
            raise ConfigError("a Kraus channel needs at least one operator", "operators")
        shapes = {k.shape for k in ops}
        if len(shapes) != 1 or ops[0].ndim != 2 or ops[0].shape[0] != ops[0].shape[1]:
            raise ConfigError(f"Kraus operators must be equal square matrices, got {shapes}", "operators")
        object.__setattr__(self, "operators", ops)

    @property
    def cutoff(self) -> int:
        return self.operators[0].shape[0] - 1

    @classmethod
    def identity(cls, cutoff: int) -> "KrausChannel":
        return cls((np.eye(cutoff + 1),), name="identity")

    def completeness(self) -> np.ndarray:
        return sum(k.conj().T @ k for k in self.operators)

    def leakage(self) -> float:
        """Largest deviation of ``sum K^dag K`` from identity."""
        return float(np.max(np.abs(self.completeness() - np.eye(self.cutoff + 1))))

    def adjoint_apply(self, op: np.ndarray) -> np.ndarray:
        """Heisenberg-picture action ``sum K^dag op K`` on a single-mode operator."""
        return sum(k.conj().T @ op @ k for k in self.operators)


# ---------------------------------------------------------------------------
# local operator application


def _apply_ket_axes(op_tensor, psi, modes):
    k = len(modes)
    out = np.tensordot(op_tensor, psi, axes=(list(range(k, 2 * k)), list(modes)))
    return np.moveaxis(out, list(range(k)), list(modes))


def _as_op_tensor(op, k, d):
    op = np.asarray(op, dtype=complex)
    return op.reshape((d,) * (2 * k))


def apply_operator(state, op, modes):
    """Apply a (not necessarily unitary) operator acting on ``modes``.

    ``op`` is a ``(d**k, d**k)`` matrix (or the equivalent tensor) on the k
    listed modes in the given order. Kets map to ``op|psi>``; density operators
    to ``op rho op^dag``.
    """
    if isinstance(modes, (int, np.integer)):
        modes = (modes,)
    modes = check_modes(modes, state.mode_count)
    d = state.cutoff + 1
    t = _as_op_tensor(op, len(modes), d)
    if isinstance(state, FockKet):
        return FockKet(_apply_ket_axes(t, state.amplitudes, modes), state.cutoff)
    m = state.mode_count
    rho = _apply_ket_axes(t, state.tensor, modes)
    rho = _apply_ket_axes(t.conj(), rho, tuple(x + m for x in modes))
    return DensityOp.from_tensor(rho, state.cutoff)


def tensor_product(a, b):
    """Tensor product of two kets (or two density operators) sharing a cutoff."""
    if a.cutoff != b.cutoff:
        raise ConfigError(f"mismatched cutoffs {a.cutoff} and {b.cutoff}", "cutoff")
    if isinstance(a, FockKet) and isinstance(b, FockKet):
        return FockKet(np.multiply.outer(a.amplitudes, b.amplitudes), a.cutoff)
    if isinstance(a, FockKet):
        a = a.to_density()
    if isinstance(b, FockKet):
        b = b.to_density()
    ma, mb = a.mode_count, b.mode_count
    t = np.multiply.outer(a.tensor, b.tensor)
    # (ket_a, bra_a, ket_b, bra_b) -> (ket_a, ket_b, bra_a, bra_b)
    order = list(range(ma)) + list(range(2 * ma, 2 * ma + mb)) + list(range(ma, 2 * ma)) + list(
        range(2 * ma + mb, 2 * ma + 2 * mb)
    )
    return DensityOp.from_tensor(np.transpose(t, order), a.cutoff)


def permute_modes(state, order: Sequence[int]):
    """Reorder modes so that new mode ``i`` is old mode ``order[i]``."""
    order = check_modes(order, state.mode_count, "order")
    if len(order) != state.mode_count:
        raise ConfigError("order must list every mode exactly once", "order")
    if isinstance(state, FockKet):
        return FockKet(np.transpose(state.amplitudes, order), state.cutoff)
    m = state.mode_count
    return DensityOp.from_tensor(np.transpose(state.tensor, list(order) + [m + o for o in order]), state.cutoff)


def apply_channel(rho, ch: KrausChannel, mode: int) -> DensityOp:
    """Apply ``sum_j K_j rho K_j^dag`` on one mode."""
    if isinstance(rho, FockKet):
        rho = rho.to_density()
    mode = check_mode(mode, rho.mode_count)
    if ch.cutoff != rho.cutoff:
        raise ConfigError(f"channel cutoff {ch.cutoff} != state cutoff {rho.cutoff}", "cutoff")
    m = rho.mode_count
    t = rho.tensor
    out = np.zeros_like(t)
    for k in ch.operators:
        x = _apply_ket_axes(k, t, (mode,))
        out += _apply_ket_axes(k.conj(), x, (mode + m,))
    return DensityOp.from_tensor(out, rho.cutoff)


def unravel_channel(ket: FockKet, ch: KrausChannel, mode: int) -> list:
    """Kraus branches ``K_j|psi>`` (unnormalized) of a pure state; zero branches dropped."""
    mode = check_mode(mode, ket.mode_count)
    out = []
    for k in ch.operators:
        amps = _apply_ket_axes(k, ket.amplitudes, (mode,))
        if np.any(amps):
            out.append(FockKet(amps, ket.cutoff))
    return out


def partial_trace(rho, keep: Iterable[int]) -> DensityOp:
    """Trace out every mode not in ``keep``.

    A set is taken in ascending order; a list or tuple fixes the order of the
    kept modes in the result.
    """
    if isinstance(rho, FockKet):
        rho = rho.to_density()
    keep = sorted(keep) if isinstance(keep, (set, frozenset)) else list(keep)
    if not keep:
        raise ConfigError("keep-set must be nonempty", "keep")
    keep = check_modes(keep, rho.mode_count, "keep")
    m = rho.mode_count
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * m > 26:
        raise ConfigError("partial_trace supports at most 13 modes", "keep")
    ket_idx = list(letters[:m])
    bra_idx = list(letters[m : 2 * m])
    for i in range(m):
        if i not in keep:
            bra_idx[i] = ket_idx[i]
    out = "".join(ket_idx[i] for i in keep) + "".join(bra_idx[i] for i in keep)
    t = np.einsum("".join(ket_idx) + "".join(bra_idx) + "->" + out, rho.tensor)
    return DensityOp.from_tensor(t, rho.cutoff)


def _pure_vector(rho: DensityOp, tol=1e-12):
    lam, vec = np.linalg.eigh(0.5 * (rho.matrix + rho.matrix.conj().T))
    if lam[-1] > 0 and np.sum(np.abs(lam[:-1])) < tol * lam[-1]:
        return vec[:, -1] * np.sqrt(lam[-1])
    return None


def fidelity(a, b) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))**2``.

    Either argument may be a :class:`FockKet`; for two pure states this is
    ``|<psi|phi>|**2``.
    """
    if isinstance(a, FockKet) and isinstance(b, FockKet):
        _check_same_space(a, b)
        return float(min(1.0, abs(a.inner(b)) ** 2 / (a.norm() ** 2 * b.norm() ** 2)))
    if isinstance(a, FockKet):
        a, b = b, a
    if isinstance(b, FockKet):
        _check_same_space(a, b)
        _check_positive(a)
        v = b.vector / b.norm()
        return float(np.clip(np.real(np.vdot(v, a.matrix @ v)), 0.0, 1.0))
    _check_same_space(a, b)
    _check_positive(a)
    _check_positive(b)
    for x, y in ((a, b), (b, a)):
        v = _pure_vector(x)
        if v is not None:
            return float(np.clip(np.real(np.vdot(v, y.matrix @ v)), 0.0, 1.0))
    lam, vec = np.linalg.eigh(0.5 * (a.matrix + a.matrix.conj().T))
    sqrt_a = (vec * np.sqrt(np.clip(lam, 0, None))) @ vec.conj().T
    inner = sqrt_a @ b.matrix @ sqrt_a
    mu = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.clip(np.sum(np.sqrt(np.clip(mu, 0, None))) ** 2, 0.0, 1.0))


def _check_same_space(a, b):
    if a.mode_count != b.mode_count or a.cutoff != b.cutoff:
        raise ConfigError(
            f"states live in different spaces: ({a.mode_count} modes, cutoff {a.cutoff}) vs "
            f"({b.mode_count} modes, cutoff {b.cutoff})",
            "state",
        )


def _check_positive(rho: DensityOp):
    lam = rho.eigenvalues().min()
    if lam < -POSITIVITY_TOL:
        raise NumericalGuardError(f"fidelity needs positive operators, found eigenvalue {lam:.3g}")

