"""Physical configuration, mode shape, initial state and invariant blocks.

The cascade levels are ordered 1 (upper), 2 (middle), 3 (ground); composite
amplitudes are indexed ``[level - 1, photon]``.  Time is the dimensionless
tau = g t and the detuning is measured in units of the coupling g, so g
itself only fixes the unit and never enters a formula.  For a moving atom
the velocity convention pi v = g L is hard-wired: the mode shape sampled
along the trajectory is then sin(p tau) and its accumulated area has the
closed form (1 - cos(p tau)) / p.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .field_states import FieldSpec, PhotonDistribution

__all__ = [
    "Motion",
    "SystemConfig",
    "CompositeState",
    "ManifoldBlock",
    "mode_shape",
    "pulse_area",
    "initial_state",
    "build_blocks",
    "coupling_expectation",
    "default_dt_internal",
]


class Motion(enum.Enum):
    """Whether the atom crosses the standing-wave mode or sits still."""

    MOVING = "moving"
    NEGLECTED = "neglected"


@dataclass(frozen=True)
class SystemConfig:
    """All physical and numerical parameters of one run.

    ``delta`` is the detuning over g, ``theta`` the atomic superposition
    angle, ``p`` the number of half-wavelengths of the mode (ignored when
    the motion is neglected).  ``tau_max``/``n_steps`` define the output
    grid; ``dt_internal`` is the integrator step in scaled time (``None``
    picks the automatic default).
    """

    field: FieldSpec
    delta: float = 0.0
    theta: float = 0.0
    p: int = 1
    motion: Motion = Motion.MOVING
    g: float = 1.0
    tau_max: float = 8.0 * math.pi
    n_steps: int = 2000
    dt_internal: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.g) and self.g > 0.0):
            raise ValueError(f"g must be finite and > 0, got {self.g!r}")
        if not math.isfinite(self.delta):
            raise ValueError(f"delta must be finite, got {self.delta!r}")
        if not math.isfinite(self.theta):
            raise ValueError(f"theta must be finite, got {self.theta!r}")
        if self.motion is Motion.MOVING and self.p < 1:
            raise ValueError(f"p must be >= 1 for a moving atom, got {self.p!r}")
        if not (math.isfinite(self.tau_max) and self.tau_max > 0.0):
            raise ValueError(f"tau_max must be > 0, got {self.tau_max!r}")
        if self.n_steps < 2:
            raise ValueError(f"n_steps must be >= 2, got {self.n_steps!r}")
        if self.dt_internal is not None and not (
            math.isfinite(self.dt_internal) and self.dt_internal > 0.0
        ):
            raise ValueError(f"dt_internal must be > 0, got {self.dt_internal!r}")


@dataclass(frozen=True)
class CompositeState:
    """Complex amplitudes over (atomic level, photon number).

    Shape (3, n_ph + 1); unit Euclidean norm by convention.  Instances are
    immutable (the array is marked read-only) and safe to share.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        if a.ndim != 2 or a.shape[0] != 3 or a.shape[1] < 3:
            raise ValueError(
                f"amplitudes must have shape (3, n_ph + 1) with n_ph >= 2, "
                f"got {a.shape}"
            )
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def n_ph(self) -> int:
        """Largest photon number retained in the basis."""
        return self.amplitudes.shape[1] - 1

    def norm(self) -> float:
        flat = np.abs(self.amplitudes.ravel())
        return math.sqrt(float(np.add.reduce(flat * flat)))


@dataclass(frozen=True)
class ManifoldBlock:
    """One invariant subspace of the coupling ladder.

    ``basis`` lists (level, photon) indices in ladder order; ``couplings``
    holds the strictly positive strengths between consecutive basis states.
    """

    kind: str  # "triple" | "pair" | "singleton"
    basis: tuple[tuple[int, int], ...]
    couplings: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ("triple", "pair", "singleton"):
            raise ValueError(f"unknown block kind {self.kind!r}")
        if len(self.couplings) != len(self.basis) - 1:
            raise ValueError("couplings must have one entry per adjacent pair")
        if any(c <= 0.0 for c in self.couplings):
            raise ValueError("coupling entries must be strictly positive")

    @property
    def dim(self) -> int:
        return len(self.basis)


def mode_shape(tau, config: SystemConfig):
    """Mode amplitude seen by the atom: sin(p tau) when moving, 1 otherwise."""
    tau = np.asarray(tau, dtype=float)
    if config.motion is Motion.MOVING:
        out = np.sin(config.p * tau)
    else:
        out = np.ones_like(tau)
    return float(out) if out.ndim == 0 else out


def pulse_area(tau, config: SystemConfig):
    """Accumulated mode area: integral of mode_shape from 0 to tau.

    (1 - cos(p tau)) / p for a moving atom (periodic, vanishing at
    tau = 2 pi k / p), plain tau when the motion is neglected.
    """
    tau = np.asarray(tau, dtype=float)
    if config.motion is Motion.MOVING:
        out = (1.0 - np.cos(config.p * tau)) / config.p
    else:
        out = tau.copy() if tau.ndim else tau
    return float(out) if out.ndim == 0 else out


def initial_state(config: SystemConfig, dist: PhotonDistribution) -> CompositeState:
    """Product state (cos(theta) |upper> - sin(theta) |middle>) x field.

    Both atomic branches carry the same normalized photon weights; the
    ground level starts empty.  The basis keeps photons up to n_max + 2 so
    that every populated ladder has room for its two-photon partner.
    """
    n_ph = dist.n_max + 2
    amps = np.zeros((3, n_ph + 1), dtype=complex)
    amps[0, : dist.n_max + 1] = math.cos(config.theta) * dist.weights
    amps[1, : dist.n_max + 1] = -math.sin(config.theta) * dist.weights
    return CompositeState(amps)


def build_blocks(n_ph: int) -> tuple[ManifoldBlock, ...]:
    """Decompose the truncated composite basis into invariant blocks.

    The coupling ladder preserves {|1,n>, |2,n+1>, |3,n+2>}; on a basis cut
    at photon number n_ph this yields the stationary singleton |3,0>, the
    bottom pair (|2,0>, |3,1>), the full triples for n = 0..n_ph-2, and two
    truncation-edge blocks, the pair (|1,n_ph-1>, |2,n_ph>) and the
    singleton |1,n_ph>, which close the partition at the photon cutoff.
    """
    if n_ph < 2:
        raise ValueError(f"n_ph must be >= 2, got {n_ph}")
    blocks: list[ManifoldBlock] = [
        ManifoldBlock("singleton", ((3, 0),), ()),
        ManifoldBlock("pair", ((2, 0), (3, 1)), (1.0,)),
    ]
    for n in range(n_ph - 1):
        blocks.append(
            ManifoldBlock(
                "triple",
                ((1, n), (2, n + 1), (3, n + 2)),
                (math.sqrt(n + 1.0), math.sqrt(n + 2.0)),
            )
        )
    blocks.append(
        ManifoldBlock("pair", ((1, n_ph - 1), (2, n_ph)), (math.sqrt(float(n_ph)),))
    )
    blocks.append(ManifoldBlock("singleton", ((1, n_ph),), ()))
    return tuple(blocks)


def coupling_expectation(state: CompositeState | np.ndarray) -> float:
    """Expectation of the coupling operator V (H = g lambda(tau) V on resonance).

    V connects |1,n> <-> |2,n+1> with sqrt(n+1) and |2,m> <-> |3,m+1> with
    sqrt(m+1); its expectation is conserved under resonant evolution.
    """
    a = state.amplitudes if isinstance(state, CompositeState) else np.asarray(state)
    n_ph = a.shape[1] - 1
    roots = np.sqrt(np.arange(1.0, n_ph + 1.0))
    upper_mid = (np.conj(a[1, 1:]) * a[0, :-1]).real * roots
    mid_ground = (np.conj(a[2, 1:]) * a[1, :-1]).real * roots
    return 2.0 * float(np.add.reduce(upper_mid) + np.add.reduce(mid_ground))


def default_dt_internal(delta: float, n_max: int, p: int = 1) -> float:
    """Automatic integrator step.

    Keeps the phase advanced per step small against both the detuning and
    the largest ladder frequency, and shrinks with the mode curvature
    (the midpoint quadrature error of the accumulated area grows with p).
    """
    fastest = max(abs(delta), math.sqrt(2.0 * n_max + 3.0))
    return min(0.001 / math.sqrt(max(1, p)), 0.1 / fastest)
