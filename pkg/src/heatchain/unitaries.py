"""Total-energy shells and energy-preserving collision unitaries.

A collision unitary acts on one system-ancilla pair and commutes with the
sum of the two bare Hamiltonians.  In the joint energy eigenbasis it is
therefore block diagonal over *shells*: groups of basis states ``(alpha,
n)`` whose total energy ``E_alpha + E_n`` is exactly equal.  Shell
membership is computed with exact rational sums, so no floating comparison
ever decides the block structure, and the full joint matrix is never
materialized; everything downstream works shell by shell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .model import ModelError, Spectrum, format_rational, parse_rational
from .streams import substream

__all__ = [
    "JointIndex",
    "EnergyShell",
    "UnitarySpec",
    "CollisionUnitary",
    "TransitionTensor",
    "UnitarityReport",
    "build_energy_shells",
    "haar_unitary",
    "realize_unitary",
    "validate_energy_preservation",
    "transition_tensor",
]

# (system level index, ancilla level index)
JointIndex = tuple[int, int]

UNITARY_KINDS = ("haar", "partial_swap", "permutation", "explicit", "identity")


@dataclass(frozen=True)
class EnergyShell:
    """All joint basis states sharing one exact total energy."""

    total_energy: Fraction
    members: tuple[JointIndex, ...]

    @property
    def size(self) -> int:
        return len(self.members)


def build_energy_shells(system: Spectrum, ancilla: Spectrum) -> tuple[EnergyShell, ...]:
    """Partition the joint basis by exact total energy.

    Shells are ordered by ascending total energy and members are ordered
    lexicographically in (system level, ancilla level), so the layout is
    deterministic.
    """
    groups: dict[Fraction, list[JointIndex]] = {}
    for a, e_a in enumerate(system.levels):
        for n, e_n in enumerate(ancilla.levels):
            groups.setdefault(e_a + e_n, []).append((a, n))
    return tuple(
        EnergyShell(total_energy=total, members=tuple(sorted(groups[total])))
        for total in sorted(groups)
    )


@dataclass(frozen=True)
class UnitarySpec:
    """Recipe for the collision unitary of one ancilla.

    kind is one of ``haar`` (independent Haar block per shell),
    ``partial_swap`` (resonant two-level exchange by angle theta),
    ``permutation`` (a permutation of each shell's members), ``explicit``
    (user-supplied blocks keyed by total energy) or ``identity``.
    """

    kind: str
    theta: float = 0.0
    shift: int = 0
    # ((total energy, (cycle, ...)), ...) for permutation kind
    cycles: tuple[tuple[Fraction, tuple[tuple[int, ...], ...]], ...] = ()
    # ((total energy, row-major complex matrix), ...) for explicit kind
    blocks: tuple[tuple[Fraction, tuple[tuple[complex, ...], ...]], ...] = ()
    stream_tag: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in UNITARY_KINDS:
            raise ModelError(
                f"unknown unitary kind {self.kind!r}; expected one of {UNITARY_KINDS}"
            )
        if self.kind == "partial_swap" and not math.isfinite(self.theta):
            raise ModelError("partial_swap angle must be finite")

    @classmethod
    def haar(cls, stream_tag: int | None = None) -> "UnitarySpec":
        return cls(kind="haar", stream_tag=stream_tag)

    @classmethod
    def partial_swap(cls, theta: float) -> "UnitarySpec":
        return cls(kind="partial_swap", theta=float(theta))

    @classmethod
    def permutation(
        cls,
        cycles: Mapping[object, Sequence[Sequence[int]]] | None = None,
        shift: int = 0,
    ) -> "UnitarySpec":
        packed = ()
        if cycles:
            packed = tuple(
                sorted(
                    (parse_rational(total), tuple(tuple(int(i) for i in cyc) for cyc in cycs))
                    for total, cycs in cycles.items()
                )
            )
        return cls(kind="permutation", cycles=packed, shift=int(shift))

    @classmethod
    def explicit(cls, blocks: Mapping[object, Sequence[Sequence[complex]]]) -> "UnitarySpec":
        packed = tuple(
            sorted(
                (parse_rational(total), tuple(tuple(complex(v) for v in row) for row in mat))
                for total, mat in blocks.items()
            )
        )
        return cls(kind="explicit", blocks=packed)

    @classmethod
    def identity(cls) -> "UnitarySpec":
        return cls(kind="identity")


@dataclass(frozen=True, eq=False)
class CollisionUnitary:
    """Per-shell unitary blocks; blocks[k] acts on shells[k].members.

    Entry ``blocks[k][out, in]`` is the amplitude connecting input member
    ``in`` to output member ``out`` of shell ``k``.  Amplitudes between
    different shells are zero by construction and never stored.
    """

    shells: tuple[EnergyShell, ...]
    blocks: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.shells) != len(self.blocks):
            raise ModelError("one block per shell is required")
        for shell, block in zip(self.shells, self.blocks):
            if block.shape != (shell.size, shell.size):
                raise ModelError(
                    f"block for total energy {format_rational(shell.total_energy)} "
                    f"has shape {block.shape}, expected {(shell.size, shell.size)}"
                )
        for block in self.blocks:
            block.flags.writeable = False


@dataclass(frozen=True)
class UnitarityReport:
    """Per-shell residuals of the unitarity check ``max|B B^dag - I|``."""

    shell_residuals: tuple[float, ...]
    max_residual: float
    tolerance: float
    passed: bool


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a Haar-distributed unitary via a Ginibre matrix and QR.

    The R-diagonal phases are divided out, which is what makes the QR
    output Haar rather than merely unitary.
    """
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    z /= math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def _permutation_block(shell: EnergyShell, spec: UnitarySpec) -> np.ndarray:
    perm = list(range(shell.size))
    cycles = dict(spec.cycles).get(shell.total_energy)
    if cycles is not None:
        seen: set[int] = set()
        for cycle in cycles:
            for idx in cycle:
                if not 0 <= idx < shell.size:
                    raise ModelError(
                        f"permutation index {idx} out of range for the "
                        f"{shell.size}-member shell at total energy "
                        f"{format_rational(shell.total_energy)}"
                    )
                if idx in seen:
                    raise ModelError(f"permutation cycles reuse index {idx}")
                seen.add(idx)
            for src, dst in zip(cycle, cycle[1:] + cycle[:1]):
                perm[src] = dst
    elif spec.shift:
        perm = [(j + spec.shift) % shell.size for j in range(shell.size)]
    block = np.zeros((shell.size, shell.size), dtype=complex)
    for src, dst in enumerate(perm):
        block[dst, src] = 1.0
    return block


def _partial_swap_blocks(
    shells: tuple[EnergyShell, ...], theta: float
) -> list[np.ndarray]:
    sizes = [shell.size for shell in shells]
    exchange = [shell for shell in shells if shell.size == 2]
    total_members = sum(sizes)
    if total_members != 4 or sizes.count(1) != 2 or len(exchange) != 1:
        raise ModelError(
            "partial_swap needs two resonant two-level subsystems "
            f"(shell sizes must be [1, 2, 1], got {sizes})"
        )
    if exchange[0].members != ((0, 1), (1, 0)):
        raise ModelError(
            "partial_swap exchange shell must pair (ground, excited) with "
            f"(excited, ground); got members {exchange[0].members}"
        )
    c, s = math.cos(theta), math.sin(theta)
    swap = np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    blocks = []
    for shell in shells:
        blocks.append(swap.copy() if shell.size == 2 else np.eye(shell.size, dtype=complex))
    return blocks


def realize_unitary(
    shells: tuple[EnergyShell, ...], spec: UnitarySpec, master_seed: int
) -> CollisionUnitary:
    """Build the per-shell blocks described by ``spec``.

    Haar blocks are drawn from the stream keyed by (master_seed,
    stream_tag, shell index), so every shell of every collision has its own
    reproducible source of randomness.  One-member shells always get the
    trivial block [[1]]; any phase there is unobservable in the transition
    probabilities.
    """
    if spec.kind == "identity":
        blocks = [np.eye(shell.size, dtype=complex) for shell in shells]
    elif spec.kind == "haar":
        tag = spec.stream_tag if spec.stream_tag is not None else 0
        blocks = []
        for k, shell in enumerate(shells):
            if shell.size == 1:
                blocks.append(np.eye(1, dtype=complex))
            else:
                blocks.append(haar_unitary(shell.size, substream(master_seed, tag, k)))
    elif spec.kind == "partial_swap":
        blocks = _partial_swap_blocks(shells, spec.theta)
    elif spec.kind == "permutation":
        blocks = [_permutation_block(shell, spec) for shell in shells]
    elif spec.kind == "explicit":
        supplied = dict(spec.blocks)
        known = {shell.total_energy for shell in shells}
        for total in supplied:
            if total not in known:
                raise ModelError(
                    f"explicit block given for total energy {format_rational(total)}, "
                    "which is not a shell of this collision"
                )
        blocks = []
        for shell in shells:
            mat = supplied.get(shell.total_energy)
            if mat is None:
                blocks.append(np.eye(shell.size, dtype=complex))
            else:
                blocks.append(np.array(mat, dtype=complex))
    else:  # pragma: no cover - kinds are validated at spec construction
        raise ModelError(f"unknown unitary kind {spec.kind!r}")

    unitary = CollisionUnitary(shells=shells, blocks=tuple(blocks))
    if spec.kind == "explicit":
        report = validate_energy_preservation(unitary, tolerance=1e-10)
        if not report.passed:
            raise ModelError(
                f"explicit block fails unitarity: residual {report.max_residual:.3e}"
            )
    return unitary


def validate_energy_preservation(
    unitary: CollisionUnitary, tolerance: float = 1e-10
) -> UnitarityReport:
    """Check each block's unitarity.

    Block-diagonality over shells (the energy-preservation constraint
    itself) holds structurally: cross-shell amplitudes are never stored, so
    only the per-shell residuals ``max|B B^dag - I|`` can fail.
    """
    residuals = []
    for block in unitary.blocks:
        gram = block @ block.conj().T
        residuals.append(float(np.abs(gram - np.eye(block.shape[0])).max()))
    worst = max(residuals)
    return UnitarityReport(
        shell_residuals=tuple(residuals),
        max_residual=worst,
        tolerance=tolerance,
        passed=worst <= tolerance,
    )


@dataclass(frozen=True, eq=False)
class TransitionTensor:
    """Jump probabilities |amplitude|^2, stored shell by shell.

    ``probs[k][out, in]`` is the probability that shell k's input member
    ``in`` exits as member ``out``.  Probabilities between different shells
    are structurally zero.
    """

    shells: tuple[EnergyShell, ...]
    probs: tuple[np.ndarray, ...]
    d_system: int
    d_ancilla: int
    position: Mapping[JointIndex, tuple[int, int]] = field(repr=False, default=None)

    def __post_init__(self) -> None:
        lookup = {}
        for k, shell in enumerate(self.shells):
            for j, member in enumerate(shell.members):
                lookup[member] = (k, j)
        object.__setattr__(self, "position", lookup)
        for mat in self.probs:
            mat.flags.writeable = False

    def entry(self, a_out: int, n_out: int, a_in: int, n_in: int) -> float:
        """R(a_out, n_out | a_in, n_in); zero across shells."""
        k_in, j_in = self.position[(a_in, n_in)]
        k_out, j_out = self.position[(a_out, n_out)]
        if k_in != k_out:
            return 0.0
        return float(self.probs[k_in][j_out, j_in])


def transition_tensor(unitary: CollisionUnitary) -> TransitionTensor:
    """Squared moduli of the unitary blocks.

    Unitarity makes every block doubly stochastic: each input's exit
    probabilities and each output's entry probabilities sum to one.
    """
    probs = []
    for shell, block in zip(unitary.shells, unitary.blocks):
        mat = np.abs(block) ** 2
        col_sums = mat.sum(axis=0)
        if not np.allclose(col_sums, 1.0, atol=1e-10):
            raise ModelError(
                f"block at total energy {format_rational(shell.total_energy)} is not "
                "unitary: exit probabilities do not sum to 1"
            )
        probs.append(mat)
    d_system = 1 + max(a for shell in unitary.shells for a, _ in shell.members)
    d_ancilla = 1 + max(n for shell in unitary.shells for _, n in shell.members)
    return TransitionTensor(
        shells=unitary.shells,
        probs=tuple(probs),
        d_system=d_system,
        d_ancilla=d_ancilla,
    )
