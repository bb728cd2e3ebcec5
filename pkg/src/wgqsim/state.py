"""Sparse joint state of one photon and a register of emitter qubits.

The photon occupies exactly one excitation spread over spatial modes and
polarizations; the register of N two-level emitters is entangled with it.
A pure state is stored as a sparse map

    (mode, polarization, config) -> complex amplitude

where ``config`` is an N-bit integer, bit i describing emitter i.  What a
set bit means depends on the basis tag: in the "energy" basis bit 0/1 is
the ground sublevel g+/g-, in the "plusminus" basis it is the diagonal
state (g+ +- g-)/sqrt2.  Scattering is diagonal in the energy basis, so
states stay in it internally; conversion happens at reporting time.

Photon loss channels are classical once the photon is gone, so they are
tracked as real probability sinks, not amplitudes.  The conserved total is

    sum |amplitude|^2  +  sum sinks  =  norm of the input.

All iteration that feeds floating-point accumulation runs over sorted
keys, so repeated runs are bit-for-bit identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

H = "H"
V = "V"
POLARIZATIONS = (H, V)

ENERGY = "energy"
PLUSMINUS = "plusminus"

# Amplitudes and outcome probabilities below this are numerical dust.
PRUNE_TOL = 1e-14

_SQRT_HALF = 1.0 / math.sqrt(2.0)

Slot = tuple[int, str, int]
Slot2 = tuple[int, str]


class StateOpError(ValueError):
    """Operation applied outside its contract."""


class UncoveredSlotError(StateOpError):
    """Detector bank leaves occupied slots unobserved."""

    def __init__(self, slots: list[Slot]):
        self.slots = slots
        super().__init__(f"detector bank does not cover occupied slots: {slots}")


def _check_unitary(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.shape != (2, 2):
        raise StateOpError(f"expected a 2x2 matrix, got shape {m.shape}")
    if not np.allclose(m.conj().T @ m, np.eye(2), atol=1e-10):
        raise StateOpError("matrix is not unitary")
    return m


def config_label(config: int, n: int) -> str:
    """Render an N-bit config as '+'/'-' characters, emitter 0 first."""
    return "".join("-" if config >> i & 1 else "+" for i in range(n))


@dataclass
class EmitterState:
    """Sparse state of the emitter register alone (photon detected)."""

    n: int
    basis: str
    amps: dict[int, complex] = field(default_factory=dict)

    def copy(self) -> "EmitterState":
        return EmitterState(self.n, self.basis, dict(self.amps))

    def norm_sq(self) -> float:
        return sum(abs(self.amps[c]) ** 2 for c in sorted(self.amps))

    def normalized(self) -> "EmitterState":
        nrm = math.sqrt(self.norm_sq())
        if nrm < PRUNE_TOL:
            raise StateOpError("cannot normalize a null state")
        return EmitterState(self.n, self.basis, {c: a / nrm for c, a in self.amps.items()})

    def overlap(self, other: "EmitterState") -> complex:
        """<self|other>.  Both states must share n and basis."""
        if self.n != other.n or self.basis != other.basis:
            raise StateOpError("overlap requires matching register size and basis")
        return sum(
            self.amps[c].conjugate() * other.amps[c]
            for c in sorted(self.amps.keys() & other.amps.keys())
        )

    def fidelity(self, other: "EmitterState") -> float:
        """|<self|other>|^2 of the normalized states.  Phase-insensitive."""
        denom = self.norm_sq() * other.norm_sq()
        return abs(self.overlap(other)) ** 2 / denom

    def change_basis(self) -> "EmitterState":
        """Hadamard every emitter, toggling energy <-> plusminus."""
        amps = _hadamard_all_bits(self.amps, self.n)
        target = PLUSMINUS if self.basis == ENERGY else ENERGY
        return EmitterState(self.n, target, amps)

    def apply_sign_flips(self, emitters: tuple[int, ...]) -> "EmitterState":
        """Flip the sign of the '-' component of the listed emitters.

        This is the feedforward correction; it is diagonal in the
        plusminus basis, so the state must carry that tag.
        """
        if self.basis != PLUSMINUS:
            raise StateOpError("sign flips are defined in the plusminus basis")
        mask = 0
        for e in emitters:
            if not 0 <= e < self.n:
                raise StateOpError(f"emitter index {e} out of range for n={self.n}")
            mask |= 1 << e
        amps = {}
        for c in sorted(self.amps):
            parity = bin(c & mask).count("1") & 1
            amps[c] = -self.amps[c] if parity else self.amps[c]
        return EmitterState(self.n, self.basis, amps)

    def phase_normalized(self) -> "EmitterState":
        """Rotate the global phase so a reference amplitude is real >= 0.

        The reference is the all-'+' config when populated, otherwise the
        lowest populated config.
        """
        ref = None
        if abs(self.amps.get(0, 0.0)) > PRUNE_TOL:
            ref = self.amps[0]
        else:
            for c in sorted(self.amps):
                if abs(self.amps[c]) > PRUNE_TOL:
                    ref = self.amps[c]
                    break
        if ref is None:
            return self.copy()
        phase = ref / abs(ref)
        return EmitterState(self.n, self.basis, {c: a / phase for c, a in self.amps.items()})

    def dense(self) -> np.ndarray:
        out = np.zeros(1 << self.n, dtype=complex)
        for c, a in self.amps.items():
            out[c] = a
        return out


def klm_target(n: int) -> EmitterState:
    """Uniform superposition of the N+1 domain-wall register states.

    Config j has emitters 0..j-1 in '+' and j..n-1 in '-', for j = 0..n;
    every amplitude is 1/sqrt(n+1).  Plusminus basis.
    """
    if n < 1:
        raise StateOpError(f"need n >= 1, got {n}")
    a = 1.0 / math.sqrt(n + 1)
    amps = {(1 << n) - (1 << j): complex(a) for j in range(n + 1)}
    return EmitterState(n, PLUSMINUS, amps)


def _hadamard_all_bits(amps: dict[int, complex], n: int) -> dict[int, complex]:
    cur = amps
    for i in range(n):
        bit = 1 << i
        nxt: dict[int, complex] = {}
        for c in sorted(cur):
            a = cur[c] * _SQRT_HALF
            lo, hi = c & ~bit, c | bit
            nxt[lo] = nxt.get(lo, 0.0) + a
            nxt[hi] = nxt.get(hi, 0.0) + (-a if c & bit else a)
        cur = {c: a for c, a in nxt.items() if abs(a) > PRUNE_TOL}
    return cur


@dataclass
class DetectorOutcome:
    detector: str
    probability: float
    state: EmitterState  # normalized register state conditioned on the click


class SystemState:
    """Mutable photon + register state.  Value semantics via copy()."""

    __slots__ = ("n", "basis", "amplitudes", "sinks")

    def __init__(
        self,
        n: int,
        amplitudes: dict[Slot, complex] | None = None,
        sinks: dict[str, float] | None = None,
        basis: str = ENERGY,
    ):
        if n < 1:
            raise StateOpError(f"need at least one emitter, got n={n}")
        if basis not in (ENERGY, PLUSMINUS):
            raise StateOpError(f"unknown basis {basis!r}")
        self.n = n
        self.basis = basis
        self.amplitudes: dict[Slot, complex] = dict(amplitudes or {})
        self.sinks: dict[str, float] = dict(sinks or {})

    # -- construction ---------------------------------------------------

    @classmethod
    def initial(cls, n: int, photon_mode: int, photon_pol: str, emitters: str) -> "SystemState":
        """Photon in one definite slot, each emitter in |+> or |->.

        ``emitters`` is a string of '+'/'-' labels, emitter 0 first.  The
        register is expanded into the energy basis immediately.
        """
        if photon_pol not in POLARIZATIONS:
            raise StateOpError(f"polarization must be H or V, got {photon_pol!r}")
        if len(emitters) != n or set(emitters) - {"+", "-"}:
            raise StateOpError(f"emitters must be n '+'/'-' labels, got {emitters!r}")
        scale = 2.0 ** (-n / 2.0)
        amps: dict[Slot, complex] = {}
        for c in range(1 << n):
            sign = 1.0
            for i, label in enumerate(emitters):
                if c >> i & 1 and label == "-":
                    sign = -sign
            amps[(photon_mode, photon_pol, c)] = complex(sign * scale)
        return cls(n, amps)

    def copy(self) -> "SystemState":
        return SystemState(self.n, self.amplitudes, self.sinks, self.basis)

    # -- bookkeeping ----------------------------------------------------

    @property
    def total_norm(self) -> float:
        """sum |amp|^2 + sum sinks.  Conserved by every operation."""
        amp_part = sum(abs(self.amplitudes[k]) ** 2 for k in sorted(self.amplitudes))
        sink_part = sum(self.sinks[k] for k in sorted(self.sinks))
        return amp_part + sink_part

    def photon_probability(self) -> float:
        return sum(abs(self.amplitudes[k]) ** 2 for k in sorted(self.amplitudes))

    def occupied_modes(self) -> list[int]:
        return sorted({m for m, _, _ in self.amplitudes})

    def _slots_on_mode(self, mode: int) -> list[Slot]:
        return sorted(k for k in self.amplitudes if k[0] == mode)

    def _set(self, slot: Slot, amp: complex) -> None:
        # plain complex keeps dumps and JSON free of numpy scalar reprs
        if abs(amp) > PRUNE_TOL:
            self.amplitudes[slot] = complex(amp)
        else:
            self.amplitudes.pop(slot, None)

    def _add(self, slot: Slot, amp: complex) -> None:
        self._set(slot, self.amplitudes.get(slot, 0.0) + amp)

    def _add_sink(self, sink: str, p: float) -> None:
        if p != 0.0:
            self.sinks[sink] = self.sinks.get(sink, 0.0) + float(p)

    # -- operations -----------------------------------------------------

    def apply_polarization_unitary(self, mode: int, matrix: np.ndarray) -> None:
        """2x2 unitary on (H, V) of one spatial mode."""
        m = _check_unitary(matrix)
        configs = sorted({c for (_, _, c) in self._slots_on_mode(mode)})
        for c in configs:
            h = self.amplitudes.pop((mode, H, c), 0.0)
            v = self.amplitudes.pop((mode, V, c), 0.0)
            self._set((mode, H, c), m[0, 0] * h + m[0, 1] * v)
            self._set((mode, V, c), m[1, 0] * h + m[1, 1] * v)

    def apply_mode_mixer(self, a: int, b: int, matrix: np.ndarray) -> None:
        """2x2 unitary between two spatial modes, per polarization.

        new_a = m00*a + m01*b, new_b = m10*a + m11*b.
        """
        if a == b:
            raise StateOpError("mixer needs two distinct modes")
        m = _check_unitary(matrix)
        pairs = sorted({(p, c) for (md, p, c) in self.amplitudes if md in (a, b)})
        for (pol, c) in pairs:
            ka, kb = (a, pol, c), (b, pol, c)
            va = self.amplitudes.pop(ka, 0.0)
            vb = self.amplitudes.pop(kb, 0.0)
            self._set(ka, m[0, 0] * va + m[0, 1] * vb)
            self._set(kb, m[1, 0] * va + m[1, 1] * vb)

    def apply_pbs(self, routing: dict[tuple[int, str], int]) -> None:
        """Reroute (mode, pol) slots to new modes; polarization unchanged.

        Slots not named in the routing stay put.  The move must be
        collision-free on occupied slots; a beam splitter that would put
        two occupied slots on top of each other is a wiring error.
        """
        occupied = sorted(self.amplitudes)
        moves: list[tuple[Slot, Slot]] = []
        stay: set[Slot] = set()
        for (m, p, c) in occupied:
            out = routing.get((m, p))
            if out is None or out == m:
                stay.add((m, p, c))
            else:
                moves.append(((m, p, c), (out, p, c)))
        taken = set(stay)
        for _, dst in moves:
            if dst in taken:
                raise StateOpError(f"routing collision at slot {dst}")
            taken.add(dst)
        amps = [self.amplitudes.pop(src) for src, _ in moves]
        for (_, dst), a in zip(moves, amps):
            self.amplitudes[dst] = a

    def apply_mirror(self, in_mode: int, out_mode: int) -> None:
        """Relabel one spatial mode onto another.

        Unlike a beam splitter this may land on an occupied mode, in
        which case amplitudes add coherently.  Norm is preserved only
        when the merged branches occupy disjoint (pol, config) slots;
        the executor's conservation check catches misuse.
        """
        if in_mode == out_mode:
            return
        for (m, p, c) in self._slots_on_mode(in_mode):
            a = self.amplitudes.pop((m, p, c))
            self._add((out_mode, p, c), a)

    def apply_attenuator(self, mode: int, coeff: complex, sink: str) -> None:
        """Multiply one mode by coeff, |coeff| <= 1; lost mass goes to sink."""
        mag = abs(coeff)
        if mag > 1.0 + 1e-12:
            raise StateOpError(f"attenuator coefficient must have |c| <= 1, got |{coeff}|")
        drop = max(0.0, 1.0 - mag * mag)
        for slot in self._slots_on_mode(mode):
            a = self.amplitudes[slot]
            self._add_sink(sink, drop * abs(a) ** 2)
            self._set(slot, coeff * a)

    def apply_emitter_scatter(
        self,
        in_mode: int,
        emitter: int,
        coeffs,
        reflected_out: int,
        herald_sink: str,
    ) -> None:
        """Scatter the photon at in_mode off one emitter.

        Diagonal in the energy basis: the g+ branch reflects with +r, the
        g- branch with -r, and the reflected photon flips polarization.
        Transmission and free-space emission both mean the herald will
        not fire, so their combined probability 1 - |r|^2 lands in the
        herald sink.
        """
        if self.basis != ENERGY:
            raise StateOpError("scattering requires the energy basis")
        if not 0 <= emitter < self.n:
            raise StateOpError(f"emitter index {emitter} out of range for n={self.n}")
        slots = self._slots_on_mode(in_mode)
        pols = {p for _, p, _ in slots}
        if len(pols) > 1:
            raise StateOpError(f"mode {in_mode} carries both polarizations, scattering undefined")
        r = coeffs.r
        miss = max(0.0, 1.0 - abs(r) ** 2)
        bit = 1 << emitter
        for (m, p, c) in slots:
            a = self.amplitudes.pop((m, p, c))
            self._add_sink(herald_sink, miss * abs(a) ** 2)
            sign = -1.0 if c & bit else 1.0
            out_pol = V if p == H else H
            self._add((reflected_out, out_pol, c), sign * r * a)

    def change_basis(self) -> None:
        """Hadamard every emitter, toggling energy <-> plusminus."""
        groups: dict[tuple[int, str], dict[int, complex]] = {}
        for (m, p, c) in sorted(self.amplitudes):
            groups.setdefault((m, p), {})[c] = self.amplitudes[(m, p, c)]
        self.amplitudes = {}
        for (m, p) in sorted(groups):
            for c, a in _hadamard_all_bits(groups[(m, p)], self.n).items():
                self.amplitudes[(m, p, c)] = a
        self.basis = PLUSMINUS if self.basis == ENERGY else ENERGY

    def measure_detector_bank(self, bank: dict[Slot2, str]) -> list[DetectorOutcome]:
        """Project onto which detector fired.

        ``bank`` maps (mode, pol) -> detector id and must cover every
        occupied slot.  Returns one outcome per detector that fires with
        probability above threshold, sorted by detector id; each carries
        the normalized register state conditioned on that click.
        """
        ids = list(bank.values())
        if len(set(ids)) != len(ids):
            raise StateOpError("detector ids must be unique")
        uncovered = sorted(
            {(m, p) for (m, p, _) in self.amplitudes if (m, p) not in bank}
        )
        if uncovered:
            raise UncoveredSlotError([(m, p, -1) for (m, p) in uncovered])
        collected: dict[str, dict[int, complex]] = {}
        for (m, p, c) in sorted(self.amplitudes):
            det = bank[(m, p)]
            collected.setdefault(det, {})[c] = self.amplitudes[(m, p, c)]
        outcomes = []
        for det in sorted(collected):
            amps = collected[det]
            prob = sum(abs(amps[c]) ** 2 for c in sorted(amps))
            if prob < PRUNE_TOL:
                continue
            scale = 1.0 / math.sqrt(prob)
            reg = EmitterState(self.n, self.basis, {c: a * scale for c, a in amps.items()})
            outcomes.append(DetectorOutcome(det, prob, reg))
        return outcomes

    # -- reporting ------------------------------------------------------

    def dump(self) -> str:
        """One line per slot, 'mode,pol,config,re,im', lexicographically sorted."""
        lines = [
            f"{m},{p},{config_label(c, self.n)},{a.real!r},{a.imag!r}"
            for (m, p, c), a in self.amplitudes.items()
        ]
        return "\n".join(sorted(lines))

    def allclose(self, other: "SystemState", tol: float = 1e-12) -> bool:
        if self.n != other.n or self.basis != other.basis:
            return False
        keys = self.amplitudes.keys() | other.amplitudes.keys()
        if any(
            abs(self.amplitudes.get(k, 0.0) - other.amplitudes.get(k, 0.0)) > tol
            for k in keys
        ):
            return False
        sk = self.sinks.keys() | other.sinks.keys()
        return all(abs(self.sinks.get(k, 0.0) - other.sinks.get(k, 0.0)) <= tol for k in sk)
