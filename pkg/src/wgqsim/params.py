"""Operating point of a whole N-emitter experiment."""

from __future__ import annotations

from dataclasses import dataclass, field

from .scatter import EmitterParams, InvalidParameterError, ScatterCoeffs, scatter_coeffs


@dataclass(frozen=True)
class ProtocolParams:
    """Nominal emitter parameters plus one detuning offset per emitter.

    Fixed optical elements (attenuators) are calibrated against the
    nominal point; only the scattering itself sees the offsets.  That
    split is what makes inhomogeneous offsets cost fidelity while a
    common detuning does not.
    """

    n: int
    nominal: EmitterParams = field(default_factory=EmitterParams)
    offsets: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidParameterError(f"need n >= 1 emitters, got {self.n}")
        if not self.offsets:
            object.__setattr__(self, "offsets", (0.0,) * self.n)
        if len(self.offsets) != self.n:
            raise InvalidParameterError(
                f"got {len(self.offsets)} offsets for {self.n} emitters"
            )

    def emitter(self, i: int) -> EmitterParams:
        return self.nominal.with_offset(self.offsets[i])

    def coeffs(self, i: int) -> ScatterCoeffs:
        return scatter_coeffs(self.emitter(i))

    def nominal_coeffs(self) -> ScatterCoeffs:
        return scatter_coeffs(self.nominal)
