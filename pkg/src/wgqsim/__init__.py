"""Deterministic simulator for heralded multi-qubit state generation in
a one-dimensional waveguide.

A single ancilla photon is routed through a linear-optics network and
scattered off a chain of emitter qubits; detecting it in one of the
output ports heralds an entangled register state that local sign flips
turn into the target superposition.  The package provides the sparse
state engine, circuit components and builders, a netlist format, closed
form and simulated figures of merit, broadening averages, and a CLI.
"""

from .analysis import (
    AveragedFidelity,
    QuadratureBudgetError,
    SweepResult,
    averaged_fidelity,
    conditioned_fidelity,
    fidelity_kernel,
    simulated_success_probability,
    success_probability,
    sweep,
)
from .circuit import (
    HWP,
    PBS,
    Attenuator,
    Circuit,
    CircuitError,
    DetectorBank,
    EmitterScatter,
    ExecutionResult,
    Mirror,
    Mixer,
    NormViolationError,
    check_passive_unitarity,
    execute,
)
from .netlist import NetlistError, builtin_netlist, load, parse, save, serialize
from .params import ProtocolParams
from .protocols import (
    HeraldedOutcome,
    ProtocolRun,
    build_heralded_z,
    build_n_qubit,
    build_protocol,
    build_three_qubit,
    build_two_qubit,
    feedforward_rules,
    run_protocol,
)
from .scatter import (
    EmitterParams,
    IDEAL,
    InvalidParameterError,
    ScatterCoeffs,
    heralded_z_success,
    hwp_matrix,
    scatter_coeffs,
)
from .state import (
    DetectorOutcome,
    EmitterState,
    StateOpError,
    SystemState,
    UncoveredSlotError,
    config_label,
    klm_target,
)
from .verify import CheckResult, run_checks

__version__ = "0.1.0"

__all__ = [
    "Attenuator",
    "AveragedFidelity",
    "CheckResult",
    "Circuit",
    "CircuitError",
    "DetectorBank",
    "DetectorOutcome",
    "EmitterParams",
    "EmitterScatter",
    "EmitterState",
    "ExecutionResult",
    "HWP",
    "HeraldedOutcome",
    "IDEAL",
    "InvalidParameterError",
    "Mirror",
    "Mixer",
    "NetlistError",
    "NormViolationError",
    "PBS",
    "ProtocolParams",
    "ProtocolRun",
    "QuadratureBudgetError",
    "ScatterCoeffs",
    "StateOpError",
    "SweepResult",
    "SystemState",
    "UncoveredSlotError",
    "averaged_fidelity",
    "build_heralded_z",
    "build_n_qubit",
    "build_protocol",
    "build_three_qubit",
    "build_two_qubit",
    "builtin_netlist",
    "check_passive_unitarity",
    "conditioned_fidelity",
    "config_label",
    "execute",
    "feedforward_rules",
    "fidelity_kernel",
    "heralded_z_success",
    "hwp_matrix",
    "klm_target",
    "load",
    "parse",
    "run_checks",
    "run_protocol",
    "save",
    "scatter_coeffs",
    "serialize",
    "simulated_success_probability",
    "success_probability",
    "sweep",
    "__version__",
]
