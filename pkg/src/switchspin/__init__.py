"""Switched control of electron-nuclear spin systems.

A nucleus hyperfine-coupled to an electron precesses about one of two axes
depending on the electron state.  Delays separated by electron pi pulses
therefore switch between two rotation generators, and that alone reaches
every nuclear rotation, uniform or conditioned on the electron.
"""

from .errors import (
    DegenerateFrameError,
    ManifoldMismatchError,
    NormalizationError,
    NotControllableError,
    SwitchSpinError,
    SynthesisError,
)
from .sequence import (
    Delay,
    ElectronPulse,
    PropagatorPair,
    PulseSequence,
    Schedule,
    bloch_trajectory,
    complement_delay,
    full_propagator,
    manifold_propagators,
    multi_full_propagator,
    pair_fidelity,
    seq_concat,
    seq_double,
)
from .su2 import (
    Rotation,
    random_rotation,
    rot_apply,
    rot_compose,
    rot_fidelity,
    rot_from_axis_angle,
    rot_to_axis_angle,
)
from .synthesis import (
    SynthesisOptions,
    SynthesisResult,
    lowenthal_k,
    synthesize_multi,
    synthesize_pair,
    synthesize_selective,
    synthesize_uniform,
)
from .system import (
    LabFrameParams,
    Manifold,
    ManifoldFrame,
    MultiSystemParams,
    SystemParams,
    check_multi_controllability,
    derive_frame,
    from_lab_frame,
    lie_closure_dimension,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
