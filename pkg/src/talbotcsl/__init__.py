"""Near-field Talbot interferometry of levitated nanospheres and Bayesian tests of CSL."""

from ._version import __version__
from .bayes import (
    DiscreteGrid,
    ExclusionCurve,
    InterferometerModel,
    LikelihoodTable,
    PosteriorGrid,
    TabulatedFamily,
    ThetaGrid,
    exclusion_line,
    experimental_prior,
    likelihood,
    mdip_prior,
    posterior,
    sample_positions,
)
from .config import DerivedGeometry, ExperimentConfig, Particle, derive_geometry
from .decoherence import (
    NO_COLLAPSE,
    CSLParams,
    DecoherenceChannel,
    ReductionFactors,
    blackbody_channel,
    collision_channel,
    combine,
    csl_rate,
    csl_resolution,
    csl_Rn,
    measurement_Rn,
)
from .design import ControlVector, grating_pulse, optimize_controls, visibility_red, visibility_sin
from .information import InfoResult, evidence, expected_information, info_gain
from .io import Scenario, maqro_preset
from .mie import mie_amplitudes
from .physics import fringe_amplitudes, grating_mask_terms, pattern_density, talbot_coefficient
from .pipeline import SweepSpec, lambda_at_rc, run_info_sweep, run_posterior
