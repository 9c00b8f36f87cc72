"""Renewal theory for point processes with dependent interarrival times,
computed through transfer operators on subshifts of finite type, with the
classical corollaries (key renewal, Markov renewal, lattice orbit counting)
and the self-similar fractal application (Minkowski dimension and content).

Hot kernels run on a numba lane with a pure-numpy fallback; select with the
RPF_BACKEND environment variable or ``kernels.set_backend``.
"""

from ._backend import get_backend, set_backend, worker_count
from .errors import (
    HorizonError,
    InputError,
    NumericalError,
    SchemaError,
    UnsupportedInputError,
    WrongTheoremError,
)
from .symbolic import (
    CylinderIndex,
    Subshift,
    admissible_words,
    enumerate_cycles,
    is_admissible,
    is_primitive,
    min_mean_cycle,
    preimage_prefixes,
)
from .potential import (
    LatticeReport,
    LocallyConstantPotential,
    PositivityCertificate,
    birkhoff_sum,
    check_eventually_positive,
    detect_lattice,
    geometric_potential,
    real_gcd,
)
from .spectral import (
    SpectralData,
    TransferMatrix,
    build_transfer,
    gibbs_measure,
    integrate,
    leading_eigendata,
    normalize_potential,
    pressure,
    solve_delta,
)
from .timefunc import TimeFunction, dri_check, dri_check_family
from .renewal import (
    AsymptoticResult,
    FFamily,
    RenewalProblem,
    asymptotic_G,
    cesaro_average,
    check_conditions,
    eval_N,
    eval_N_grid,
    lattice_Gtilde,
    lattice_Gtilde_table,
)
from .classical import (
    KeyRenewalSpec,
    MarkovRenewalSpec,
    embed_key_spec,
    embed_markov_spec,
    key_renewal_asymptote,
    lalley_counting_asymptote,
    markov_renewal_G,
)
from .geometry import (
    SelfSimilarSystem,
    average_minkowski_content,
    minkowski_dimension,
    sierpinski_gamma_tube,
    sierpinski_tube_function,
    tube_volume_series,
)
from .simulate import SimulationSpec, empirical_N, sample_path

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
