"""varmcf: volumetric varifold discretizations of surface measures,
kernel-regularized mean curvature, and weak mean curvature flow diagnostics.
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    brakke,
    curvature,
    discretization,
    experiments,
    flow,
    geometry,
    kernels,
    metrics,
    varifold,
)
from .brakke import (  # noqa: F401
    ConstantsLedger,
    GammaHypothesisError,
    RadialBump,
    brakke_residual,
    constants_ledger,
    exact_flow_residual,
    gamma_feasible,
)
from .curvature import (  # noqa: F401
    CurvatureQuery,
    DenominatorTooSmall,
    approx_mean_curvature,
    curvature_field,
    regularized_first_variation,
    regularized_mass,
)
from .discretization import Mesh, discretize, tangent_fit_quality  # noqa: F401
from .flow import (  # noqa: F401
    FlowTrajectory,
    SelfIntersectionError,
    ShrinkingCircle,
    ShrinkingSphere,
    run_curve_shortening,
)
from .geometry import (  # noqa: F401
    Circle,
    Ellipse,
    Sphere,
    Torus,
    WeightedSample,
    make_shape,
)
from .kernels import (  # noqa: F401
    KernelPair,
    default_kernel_pair,
    make_kernel_pair,
    normalization_constant,
    normalize_pair,
)
from .metrics import (  # noqa: F401
    AtomicMeasure,
    ahlfors_estimate,
    ahlfors_scan,
    atomize,
    bounded_lipschitz_distance,
)
from .varifold import (  # noqa: F401
    PointCloudVarifold,
    SampledManifoldVarifold,
    VolumetricVarifold,
)
