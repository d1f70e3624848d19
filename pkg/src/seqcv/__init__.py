"""Sequential cross-validated bandwidth selection for kernel smoothers and detectors."""

from .crossval import (
    BandwidthPath,
    CvPlan,
    CvResult,
    cv_criterion,
    cv_objective,
    objective_surface,
    run_schedule,
    select_xi,
)
from .detection import (
    DetectorSpec,
    RunResult,
    calibrate_control_limit,
    mean_delay,
    run_detector,
    run_experiment,
)
from .errors import (
    ArgumentDomainError,
    CalibrationBracketError,
    ConfigError,
    DataError,
    DegenerateNormalizationError,
    DegenerateWindowError,
    SeqCVError,
)
from .kernels import Kernel, get_kernel, kernel_eval, validate_assumptions
from .limit import LimitSpec, limit_argmin, limit_objective, limit_vs_montecarlo, norming
from .simulation import (
    AR1,
    IIDGaussian,
    IIDResample,
    LinearProcess,
    MovingAverage,
    ScenarioParams,
    generate_errors,
    mean_path,
    simulate_scenario,
)
from .smoothing import (
    Series,
    SmootherState,
    loo_predict,
    loo_predict_stream,
    loo_predictions,
    smoother_normed,
    smoother_raw,
)

__version__ = "0.1.0"
