from .bounds import (
    BalanceBounds, DegenerateSplit, FixedPointReport, balancedness_bounds, delta_R, fourier_coefficients,
    fourier_lower_bound, penalized_bounds, second_derivative_check, verify_fixed_point, w1_weight, w2_lower,
)
from .envelope import QuantileEnvelope, quantile_envelope
from .model import NumericalError, PopulationModel, interval_grid, node_grid
from .scan import ScanResult, global_balancedness_scan
from .split import (
    PopulationSplitAnalysis, SplitProblem, delta_curve, optimal_split, pd_function, penalized_optimal_split,
)
