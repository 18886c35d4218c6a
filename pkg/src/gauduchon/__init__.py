"""gamma_k invariants of hermitian metrics on compact complex tori and coframe algebras."""
from .errors import (ArgumentError, EvaluationError, GauduchonError, IntegrabilityError,
                     NonConvergenceError, NotInvariantError, ParseError, SingularVolumeError)
from .grid import GridFunction, GridShape
from .forms import Form, ddbar, del_, delbar, power, wedge
from .metric import (ClassificationReport, HermitianMetric, OneFormPair, classify,
                     gauduchon_criterion, integral_criterion)
from .solver import (BisectionResult, ConformalReport, PsiFunction, SolveOptions, SolveReport,
                     conformal_bounds_check, find_k_gauduchon, gamma_k, solve_semilinear)
from .coframe import CoframeAlgebra, gamma_k_invariant, parse_algebra, parse_form
from .expression import Expression, parse_expression

__version__ = "0.1.0"
