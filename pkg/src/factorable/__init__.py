"""Factorable continuity of random fields: Monte Carlo construction of
``Delta(xi, delta) <= tau(omega) * g(delta)`` and the accompanying bounds."""

__version__ = "0.1.0"

from .bounds import (entropy_integral_bound, kr_factor_bound, kr_modulus_bound,
                     kr_w_distance, kr_w_matrix, v_functional)
from .factorize import (FactorizationResult, SequencePlan, build_factorization,
                        default_sequences, heavy_tail_factorization, rectangle_factorization,
                        solve_knots, tune_sequences, weaker_norm_factorization)
from .fields import (FieldEnsemble, apply_zm, simulate_brownian, simulate_brownian_sheet,
                     simulate_fbm, simulate_gaussian_field, simulate_stable, zm_transform)
from .knots import EmpiricalModulus, KnotFunction
from .metric import (DiscreteMeasure, DiscreteMetricSpace, ball_mass, covering_number,
                     natural_distance, orlicz_distance)
from .modulus import (gamma_function, path_modulus, rectangle_difference, rectangle_modulus,
                      theta_function)
from .orlicz import (GLSNorm, LuxemburgNorm, OrliczFunction, PsiFunction, grand_lebesgue_norm,
                     luxemburg_norm, natural_psi)
