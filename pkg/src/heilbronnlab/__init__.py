"""Exact floors of pseudo-polynomials, exponential sums and Heilbronn-set experiments."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .approx import (TriangleKernel, VaalerPolynomial, g_lower_bound_check, product_coefficient,
                     product_envelope_series, product_indicator_error, triangle_fourier,
                     triangle_reconstruct, vaaler_build, vaaler_eval, zero_coordinate_count)
from .core import (HPReal, PseudoPolynomial, degree, evaluate, floor_exact, floor_many, parse,
                   rho_max)
from .errors import (AmbiguousFloor, ConstraintViolated, DegenerateInput, HeilbronnError,
                     HypothesisError, HypothesisViolated, IllConditioned, InvalidCase,
                     InvalidFamilyParams, NoAdmissibleDenominator, SingularBasis, TailTooLarge,
                     WitnessNotFound)
from .experiments import (FloorTable, IndexSet, Lattice, ScanResult, fit_exponent,
                          lattice_experiment, lattice_from_basis, multiples_count, scan_min,
                          scan_min_multi, scan_schedule)
from .expsum import (DifferenceSpec, ExponentCase, ExpSumReport, direct_sum, e,
                     forward_difference, geometric_sum, minima_sum, predicted_exponent,
                     psi_correlate, vaughan_decompose, vaughan_params, vdc_bound,
                     weyl_inequality_check)
from .modarith import (Frac128, RationalApprox, dirichlet_approx, dist_to_Z, divisor_s,
                       intersective_check, mangoldt, medium_range_approx, mul_int_mod1,
                       primes_upto, read_prime_table, write_prime_table)
from .vdcsets import (CosinePolynomial, FamilySpec, ShiftSet, delta_gamma_table, delta_upper,
                      family_generate, fejer_kernel, gamma_lower, large_sieve_witness)
