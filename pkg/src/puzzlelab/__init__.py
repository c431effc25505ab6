"""Puzzles, principal nests and moduli for quadratic maps z -> z^2 + c."""
__version__ = "0.1.0"

from .dynamics import (Parameter, fixed_points, green_potential, iterate, critical_orbit,
                       rotation_cycle)
from .rays import RayBudget, trace_ray, equipotential_curve, alpha_rotation_number
from .puzzle import PuzzlePiece, initial_puzzle, pull_back_piece, piece_contains
from .nest import (build_principal_nest, return_domains, classify_cascades,
                   detect_q_renormalization, combinatorial_signature, renormalization_annulus)
from .moduli import (RingDomain, estimate_modulus, principal_moduli, asymmetric_modulus,
                     eccentricity, conformal_radius, groetzsch_defect)
from .real import (real_nest, classify_real_cascades, cascade_markov_scheme, order_and_depth,
                   saddle_node_length, find_parameter, essential_geometry_report)
