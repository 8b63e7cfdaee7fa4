"""Formal normalization, Borel summation and Stokes data of doubly-resonant saddle-nodes."""

from .errors import (AnnulusEmpty, DegenerateResidue, DivIntegrabilityObstruction,
                     InsufficientRange, ModeMismatch, MonomialCutoffTooSmall,
                     NewtonDivergence, NotTransversallyHamiltonian, OverflowGuard,
                     ParseError, PoleOnRay, QuadratureFailure, RejectedInput,
                     SaddleNodeError, TruncationTooSmall, XOutsideSector)
from .pscore import EXACT, FLOAT, MultiSeries, UniSeries
from .vfield import (DiagSaddleNode, FiberedDiffeo, classify, parse_field,
                     format_field, push_forward, residue)
from .normalizer import (NormalForm, normalize, normalize_div_integrable,
                         normalize_symplectic, verify_normalization)
from .summation import borel_transform, gevrey_fit, laplace_sum, lateral_jump
from .leafspace import LeafChart, SectorSpec, first_integrals, leaf_param, sector_for
from .stokes import compute_stokes_data, moduli_report, stokes_pipeline

__version__ = "0.1.0"
