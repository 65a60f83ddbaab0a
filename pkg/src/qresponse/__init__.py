"""Quantum dynamical response of NV-centre spins.

Closed-form 3x3 eigensystems, Berry curvature of the NV spin-1 Hamiltonian,
quench dynamics that retrieve it, decoherence from a nuclear bath, and
field/velocity inversion for motion sensing.
"""

__version__ = "0.1.0"

from .bath import (BathSector, MixedResponseResult, bath_sectors, decoherence_sweep, mixed_response,
                   polarization_sweep)
from .berry import (CurvatureCartesian, CurvatureSpherical, HamiltonianFamily, cartesian_family,
                    curvature_cartesian_analytic, curvature_fd, curvature_numeric, curvature_spherical_analytic,
                    equator_curvature, geometric_tensor_fd, spherical_family)
from .eig3 import EigenSystem, eig3_exact, eig_iterative, eigvals3, spectral_range
from .exceptions import (DegeneracyError, GaugeError, NonHermitianError, NumericalError, SingularSystemError,
                         StepUnderflowError, UnidentifiableError)
from .inversion import (EnsembleConfig, MotionEstimate, analytic_observables, forward_observables, ramp_path,
                        response_components, sensitivity_bound, solve_motion, solve_vector, static_observables,
                        susceptibility)
from .linalg import expectation, kron, spin_operators
from .nv_model import (BathParams, FieldVector, NvParams, hamiltonian_cartesian, hamiltonian_coupled,
                       hamiltonian_spherical)
from .propagator import (QuenchProtocol, ResponseResult, evolve, response_sweep, retrieval_target,
                         rotating_quench, rotating_quench_response)
