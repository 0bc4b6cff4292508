"""Desk-scale toolkit for Hamiltonian-descent optimization studies:
grid Schrödinger simulation, adiabatic and classical gradient baselines,
Hamming-subspace encodings onto transverse-field Ising machines, spectral
three-phase diagnostics, and benchmarking metrics."""

from .mesh import (DIRICHLET, PERIODIC, DiagonalOperator, Mesh, WaveFunction,
                   build_fdm_operators, discretize_objective, expectation,
                   gaussian_state, point_mass, sample_positions,
                   success_probability, uniform_state)
from .objectives import (Objective, QpInstance, get_objective, levy2,
                         qp_eval_grad, qp_objective, quadratic_model,
                         rescale_to_unit_box)
from .dynamics import (Schedule, Trajectory, dilate_schedule, make_schedule,
                       qaa_evolve, qhd_evolve, radix2_problem)
from .classical import IterateTrace, ensemble_stats, nagd_run, sgd_run
from .spectral import (EigenSystem, build_fourier_hamiltonian,
                       build_hamiltonian, energy_ratio, lowest_eigenpairs,
                       lyapunov_W, probability_spectrum, semiclassical_ratio)
from .ising import (AnnealEnvelope, IsingModel, PrecisionLayout, QuboModel,
                    anneal_rescale, decode_samples, hamming_encode_qp,
                    hamming_isometry, qp_to_qubo, qubo_ising_convert,
                    relaxed_adjacency, relaxed_qhd_evolve,
                    simulate_ising_dense, verify_subspace_encoding)
from .bench import (ExperimentConfig, TtsReport, generate_qp,
                    grid_bruteforce_min, local_refine, run_experiment,
                    success, tcount, tts)

__version__ = "0.1.0"
