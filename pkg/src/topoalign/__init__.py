"""Topological-alignment jump process, its kinetic limit, and a
propagation-of-chaos measurement harness."""
from ._backend import BACKEND
from .kernel import (KernelSpec, alpha_N, compute_A, eval_kernel, make_kernel,
                     riemann_error, series_of_example_kernel)
from .rank_engine import (Configuration, build_rank_table, interaction_probs_chi,
                          interaction_probs_rank, torus_distance)
from .particle_sim import (InitialLaw, SimState, advance_to_next_event, execute_jump,
                           generator_consistency_check, run, sample_initial)
from .kinetic_solver import (DistributionFn, PhaseGrid, collision_gain, density,
                             partial_mass, solve, step)
from .chaos_metrics import (chaos_defect, empirical_marginal, marginal_distance,
                            phi_iteration, prop1_bound, theorem1_bound)

__version__ = "0.1.0"
