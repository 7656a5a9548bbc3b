"""Recommender systems as controllers of Friedkin-Johnsen opinion dynamics."""

from .analysis import (
    compare_controllers,
    equivalence_certificate,
    free_evolution_steady_state,
    opinion_shift,
    sample_engagement,
)
from .controllers import (
    ModelFreeController,
    MpcController,
    closed_loop,
    mb_target,
    mf_equilibrium,
    mf_input,
    mpc_input,
    theta,
)
from .harness import generate_network, radical_user_scenario, run_batch
from .opinion_model import OpinionNetwork, connectivity, fj_equilibrium, fj_simulate, fj_step, validate
from .plant import (
    ControlledPlant,
    constant_input_steady_state,
    extract_plant,
    plant_step,
    reachability_bounds,
)

__version__ = "0.1.0"
