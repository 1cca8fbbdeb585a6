"""WKB asymptotics of quasistationary distributions and extinction times for
density-dependent Markov population processes, with exact and simulated checks."""
from .catalog import catalog
from .conditions import check_all
from .deterministic import find_equilibria
from .errors import QsdkitError
from .extinction import log_tau_limit, solve_D, tau_asymptotic, u_tilde
from .model import ModelSpec, StateSpaceGeom, build_model, load_model, validate_model
from .oracle import exact_qsd, gillespie_extinction, qsd_error_profile
from .wkb import engine, potential_V, potential_V0, qsd_wkb, sigma_and_G, theta, theta0

__version__ = "0.1.0"
