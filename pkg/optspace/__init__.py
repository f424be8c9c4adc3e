from optspace.mc_errors import *
from optspace.mc_harness import ExperimentConfig, ResultRow, load_config, run, run_optspace, select_lambda
from optspace.mc_manifold import DescentOptions, DescentTrace, descend
from optspace.mc_obsmat import ObservedMatrix, project, read_observed, trim, write_observed
from optspace.mc_spectral import Factorization, reconstruct, spectral_estimate, truncated_svd
from optspace.mc_synth import SynthInstance, generate, generate_spiked, test_error, train_error
from optspace.mc_theory import ModelParams, TheoryPrediction, predict, theory_lambda
from optspace.mc_utils import set_logger
