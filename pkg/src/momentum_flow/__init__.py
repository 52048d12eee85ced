"""Momentum flow transport: discretized rectified flow on toy distributions."""

from .forward import SubPathSample, Trajectory, simulate_batch, simulate_forward, subpath_point
from .metrics import PointCloud, energy_distance, exact_w2, knn_recall, sliced_w2, velocity_dispersion_profile
from .neural import AdamState, VelocityModel, adam_update, init_model, model_eval, model_grad
from .reverse import ReverseConfig, sample_reverse
from .schedule import Schedule, exact_marginal, gamma_bar, make_schedule, independent_marginal
from .training import TrainConfig, TrainReport, mfm_batch, mfm_loss, train

__version__ = "0.1.0"
