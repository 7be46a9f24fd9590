"""Lipschitz-bound certification toolkit for small ReLU networks."""

__version__ = "0.1.0"

from .bounds import (LipschitzBound, atomic_bound, atomic_pair_bound,
                     paired_exact, paired_relaxed)
from .certify import (AttackResult, CertificationReport, attack_check,
                      build_pair_bounds, certified_accuracy_curve,
                      certified_radius)
from .data import load_csv, load_idx_pair, load_spec, synth_clusters
from .errors import (CapacityError, IntegrityError, LipcertError, NumericError,
                     ParseError, TrainingError, UsageError)
from .linalg import PNorm, induced_norm, power_iteration, vec_norm
from .model import (Layer, MlpNetwork, forward, forward_batch, load_network,
                    pair_margin, save_network)
from .propcert import (LabeledDataset, SeparationStats, min_cross_class_distance,
                       prop1_certify_training, prop1_classify, prop1_score,
                       separation_stats)
from .pwl import (PiecewiseLinearFn, VariabilityReport, check_theorem1,
                  extract_slice, intrinsic_variability, pwl_combine, pwl_relu,
                  total_variation)
from .train import TrainConfig, train_penalized
