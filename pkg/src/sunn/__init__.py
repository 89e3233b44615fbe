"""Dual-layer shallow unorganized neural network (SUNN) for edges and object popout."""

__version__ = "0.1.0"

from .errors import SunnError  # noqa: E402
from .topology import GridDims, TopologyConfig, RandomTopology, build_random_topology, neighbors  # noqa: E402
from .neuron import (GaussianParams, SignalField, WeightField, CMap, compute_weights,  # noqa: E402
                     connectivity_map, edge_map, propagate_intensity)
from .leaky import LeakConfig, PRMap, normalize_weights, leaky_step, run_leaky  # noqa: E402
from .popout import (pr_histogram, find_thresholds, popout_components, bilayer_segment,  # noqa: E402
                     center_fusion)
from .evaluation import binary_pr, iou, perturb_weights, robustness_experiment  # noqa: E402
from .pipeline import PipelineConfig, run_core, run_pipeline  # noqa: E402
