"""CRF map matching for sparse GPS trajectories with route preference mining."""

__version__ = "0.1.0"

from .crf import CrfParams, MatchResult, train, viterbi
from .features import build_lattice
from .pipeline import MatcherConfig, match_batch, match_trajectory
from .preference import InvertedDriverTable, TimeSlot, slot_of
from .road_network import Node, RoadNetwork, RoadSegment, load_network, save_network
from .trajectory_io import Trajectory, average_interval, downsample, load_trajectories

__all__ = [
    "CrfParams",
    "MatchResult",
    "MatcherConfig",
    "InvertedDriverTable",
    "Node",
    "RoadNetwork",
    "RoadSegment",
    "TimeSlot",
    "Trajectory",
    "average_interval",
    "build_lattice",
    "downsample",
    "load_network",
    "load_trajectories",
    "match_batch",
    "match_trajectory",
    "save_network",
    "slot_of",
    "train",
    "viterbi",
]
