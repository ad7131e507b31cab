"""RSS-based spoofing detection.

A position-change detector compares frame pairs from their RSS
fingerprints, its all-pairs decisions over a frame sequence form an
undirected graph, and a small message-passing network classifies that
graph as legitimate activity or an attack. Clustering baselines and a
Monte Carlo evaluation harness round out the package.
"""

__version__ = "0.1.0"

from . import baselines, cli, evaluation, gnn, graphgen, ingest, neural, pcd, seeds, simdata, synth, trajectory  # noqa: F401
from .errors import (  # noqa: F401
    ConfigError,
    GsdError,
    InfeasibleScenarioError,
    InsufficientDataError,
    MissingPrerequisiteError,
    NumericalError,
    ParseError,
)
