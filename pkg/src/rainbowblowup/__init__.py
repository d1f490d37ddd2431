"""Rainbow blow-up embeddings: coloured hosts, regularity tests, matching
samplers, colour splitting and the round-by-round rainbow embedder."""
from .errors import BudgetExhausted, InstanceError, InvariantBreach
from .graphcore import BipartiteGraph, EdgeSetColouring, PartitionedGraph

__version__ = "0.1.0"

__all__ = ["BipartiteGraph", "BudgetExhausted", "EdgeSetColouring", "InstanceError", "InvariantBreach",
           "PartitionedGraph", "__version__"]
