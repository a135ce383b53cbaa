"""gridce: counterfactual demand explanations for power-system dispatch."""

__version__ = "0.1.0"
