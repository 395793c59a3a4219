"""In-context counterfactual fairness: synthetic causal prior, PFN transformer,
case-study benchmark, baselines and evaluation harness."""

__version__ = "0.1.0"
