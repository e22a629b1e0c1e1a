"""
Concentration Lab - numerical checks of concentration-of-measure bounds.

Modules:
- distributions: one-dimensional laws, quantiles, Gaussian transport, samplers
- tail_opt: optimal convex Markov bounds and regularity constants
- order_stats: order-statistic envelopes and sum bounds
- functionals: Minkowski, Orlicz, Lorentz, Latala and Poisson-hull functionals
- bounds: closed-form concentration bounds and calibration constants
- embed: random almost-isometric embeddings with net verification
- harness: Monte Carlo verification of bound curves and experiments
"""

__version__ = "1.0.0"
