"""Ensemble-based error mitigation for quantum-annealer style Ising sampling.

Modules: ``core`` (Ising model and energies), ``topology`` (Chimera and SK
benchmarks), ``precision`` (range normalization and DAC quantization),
``annealer`` (biased simulated annealer), ``mitigate`` (EQUAL, EQUAL+, SQC,
spin-reversal), ``metrics`` (energy residual and ground truth) and ``cli``.
"""

__version__ = "0.1.0"
