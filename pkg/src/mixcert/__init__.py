"""Finite-size certification of mixed-state sampling protocols.

Subpackages and modules:

* :mod:`mixcert.qcore` registers, states, partial traces, fidelity and entropy.
* :mod:`mixcert.symmetry` permutations and the symmetric subspace.
* :mod:`mixcert.idealball` Hamming balls and ideal-state certificates.
* :mod:`mixcert.opcalc` operator dominance and post-selection maps.
* :mod:`mixcert.protocols` the sampling and randomness-generation protocols with prover strategies.
* :mod:`mixcert.analysis` verification pipelines and reports.
* :mod:`mixcert.cli` the ``mixcert`` command.
"""

__version__ = "0.1.0"
