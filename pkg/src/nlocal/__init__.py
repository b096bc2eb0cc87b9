"""Noise-robust detection of non n-locality in linear quantum networks.

Modules:

* ``matrixkit``: small dense linear-algebra helpers for qubit registers
* ``states``: two-qubit states, Bloch decomposition, canonical orientation
* ``noise``: noisy source preparation and damping channels
* ``povm``: lossy Bell-state and qubit measurements
* ``network``: the I/J quantities, full and factorized evaluators, the
  closed-form criterion and settings optimisation
* ``persistency``: longest detectable chains, sweeps, and table recomputation
* ``verify``: property suites shared by the CLI and the test-suite
* ``cli``: the ``nlocal`` command-line front end
"""

__version__ = "0.1.0"
