"""Python bindings for the flow-expansion core.

The compiled extension `_fexp` carries the numerical operations: the exact
discrete mirror-descent oracle, entropy/VENDI/validity metrics, interpolant
schedules, verifiers, flow-model training and sampling.
"""

from _fexp import *  # noqa: F401,F403
