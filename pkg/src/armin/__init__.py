"""ARMIN: a memory-augmented recurrent network toolkit.

A recurrent cell with gumbel-softmax auto-addressed external memory, an
LSTM baseline, synthetic algorithmic-task generators, a training/eval CLI,
and a tape-based reverse-mode differentiation core whose gradients are
verifiable against finite differences.
"""

from .backend import backend_name
from .tensor import Tape, Tensor

__all__ = ["Tape", "Tensor", "backend_name"]
__version__ = "0.1.0"
