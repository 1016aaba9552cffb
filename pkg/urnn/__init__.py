"""
uRNN Lab - unitary-evolution recurrent networks in NumPy
Structured unitary recurrences, modReLU, full BPTT and the long-memory benchmarks.
"""

__version__ = "1.0.0"
