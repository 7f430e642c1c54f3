"""kbound: kernel-based FIR identification with robust probabilistic error bounds."""

__version__ = "0.1.0"
