"""
liftedmap
Coarse-to-fine lifted MAP inference for pairwise grid MRFs
"""

__version__ = "1.0.0"
