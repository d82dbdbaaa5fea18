"""Domain-adaptive intrusion detection across heterogeneous feature spaces.

Private per-domain networks project each dataset's features into a shared
latent space aligned by Gaussian-kernel MMD; a shared network classifies
flows as benign or attack.
"""

__version__ = "0.1.0"
