"""proofspace: tooling for exploring populations of formal proofs.

Subpackages cover tactic taxonomy and axiom auditing, ablation config
generation, proof-corpus geometry (cosine distances, MDS, GMM clustering),
and a provider-agnostic formalization orchestrator.
"""

__version__ = "0.1.0"
