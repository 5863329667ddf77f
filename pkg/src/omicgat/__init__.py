"""Multi-omic patient classification pipeline.

Stages: similarity-graph construction, multi-agent joint feature selection,
heterogeneous graph attention encoding per omic, cross-omic label fusion,
cross-validated evaluation and ablation-based biomarker ranking.
"""

__version__ = "0.1.0"
