"""Self-augmentation (token substitution + CRF mixup) with meta-reweighting
for low-resource named entity recognition."""

__version__ = "0.1.0"
