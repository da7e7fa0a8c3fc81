"""Mixup regularization, adversarial-robustness certificates and generalization bounds."""

__version__ = "0.1.0"
