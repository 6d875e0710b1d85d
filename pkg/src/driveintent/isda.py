"""Implicit semantic data augmentation: running class statistics and loss.

The loss augments logit margins with class-conditional (diagonal)
covariance directions instead of generating samples:

    L = -log exp(z_y) / sum_j exp(z_j + (lambda/2) * (w_j - w_y)^T S_y (w_j - w_y))

with z_j = w_j^T f + b_j; the j == y penalty term is identically zero.
At lambda == 0 this is exactly categorical cross-entropy.
"""

from __future__ import annotations

import torch

from .labels import N_CLASSES


class IsdaState:
    """Count-weighted running per-class feature mean and diagonal covariance."""

    def __init__(self, feature_dim: int, n_classes: int = N_CLASSES, lambda0: float = 0.5):
        self.n_classes = n_classes
        self.lambda0 = lambda0
        self.counts = torch.zeros(n_classes, dtype=torch.float64)
        self.mean = torch.zeros(n_classes, feature_dim, dtype=torch.float64)
        self.var = torch.zeros(n_classes, feature_dim, dtype=torch.float64)

    def update(self, features: torch.Tensor, labels: torch.Tensor) -> None:
        feats = features.detach().to(torch.float64)
        for c in range(self.n_classes):
            batch = feats[labels == c]
            m = batch.shape[0]
            if m == 0:
                continue
            n = self.counts[c]
            batch_mean = batch.mean(dim=0)
            batch_var = batch.var(dim=0, unbiased=False)
            total = n + m
            delta = batch_mean - self.mean[c]
            new_mean = self.mean[c] + delta * (m / total)
            # merge of population variances (Chan et al. parallel update)
            new_var = (
                self.var[c] * (n / total)
                + batch_var * (m / total)
                + delta.pow(2) * (n * m / (total * total))
            )
            self.mean[c] = new_mean
            self.var[c] = new_var
            self.counts[c] = total

    def ratio(self, step: int, total_steps: int) -> float:
        """lambda(t) = lambda0 * t / T, monotone from 0 to lambda0."""
        if total_steps <= 0:
            return 0.0
        return self.lambda0 * min(step, total_steps) / total_steps

    def covariance(self, labels: torch.Tensor) -> torch.Tensor:
        return self.var[labels]


def isda_logit_penalty(
    weight: torch.Tensor, labels: torch.Tensor, cov: torch.Tensor, lam: float
) -> torch.Tensor:
    """(lambda/2) * (w_j - w_y)^T diag(S_y) (w_j - w_y) for every class j."""
    w_y = weight[labels]  # (N, A)
    diff = weight.unsqueeze(0) - w_y.unsqueeze(1)  # (N, C, A)
    return 0.5 * lam * (diff.pow(2) * cov.unsqueeze(1).to(diff.dtype)).sum(dim=2)


def isda_loss(
    features: torch.Tensor,
    labels: torch.Tensor,
    weight: torch.Tensor,
    bias: torch.Tensor,
    cov: torch.Tensor,
    lam: float,
    label_smoothing: float = 0.0,
) -> torch.Tensor:
    """Mean augmented cross-entropy over the batch.

    `cov` holds the per-sample diagonal covariance of the sample's class,
    shape (N, A).
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    logits = features @ weight.T + bias
    aug = logits + isda_logit_penalty(weight, labels, cov, lam)
    return torch.nn.functional.cross_entropy(aug, labels, label_smoothing=label_smoothing)
