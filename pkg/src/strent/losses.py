"""Cross-entropy losses over blended coarsenings, with analytic derivatives.

The blended log-loss charges each observation the weighted negative log mass
of the block containing its true label, one term per partition:

    L_l = -sum_t  w_t * log( sum_{j in B_t(y_l)} q_{l,j} )

With the trivial random partition every block is a single class, so the loss
collapses to the ordinary multiclass log-loss.  ``grad_hess`` returns the
exact per-observation gradient and diagonal Hessian of the loss with respect
to the logits feeding the softmax; these drive the Newton steps of the
boosting trainer.
"""

from typing import NamedTuple

import numpy as np

from ._validation import check_labels, check_prob_matrix

__all__ = [
    "softmax",
    "log_loss",
    "structured_log_loss",
    "structured_grad_hess",
    "coarsened_accuracy",
    "GradHess",
    "PROB_FLOOR",
]

# Probabilities are clamped here before any log; softmax output can underflow
# to zero for extreme logit spreads.
PROB_FLOOR = 1e-15


class GradHess(NamedTuple):
    """Per-observation gradient and diagonal Hessian w.r.t. logits (n x k)."""

    grad: np.ndarray
    hess_diag: np.ndarray


def softmax(logits):
    """Row-wise softmax with max-subtraction; rows sum to 1."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits contain non-finite values")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _mean_nll(picked):
    """Mean negative log of the picked probabilities, clamped at PROB_FLOOR."""
    return float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())


def log_loss(probs, labels):
    """Mean negative log probability of the true class."""
    probs = check_prob_matrix(probs)
    labels = check_labels(labels, probs.shape[1])
    if labels.shape[0] != probs.shape[0]:
        raise ValueError(
            f"{probs.shape[0]} probability rows but {labels.shape[0]} labels"
        )
    return _mean_nll(probs[np.arange(len(labels)), labels])


def _block_mass_of_labels(probs, labels, part):
    """Per-row probability mass of the block containing each row's label."""
    if part.is_singletons():
        return probs[np.arange(len(labels)), labels]
    block_ids = part.coarsen_labels(labels)
    block_probs = probs @ part.membership.T
    return block_probs[np.arange(len(labels)), block_ids]


def structured_log_loss(probs, labels, rp):
    """Blended log-loss: weighted average of log-losses at each coarsening."""
    probs = check_prob_matrix(probs, rp.num_classes)
    labels = check_labels(labels, rp.num_classes)
    if labels.shape[0] != probs.shape[0]:
        raise ValueError(
            f"{probs.shape[0]} probability rows but {labels.shape[0]} labels"
        )
    total = 0.0
    for part, w in rp:
        total += w * _mean_nll(_block_mass_of_labels(probs, labels, part))
    return total


def structured_grad_hess(logits, labels, rp):
    """Exact gradient and diagonal Hessian of the blended log-loss after
    softmax, per observation (summed, not averaged over the batch).

    For one observation with softmax probabilities q, true-label block B and
    block mass Q = sum_{j in B} q_j, each partition contributes

        d/dz_c   :  q_c - [c in B] * q_c / Q
        d2/dz_c2 :  q_c (1 - q_c) - [c in B] * r_c (1 - r_c),  r_c = q_c / Q

    weighted by the partition weight.  Gradient rows sum to zero.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = check_labels(labels, rp.num_classes)
    if logits.ndim != 2 or logits.shape[1] != rp.num_classes:
        raise ValueError(f"logits must be n x {rp.num_classes}, got {logits.shape}")
    if logits.shape[0] != labels.shape[0]:
        raise ValueError(
            f"{logits.shape[0]} logit rows but {labels.shape[0]} labels"
        )
    q = softmax(logits)
    n = len(labels)
    rows = np.arange(n)
    base_hess = q * (1.0 - q)
    grad = np.zeros_like(q)
    hess = np.zeros_like(q)
    for part, w in rp:
        if w == 0.0:
            continue
        if part.is_singletons():
            ratio = np.zeros_like(q)
            ratio[rows, labels] = 1.0
            grad += w * (q - ratio)
            hess += w * base_hess
            continue
        block_ids = part.coarsen_labels(labels)
        in_block = part.membership[block_ids]
        mass = (q * in_block).sum(axis=1)
        rho = q / np.maximum(mass, PROB_FLOOR)[:, None]
        ratio = in_block * rho
        grad += w * (q - ratio)
        hess += w * (base_hess - ratio * (1.0 - rho))
    return GradHess(grad, hess)


def coarsened_accuracy(probs, labels, part):
    """Fraction of rows whose fine argmax lands in the true label's block.

    The fine prediction is taken first, then both prediction and label are
    mapped through the partition.
    """
    probs = check_prob_matrix(probs, part.num_classes)
    labels = check_labels(labels, part.num_classes)
    if labels.shape[0] != probs.shape[0]:
        raise ValueError(
            f"{probs.shape[0]} probability rows but {labels.shape[0]} labels"
        )
    pred_blocks = part.coarsen_labels(probs.argmax(axis=1))
    true_blocks = part.coarsen_labels(labels)
    return float((pred_blocks == true_blocks).mean())
