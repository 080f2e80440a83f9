import os
from datetime import datetime, timezone

import numpy as np

from models.negbin import FitResult

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
TWEETS_PATH = os.path.join(FIXTURES, "tweets.jsonl")
FOLLOWERS_PATH = os.path.join(FIXTURES, "followers.csv")


def utc(*args):
    return datetime(*args, tzinfo=timezone.utc)


def make_fit(columns, beta, covariance=None, candidate="x"):
    """A FitResult with the given coefficients, for tests that only need beta and its covariance."""
    beta = np.asarray(beta, dtype=float)
    p = beta.size
    cov = np.zeros((p + 1, p + 1))
    if covariance is not None:
        cov[:p, :p] = covariance
    se = np.sqrt(np.diag(cov)[:p])
    return FitResult(
        coefficients=beta, alpha=0.5, log_alpha_se=0.0, alpha_se=0.0, se=se,
        z_scores=np.zeros(p), p_values=np.ones(p), loglik=-1.0, aic=2.0 * (p + 1) + 2.0,
        n=10, iterations=1, converged=True, gradient_norm_at_opt=0.0, tolerance=1e-8,
        alpha_at_boundary=False, covariance=cov, columns=tuple(columns), candidate=candidate,
    )
