# models/stepwise.py
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from models.negbin import fit_design
from utils.config_utils import DEFAULT_K
from utils.errors import NonconcaveAtOptimum, SelectionBoundError, SingularDesign
from utils.log_utils import get_logger

logger = get_logger("stepwise")


@dataclass(frozen=True)
class SelectionStep:
    topic: str
    loglik: float
    aic: float
    fit: object


@dataclass(frozen=True)
class SelectionTrace:
    candidate: str
    k: int
    steps: tuple = ()
    base_fit: object = None

    @property
    def selected(self):
        return tuple(step.topic for step in self.steps)

    @property
    def final_fit(self):
        return self.steps[-1].fit if self.steps else self.base_fit

    def to_list(self):
        return [
            {"step": i, "topic": s.topic, "loglik": s.loglik, "aic": s.aic, "fit": s.fit.to_dict()}
            for i, s in enumerate(self.steps, start=1)
        ]


def _try_fit(design, columns, options, topic):
    """Fit one sub-model. Singular or non-converged fits score -inf."""
    try:
        fit = fit_design(design.subset(columns), options)
    except SingularDesign as e:
        logger.warning(f"⚠️ {design.candidate}: skipping '{topic}' ({e})")
        return topic, None, -math.inf
    except NonconcaveAtOptimum as e:
        logger.warning(f"⚠️ {design.candidate}: fit with '{topic}' is not concave at its optimum ({e}), treated as -inf")
        return topic, None, -math.inf
    if not fit.converged:
        logger.warning(f"⚠️ {design.candidate}: fit with '{topic}' did not converge, treated as -inf")
        return topic, fit, -math.inf
    return topic, fit, fit.loglik


def _best(scored, key):
    """Winner under key, ties broken by the smallest topic id."""
    best = None
    for topic, fit, value in sorted(scored, key=lambda item: item[0]):
        if fit is None or not math.isfinite(value):
            continue
        if best is None or key(value, fit) > key(best[2], best[1]):
            best = (topic, fit, value)
    return best


def forward_stepwise(design, k=DEFAULT_K, options=None, max_workers=1) -> SelectionTrace:
    """Greedy topic selection by maximised NB log-likelihood; controls always in."""
    available = list(design.topic_columns)
    if k < 0 or k > len(available):
        raise SelectionBoundError(
            f"k={k} outside 0..{len(available)} for {design.candidate}",
            k=k, available=len(available), candidate=design.candidate,
        )
    controls = list(design.control_columns)
    base_fit = fit_design(design.subset(controls), options)

    selected = []
    steps = []
    remaining = sorted(available)
    for step_no in range(1, k + 1):
        jobs = [(controls + selected + [topic], topic) for topic in remaining]
        if max_workers > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                scored = list(pool.map(lambda job: _try_fit(design, job[0], options, job[1]), jobs))
        else:
            scored = [_try_fit(design, columns, options, topic) for columns, topic in jobs]

        by_loglik = _best(scored, lambda value, fit: value)
        if by_loglik is None:
            raise SelectionBoundError(
                f"no usable topic at step {step_no} for {design.candidate}",
                step=step_no, candidate=design.candidate,
            )
        by_aic = _best(scored, lambda value, fit: -fit.aic)
        # every model in a step has the same parameter count, so AIC ranks as -loglik
        assert by_aic[0] == by_loglik[0] or math.isclose(by_aic[1].aic, by_loglik[1].aic, rel_tol=1e-12), (
            "AIC and log-likelihood disagree within a step"
        )

        topic, fit, loglik = by_loglik
        selected.append(topic)
        remaining.remove(topic)
        steps.append(SelectionStep(topic=topic, loglik=loglik, aic=fit.aic, fit=fit))
        logger.info(f"✅ {design.candidate}: step {step_no} adds '{topic}' (lnL {loglik:.3f})")

    return SelectionTrace(candidate=design.candidate, k=k, steps=tuple(steps), base_fit=base_fit)
