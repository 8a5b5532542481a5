"""
Finite-difference gradient checking
"""
from dataclasses import dataclass, field
from typing import Callable, List, Sequence

import numpy as np

from utils.autodiff import Tape, Tensor, backward, recording

DENOMINATOR_FLOOR = 1e-8


@dataclass
class GradCheckReport:
    name: str
    analytic: List[np.ndarray] = field(default_factory=list)
    numeric: List[np.ndarray] = field(default_factory=list)
    rel_errors: List[np.ndarray] = field(default_factory=list)
    max_rel_error: float = 0.0
    failures: int = 0
    coordinates: int = 0

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def summary(self) -> str:
        status = 'PASS' if self.passed else 'FAIL'
        return (f"{status} {self.name}: max rel error {self.max_rel_error:.3e} "
                f"over {self.coordinates} coordinates ({self.failures} failing)")


def grad_check(f: Callable[..., Tensor], inputs: Sequence[Tensor], h: float = 1e-6, tol: float = 1e-4,
               name: str = 'f') -> GradCheckReport:
    """Compare backward gradients of scalar ``f(*inputs)`` against central differences"""
    if not 1e-7 <= h <= 1e-4:
        raise ValueError(f"grad_check: step h must lie in [1e-7, 1e-4], got {h}")

    for t in inputs:
        t.zero_grad()
    tape = Tape()
    with recording(tape):
        out = f(*inputs)
    backward(tape, out)
    report = GradCheckReport(name=name)

    for t in inputs:
        analytic = t.grad.copy() if t.grad is not None else np.zeros_like(t.values)
        numeric = np.zeros_like(t.values)
        for i in range(t.size):
            original = t.values.flat[i]
            t.values.flat[i] = original + h
            upper = f(*inputs).item()
            t.values.flat[i] = original - h
            lower = f(*inputs).item()
            t.values.flat[i] = original
            numeric.flat[i] = (upper - lower) / (2.0 * h)

        diff = np.abs(analytic - numeric)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), DENOMINATOR_FLOOR)
        rel = diff / denom
        bad = np.isnan(rel) | (rel >= tol)
        rel = np.where(np.isnan(rel), np.inf, rel)

        report.analytic.append(analytic)
        report.numeric.append(numeric)
        report.rel_errors.append(rel)
        report.failures += int(bad.sum())
        report.coordinates += int(rel.size)
        if rel.size:
            report.max_rel_error = max(report.max_rel_error, float(rel.max()))
    return report
