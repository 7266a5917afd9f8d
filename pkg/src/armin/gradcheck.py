"""Central-finite-difference oracle for the tape's analytic gradients."""

from __future__ import annotations

import numpy as np

from .errors import DeterminismError
from .tensor import GradMap, Tape, Tensor

REL_FLOOR = 1e-8


def _rel_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(REL_FLOOR, abs(analytic) + abs(numeric))


def finite_diff_report(
    f,
    params: dict[str, Tensor],
    eps: float = 1e-5,
    coord_budget: int | None = None,
    rng: np.random.Generator | None = None,
) -> dict[str, float]:
    """Max relative error per parameter tensor.

    ``f(params) -> Tensor`` must be a deterministic scalar forward pass built
    from tape ops; any sampling inside it has to be frozen.  The analytic
    gradient comes from one taped evaluation; the numeric one from central
    differences around every coordinate (or a subsample of at least
    ``coord_budget`` total coordinates when given).
    """
    with Tape() as tape:
        loss = f(params)
    first = loss.item()
    with Tape():
        again = f(params).item()
    if first != again:
        raise DeterminismError(
            f"f is not reproducible: {first!r} vs {again!r} on repeated call"
        )
    grads = tape.backward(loss)

    total = sum(p.data.size for p in params.values())
    per_tensor_cap: dict[str, int] = {}
    if coord_budget is not None and total > coord_budget:
        budget = max(coord_budget, 1)
        for name, p in params.items():
            share = max(1, round(budget * p.data.size / total))
            per_tensor_cap[name] = min(p.data.size, share)
    if rng is None:
        rng = np.random.default_rng(0)

    def eval_plain() -> float:
        return f(params).item()

    report: dict[str, float] = {}
    for name, p in params.items():
        analytic = grads.get(p)
        if analytic is None:
            analytic = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        aflat = analytic.reshape(-1)
        n = flat.shape[0]
        cap = per_tensor_cap.get(name)
        coords = (
            rng.choice(n, size=cap, replace=False) if cap is not None and cap < n
            else range(n)
        )
        worst = 0.0
        for j in coords:
            orig = flat[j]
            flat[j] = orig + eps
            fp = eval_plain()
            flat[j] = orig - eps
            fm = eval_plain()
            flat[j] = orig
            numeric = (fp - fm) / (2.0 * eps)
            err = _rel_error(float(aflat[j]), numeric)
            if err > worst:
                worst = err
        report[name] = worst
    return report


def finite_diff_check(
    f,
    params: dict[str, Tensor],
    eps: float = 1e-5,
    coord_budget: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error over all checked coordinates of all parameters."""
    report = finite_diff_report(f, params, eps=eps, coord_budget=coord_budget, rng=rng)
    return max(report.values()) if report else 0.0
