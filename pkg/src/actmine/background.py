"""Maximum-entropy background model over an activation matrix.

The model keeps one independent Bernoulli probability per matrix cell. The
initial fit is the max-entropy distribution whose row and column sums both
match the empirical ones; it has the rank-1 logit form
``P[v, k] = r_v * c_k / (1 + r_v * c_k)`` with positive row and column
factors. Factors are found by alternating exact one-dimensional solves
(Newton with a bisection safeguard) until the largest marginal residual drops
below tolerance.

Degenerate margins (all-zero / all-one rows or columns, including those forced
once other degenerate lines are removed) are pinned to the probability floor
or to 1 and left out of the solve. Rows sharing a row sum share a factor, so
the solve runs on at most K+1 row groups regardless of matrix height.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .gcn import ActivationMatrix

EPS = 1e-12
FIT_TOL = 1e-9
MAX_SWEEPS = 10_000


class FitConvergenceError(RuntimeError):
    def __init__(self, residual: float):
        super().__init__(f"marginal fit stalled at residual {residual:.3e}")
        self.residual = residual


@dataclass(eq=False)
class BackgroundModel:
    """Cell probabilities aligned with one activation matrix."""

    probabilities: np.ndarray
    layer: int
    residual: float

    def __post_init__(self):
        self.probabilities = np.asarray(self.probabilities, dtype=np.float64)

    def neglog2(self) -> np.ndarray:
        return -np.log2(self.probabilities)

    def to_csv(self, act: ActivationMatrix, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["graph", "node"]
                       + [f"c{k + 1}" for k in range(act.width)]
                       + ["decision"])
            for g, gid in enumerate(act.graph_ids):
                lo, hi = act.seg_starts[g], act.seg_starts[g + 1]
                for r in range(lo, hi):
                    w.writerow([gid, r - lo]
                               + [repr(p) for p in self.probabilities[r]]
                               + [int(act.decisions[g])])


def _solve_factors(own: np.ndarray, other: np.ndarray, weights: np.ndarray,
                   targets: np.ndarray) -> np.ndarray:
    """Exact per-line solve of sum_j w[l, j] * sig(x_l * other_j) = target_l.

    ``weights`` is a full (lines x terms) array, so callers can mask terms
    per line. Monotone in x; solved for log(x) by safeguarded Newton
    (bisection in the log domain), vectorized over lines. Working in logs
    keeps transient iterates finite even for margins near the boundary.
    """
    z = np.log(np.clip(own, 1e-300, 1e300))
    lo = np.full_like(z, -700.0)
    hi = np.full_like(z, 700.0)
    with np.errstate(over="ignore"):
        for _ in range(200):
            x = np.exp(z)
            prod = x[:, None] * other[None, :]
            p = 1.0 - 1.0 / (1.0 + prod)  # stays finite for huge products
            f = (weights * p).sum(axis=1) - targets
            if np.all(np.abs(f) < 1e-13):
                break
            pos = f > 0
            hi[pos] = np.minimum(hi[pos], z[pos])
            lo[~pos] = np.maximum(lo[~pos], z[~pos])
            deriv = x * (weights * other[None, :]
                         / (1.0 + prod) ** 2).sum(axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                nxt = z - f / deriv
            bad = ~np.isfinite(nxt) | (nxt <= lo) | (nxt >= hi)
            nxt = np.where(bad, (lo + hi) / 2.0, nxt)
            z = nxt
    return np.exp(z)


def _newton_polish(r, c, row_targets, col_targets, weights, mask,
                   iters: int = 200):
    """Damped Newton on the grouped marginal equations in log space.

    ``mask`` (groups x cols) zeroes cells already pinned by the caller.
    """
    g, k = len(r), len(c)
    a = np.concatenate([np.log(r), np.log(c)])

    def system(vec):
        rv = np.exp(vec[:g])
        cv = np.exp(vec[g:])
        with np.errstate(over="ignore"):
            prod = rv[:, None] * cv[None, :]
        q = (1.0 - 1.0 / (1.0 + prod)) * mask
        dq = q * (1.0 - q) * mask  # derivative w.r.t. the log factors
        f = np.concatenate([q.sum(axis=1) - row_targets,
                            (weights[:, None] * q).sum(axis=0) - col_targets])
        jac = np.zeros((g + k, g + k))
        jac[:g, :g] = np.diag(dq.sum(axis=1))
        jac[:g, g:] = dq
        jac[g:, :g] = (weights[:, None] * dq).T
        jac[g:, g:] = np.diag((weights[:, None] * dq).sum(axis=0))
        return f, jac

    f, jac = system(a)
    best = np.abs(f).max()
    for _ in range(iters):
        if best < FIT_TOL * 1e-2:
            break
        step, *_ = np.linalg.lstsq(jac, -f, rcond=None)
        scale = 1.0
        for _ in range(30):
            cand = a + scale * step
            fc, jc = system(cand)
            if np.abs(fc).max() < best:
                a, f, jac, best = cand, fc, jc, np.abs(fc).max()
                break
            scale *= 0.5
        else:
            break
    return np.exp(a[:g]), np.exp(a[g:]), best


def fit(act: ActivationMatrix) -> BackgroundModel:
    """Fit the max-entropy model matching the matrix's row and column sums."""
    bits = act.bits.astype(np.float64)
    n, k = bits.shape
    if n == 0 or k == 0:
        raise ValueError("activation matrix is empty")
    row_sum = bits.sum(axis=1)
    col_sum = bits.sum(axis=0)

    p = np.empty((n, k), dtype=np.float64)
    row_active = np.ones(n, dtype=bool)
    col_active = np.ones(k, dtype=bool)
    row_target = row_sum.copy()
    col_target = col_sum.copy()

    # Pin forced lines (targets at 0 or at the remaining width) until stable.
    changed = True
    while changed:
        changed = False
        n_cols = int(col_active.sum())
        n_rows = int(row_active.sum())
        if n_cols == 0 or n_rows == 0:
            break
        # Cells pinned at the probability floor count as exactly 0 toward
        # the margins; the floor only exists to keep logs finite.
        for v in np.where(row_active)[0]:
            if row_target[v] < 1e-9:
                p[v, col_active] = EPS
                row_active[v] = False
                changed = True
            elif row_target[v] > n_cols - 1e-9:
                p[v, col_active] = 1.0
                row_active[v] = False
                col_target[col_active] -= 1.0
                changed = True
        n_rows = int(row_active.sum())
        if n_rows == 0:
            break
        for c in np.where(col_active)[0]:
            if col_target[c] < 1e-9:
                p[row_active, c] = EPS
                col_active[c] = False
                changed = True
            elif col_target[c] > n_rows - 1e-9:
                p[row_active, c] = 1.0
                col_active[c] = False
                row_target[row_active] -= 1.0
                changed = True

    residual = 0.0
    if row_active.any() and col_active.any():
        rows = np.where(row_active)[0]
        cols = np.where(col_active)[0]
        # Rows with equal targets share a factor: group them.
        grp_targets, grp_of = np.unique(row_target[rows], return_inverse=True)
        grp_weight = np.bincount(grp_of).astype(np.float64)
        n_grp = len(grp_targets)
        n_cols = len(cols)
        gt = grp_targets.copy()
        ct = col_target[cols].copy()
        mask = np.ones((n_grp, n_cols))
        pinned = np.full((n_grp, n_cols), np.nan)
        r = gt / np.maximum(n_cols - gt, 1e-12)
        c = np.ones(n_cols, dtype=np.float64)

        def residuals(rv, cv):
            with np.errstate(over="ignore"):
                prod = rv[:, None] * cv[None, :]
            q = (1.0 - 1.0 / (1.0 + prod)) * mask
            return (q, q.sum(axis=1) - gt,
                    (grp_weight[:, None] * q).sum(axis=0) - ct)

        residual = np.inf
        sweeps = 0
        while sweeps < MAX_SWEEPS:
            # Margins from a 0/1 matrix can force whole (group x column)
            # blocks to 0 or 1 (factors diverge there); alternate scaling,
            # polish with Newton, then pin saturated blocks and re-solve
            # the reduced system until the tolerance is met.
            for _ in range(100):
                sweeps += 1
                r = _solve_factors(r, c, mask, gt)
                c = _solve_factors(c, r, (grp_weight[:, None] * mask).T, ct)
                pg, f_r, f_c = residuals(r, c)
                residual = max(np.abs(f_r).max(), np.abs(f_c).max())
                if residual < FIT_TOL:
                    break
            if residual >= FIT_TOL:
                r, c, residual = _newton_polish(r, c, gt, ct, grp_weight,
                                                mask)
                pg, _, _ = residuals(r, c)
            if residual < FIT_TOL:
                break
            hi_sat = (mask == 1.0) & (pg > 1.0 - 1e-9)
            lo_sat = (mask == 1.0) & (pg < 1e-9) & (pg > 0)
            if not (hi_sat.any() or lo_sat.any()):
                raise FitConvergenceError(residual)
            pinned[hi_sat] = 1.0
            pinned[lo_sat] = EPS
            gt -= hi_sat.sum(axis=1).astype(np.float64)
            ct -= (grp_weight[:, None] * hi_sat).sum(axis=0)
            mask[hi_sat | lo_sat] = 0.0
        if residual >= FIT_TOL:
            raise FitConvergenceError(residual)
        pg = np.where(np.isnan(pinned), pg, pinned)
        p[np.ix_(rows, cols)] = pg[grp_of]

    np.clip(p, EPS, 1.0, out=p)
    return BackgroundModel(probabilities=p, layer=act.layer,
                           residual=float(residual))


def matching_rows(act: ActivationMatrix, components) -> np.ndarray:
    """Boolean row mask: rows whose bits cover every listed component."""
    comps = list(components)
    if not comps:
        return np.ones(act.n_rows, dtype=bool)
    return (act.bits[:, comps] == 1).all(axis=1)


def ic(bg: BackgroundModel, act: ActivationMatrix, components,
       graph_mask: np.ndarray | None = None) -> float:
    """Information content of a rule over a graph subset (base-2 logs).

    Per supporting graph, the best (most surprising) rule-matching node
    contributes the sum of ``-log2 P`` over the rule's components; graphs
    without a matching node contribute nothing.
    """
    comps = sorted(components)
    if not comps:
        return 0.0
    rows = matching_rows(act, comps)
    if not rows.any():
        return 0.0
    scores = np.where(rows, (-np.log2(bg.probabilities[:, comps])).sum(axis=1),
                      -1.0)
    per_graph = np.maximum.reduceat(scores, act.seg_starts[:-1])
    has = np.maximum.reduceat(rows.astype(np.uint8), act.seg_starts[:-1]) > 0
    if graph_mask is not None:
        has = has & graph_mask
    return float(per_graph[has].sum())


def update(bg: BackgroundModel, components, act: ActivationMatrix) -> None:
    """Absorb an extracted rule: matching rows' rule cells become certain."""
    comps = sorted(components)
    if not comps:
        return
    rows = matching_rows(act, comps)
    bg.probabilities[np.ix_(rows, comps)] = 1.0
