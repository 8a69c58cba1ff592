"""End-to-end finite-section experiments for positive perturbations.

* :func:`formsum_vs_friedrichs` compares the two ways of adding a
  non-negative potential ``V2`` to ``L_{V1}``.
* :func:`positive_core_approximation` traces the approximation of a
  non-negative ``u`` by ``u_r^k = (L_{V1^(k)}/r + 1)^{-1} u``.
* :func:`stability_pipeline` runs the truncation ``T_k = L_{V1} + min(V2, k)``
  and the domain-approximating sequence ``w_r``.
* :func:`deficiency_probe_birth_death` integrates ``(L_V + alpha) u = 0`` on a
  birth-death chain and reports the growth of ``sum mu |u|^2``.

Every pipeline accepts an arbitrary semi-bounded ``V1``: sections are
shifted by ``c = min(0, lambda0)`` so the shifted ``L_{V1}`` is
non-negative, and ``c`` is recorded in the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import nnls

from .errors import NegativePerturbation, NonPositiveWeight, NotNonnegative, SelectionFailure, ZeroWeight
from .graph import Exhaustion, Potential, WeightedGraph, _as_sequence
from .reports import to_csv
from .schrodinger import FiniteSection, dirichlet_section, truncate_negative_part
from .solvers import (
    ConvergenceReport,
    ConvergenceRow,
    ShiftedOperator,
    domination_check,
    lambda0,
    operator_function,
    src_monitor,
    DENSE_MAX,
)

__all__ = [
    "CoincidenceResult",
    "CoreApproxTrace",
    "RelativeBound",
    "StabilityResult",
    "DeficiencyReport",
    "formsum_vs_friedrichs",
    "coincidence_over_exhaustion",
    "positive_core_approximation",
    "stability_pipeline",
    "deficiency_probe_birth_death",
]


def _unit_vectors(n: int, count: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    return [v / np.linalg.norm(v) for v in rng.standard_normal((count, n))]


@dataclass
class CoincidenceResult:
    max_matrix_discrepancy: float
    scale: float
    alpha: float
    section_id: str
    section_size: int
    lambda0: float
    resolvent_drift: float

    @property
    def relative_discrepancy(self) -> float:
        return self.max_matrix_discrepancy / self.scale


def formsum_vs_friedrichs(
    g: WeightedGraph,
    V1: Potential,
    V2: Potential,
    S,
    alpha: float | None = None,
    n_test: int = 4,
    seed: int = 42,
) -> CoincidenceResult:
    """Compare the form-sum and Friedrichs assembly routes on one section.

    Route A adds ``diag(V2)`` to the section of ``L_{V1}``; route B assembles
    the section of ``L_{V1+V2}`` directly.  The default shift is
    ``alpha = 1 + max(0, -lambda0(section(V1)))``.
    """
    sec1 = dirichlet_section(g, V1, S)
    v2 = V2.values(sec1.vertices)
    if np.any(v2 < 0):
        raise NegativePerturbation(f"{V2.name} is negative on the section")
    path_a = sec1.with_added_potential(v2)
    path_b = dirichlet_section(g, V1 + V2, S)
    diff = abs(path_a.B - path_b.B)
    discrepancy = float(diff.max()) if diff.nnz else 0.0
    scale = 1.0 + float(np.max(np.abs(path_b.diag)))
    lam = lambda0(sec1)
    if alpha is None:
        alpha = 1.0 + max(0.0, -lam)
    op_a = ShiftedOperator(path_a, alpha, lam0=lam)
    op_b = ShiftedOperator(path_b, alpha, lam0=lam)
    drift = 0.0
    for v in _unit_vectors(sec1.n, n_test, seed):
        drift = max(drift, path_b.norm(op_a(v) - op_b(v)))
    return CoincidenceResult(discrepancy, scale, float(alpha), path_b.name, sec1.n, lam, drift)


def coincidence_over_exhaustion(
    g: WeightedGraph, V1: Potential, V2: Potential, exhaustion, alpha: float | None = None, seed: int = 42
) -> list:
    """:func:`formsum_vs_friedrichs` on every level of an exhaustion."""
    subsets = exhaustion.subsets if isinstance(exhaustion, Exhaustion) else exhaustion
    return [formsum_vs_friedrichs(g, V1, V2, S, alpha=alpha, seed=seed) for S in subsets]


def _shift_for(section: FiniteSection) -> tuple[float, float]:
    lam = lambda0(section)
    return lam, min(0.0, lam)


@dataclass
class CoreApproxTrace:
    rows: list  # (k, r, nonneg_margin, form_error, l2_error, bound, bound_margin)
    r_rows: list  # (r, form_error_to_u, commutation_gap)
    selected: list  # (r, k, form_error_to_u)
    shift: float
    beta: float

    HEADER = ["k", "r", "nonneg_margin", "form_error", "l2_error", "bound", "bound_margin"]

    @property
    def min_nonneg_margin(self) -> float:
        return min(row[2] for row in self.rows)

    @property
    def min_bound_margin(self) -> float:
        return min(row[6] for row in self.rows)

    def k_errors(self, r) -> np.ndarray:
        return np.array([row[3] for row in self.rows if row[1] == r])

    def r_errors(self) -> np.ndarray:
        return np.array([row[1] for row in self.r_rows])

    def to_csv(self) -> str:
        return to_csv(self.HEADER, self.rows)


def positive_core_approximation(
    g: WeightedGraph,
    V1: Potential,
    u,
    S,
    k_seq,
    r_seq,
    beta: float = 1.0,
) -> CoreApproxTrace:
    """Approximate a non-negative ``u`` through truncated resolvents.

    For the shifted section ``L`` of ``L_{V1}`` and ``L_k`` of
    ``L_{V1^(k)}`` this computes ``u_r = r (L + r)^{-1} u`` and
    ``u_r^k = r (L_k + r)^{-1} u`` and records, in the form norm
    ``N(w)^2 = (L w, w) + beta ||w||^2``:

    * the minimum entry of every ``u_r^k``;
    * ``N(u_r - u)`` per ``r`` together with the gap to
      ``||((L/r + 1)^{-1} - 1)(L + 1)^{1/2} u||`` (dense sections only);
    * ``N(u_r^k - u_r)`` per ``(k, r)`` and the bound
      ``((L + r)(a - b), a - b) <= ((L + r)^{-1} u, u) - ((L_k + r)^{-1} u, u)``
      with ``a = (L_k + r)^{-1} u`` and ``b = (L + r)^{-1} u``; the gap
      equals ``((L_k - L) a, a) >= 0``, and for ``r >= beta`` the left side
      dominates ``N(a - b)^2``;
    * a diagonal sequence ``u_r^{k(r)}`` with ``k(r)`` the smallest ``k``
      giving ``N(u_r^k - u_r) <= 1/r``.
    """
    sec = dirichlet_section(g, V1, S)
    u = np.asarray(u, dtype=float)
    if u.shape != (sec.n,):
        raise ValueError(f"u must have length {sec.n}")
    if np.any(u < 0):
        raise NotNonnegative("u must be entrywise non-negative")
    k_seq = sorted(k_seq)
    r_seq = sorted(r_seq)
    lam, c = _shift_for(sec)
    L = sec.shifted(-c)
    lam_L = lam - c
    truncated = {k: dirichlet_section(g, truncate_negative_part(V1, k), S).shifted(-c) for k in k_seq}

    def N(w):
        return math.sqrt(max(L.quadratic(w) + beta * L.norm(w) ** 2, 0.0))

    sqrt_op = operator_function(L, lambda w: np.sqrt(np.maximum(w, 0.0) + 1.0)) if sec.n <= DENSE_MAX and beta == 1.0 else None
    rows, r_rows, selected = [], [], []
    for r in r_seq:
        b = ShiftedOperator(L, r, lam0=lam_L)(u)
        u_r = r * b
        gap = math.nan
        if sqrt_op is not None:
            root_u = sqrt_op @ u
            spectral = ShiftedOperator(L, r, lam0=lam_L)(r * root_u) - root_u
            gap = abs(N(u_r - u) - L.norm(spectral))
        r_rows.append((r, N(u_r - u), gap))
        bu = L.inner(b, u).real
        chosen = None
        for k in k_seq:
            Lk = truncated[k]
            a = ShiftedOperator(Lk, r, lam0=lam_L)(u)
            u_rk = r * a
            bound = bu - Lk.inner(a, u).real
            lhs = L.quadratic(a - b) + r * L.norm(a - b) ** 2
            err = N(u_rk - u_r)
            rows.append((k, r, float(u_rk.min()), err, L.norm(u_rk - u_r), bound, bound - lhs))
            if chosen is None and err <= 1.0 / r:
                chosen = (k, u_rk)
        if chosen is None:
            chosen = (k_seq[-1], u_rk)
        selected.append((r, chosen[0], N(chosen[1] - u)))
    return CoreApproxTrace(rows, r_rows, selected, c, beta)


@dataclass
class RelativeBound:
    a1: float
    a2: float
    a2_envelope: float
    n_samples: int


@dataclass
class StabilityResult:
    shift: float
    u: np.ndarray = field(repr=False)
    relative_bound: RelativeBound
    identity_discrepancy: float
    grid: list  # (r, k, err_resolvent, err_image, majorant_margin)
    r_rows: list  # (r, err_to_u, err_image_to_Lu, commutation_gap)
    selection: list  # (r, k(r), ||w_r - u||, ||L w_r - L u||, triangle_slack)
    w: dict = field(repr=False)
    reports: dict = field(default_factory=dict)

    GRID_HEADER = ["r", "k", "resolvent_error", "image_error", "majorant_margin"]
    SELECTION_HEADER = ["r", "k", "w_error", "image_error", "triangle_slack"]

    @property
    def min_majorant_margin(self) -> float:
        return min(row[4] for row in self.grid)


def stability_pipeline(
    g: WeightedGraph,
    V1: Potential,
    V2: Potential,
    S,
    k_seq,
    r_seq,
    u=None,
    alpha: float = 1.0,
    n_samples: int = 64,
    seed: int = 42,
) -> StabilityResult:
    """Truncation pipeline for ``L_V = L_{V1} + V2`` on a section.

    1. Samples ``||V2 u|| <= a1 ||L_{V1} u|| + a2 ||u||`` on random vectors
       supported in the section interior and fits ``(a1, a2) >= 0`` by
       non-negative least squares; ``a2_envelope`` is the smallest ``a2``
       making the fitted bound hold on every sample.
    2. Measures ``max |B(V) - B(V1) - diag(V2)|``.
    3. For each ``(r, k)`` compares ``u_r^k = r (T_k + r)^{-1} u`` with
       ``y_r = r (L_V + r)^{-1} u`` and ``L_V u_r^k`` with ``L_V y_r``, and
       logs the domination margin ``(L_{V1}/r + 1)^{-1}|u| - |u_r^k|``.
    4. For each ``r`` records ``||y_r - u||``, ``||L_V y_r - L_V u||`` and the
       commutation gap ``||L_V y_r - r (L_V + r)^{-1} L_V u||``.
    5. Selects ``k(r)``, the smallest ``k`` with both errors of step 3 at
       most ``1/r``, and sets ``w_r = u_r^{k(r)}``.

    ``reports["truncation"]`` monitors ``(T_k + alpha)^{-1} u`` against
    ``(L_V + alpha)^{-1} u`` and ``reports["selection"]`` tabulates
    ``||w_r - u||`` (l2 column) and ``||L_V w_r - L_V u||`` (form column).
    ``u`` defaults to the unit vector at the first section vertex.
    """
    sec1_raw = dirichlet_section(g, V1, S)
    n = sec1_raw.n
    v2 = V2.values(sec1_raw.vertices)
    if np.any(v2 < 0):
        raise NegativePerturbation(f"{V2.name} is negative on the section")
    k_seq = sorted(k_seq)
    r_seq = sorted(r_seq)
    lam, c = _shift_for(sec1_raw)
    L1 = sec1_raw.shifted(-c)
    lam1 = lam - c
    LV_raw = dirichlet_section(g, V1 + V2, S)
    LV = LV_raw.shifted(-c)
    if u is None:
        u = np.zeros(n)
        u[0] = 1.0 / math.sqrt(sec1_raw.mu[0])
    u = np.asarray(u, dtype=float)

    # 1. relative bound on interior-supported samples
    rng = np.random.default_rng(seed)
    inner = np.flatnonzero(sec1_raw.interior)
    feats, target = [], []
    for _ in range(n_samples if inner.size else 0):
        z = np.zeros(n)
        z[inner] = rng.standard_normal(inner.size) * (rng.random(inner.size) < 0.5)
        if not np.any(z):
            continue
        feats.append((sec1_raw.norm(sec1_raw.apply(z)), sec1_raw.norm(z)))
        target.append(sec1_raw.norm(v2 * z))
    if feats:
        F = np.array(feats)
        y = np.array(target)
        (a1, a2), _ = nnls(F, y)
        a2_env = max(0.0, float(np.max((y - a1 * F[:, 0]) / F[:, 1])))
    else:
        a1 = a2 = a2_env = math.nan
    rel = RelativeBound(float(a1), float(a2), a2_env, len(feats))

    # 2. operator identity L_V = L_{V1} + V2 on the section
    diff = abs(LV_raw.B - sec1_raw.with_added_potential(v2).B)
    identity = float(diff.max()) if diff.nnz else 0.0

    # 3.-5.
    Lu = LV.apply(u)
    T = {k: L1.with_added_potential(np.minimum(v2, k)) for k in k_seq}
    grid, r_rows, selection, w = [], [], [], {}
    for r in r_seq:
        LV_op = ShiftedOperator(LV, r, lam0=lam1)
        y_r = r * LV_op(u)
        Ly_r = LV.apply(y_r)
        comm = LV.norm(Ly_r - r * LV_op(Lu))
        r_rows.append((r, LV.norm(y_r - u), LV.norm(Ly_r - Lu), comm))
        chosen = None
        for k in k_seq:
            u_rk = r * ShiftedOperator(T[k], r, lam0=lam1)(u)
            e1 = LV.norm(u_rk - y_r)
            e2 = LV.norm(LV.apply(u_rk) - Ly_r)
            dom = domination_check(L1, T[k], r, u, lam0_low=lam1)
            grid.append((r, k, e1, e2, dom.worst_margin))
            if chosen is None and e1 <= 1.0 / r and e2 <= 1.0 / r:
                chosen = (k, u_rk)
        if chosen is None:
            raise SelectionFailure(f"no k in the grid meets the 1/r rule at r={r}")
        k_r, w_r = chosen
        w[r] = w_r
        err_w = LV.norm(w_r - u)
        slack = r_rows[-1][1] + 1.0 / r - err_w
        selection.append((r, k_r, err_w, LV.norm(LV.apply(w_r) - Lu), slack))

    truncation = src_monitor([T[k] for k in k_seq], LV, alpha, [u], labels=k_seq, seed=seed)
    sel_rows = [ConvergenceRow(r, float(alpha), 0, e, le, n) for r, _, e, le, _ in selection]
    sel_report = ConvergenceReport(
        sel_rows,
        all(np.diff([row[2] for row in selection]) <= 1e-12) if len(selection) > 1 else True,
        bool(selection and selection[-1][2] <= 1e-8),
        1e-8,
        "r",
    )
    return StabilityResult(
        shift=c,
        u=u,
        relative_bound=rel,
        identity_discrepancy=identity,
        grid=grid,
        r_rows=r_rows,
        selection=selection,
        w=w,
        reports={"truncation": truncation, "selection": sel_report},
    )


@dataclass
class DeficiencyReport:
    N: int
    alpha: float
    log_abs_u: np.ndarray = field(repr=False)
    sign_u: np.ndarray = field(repr=False)
    log_partial_sums: np.ndarray = field(repr=False)
    growth_ratio: float
    classification: str
    exact_values: list | None = field(default=None, repr=False)

    HEADER = ["n", "log_abs_u", "sign_u", "log_partial_sum"]

    def u(self) -> np.ndarray:
        """``u(n)`` as floats (overflows to inf for fast growth)."""
        with np.errstate(over="ignore"):
            return self.sign_u * np.exp(self.log_abs_u)

    def partial_sums(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_partial_sums)

    def to_csv(self) -> str:
        return to_csv(
            self.HEADER,
            zip(range(self.N + 1), self.log_abs_u, self.sign_u, self.log_partial_sums),
        )


RESCALE_AT = 1e100


def _classify(log_P: np.ndarray, N: int) -> str:
    levels = [N // 8, N // 4, N // 2, N]
    if levels[0] >= 1:
        ratios = [log_P[levels[i + 1]] - log_P[levels[i]] for i in range(3)]
        if all(rt >= math.log(1.5) for rt in ratios):
            return "divergent"
    if N >= 2:
        P_N = math.exp(min(log_P[N], 700.0))
        P_half = math.exp(min(log_P[N // 2], 700.0))
        if abs(P_N - P_half) < 1e-10 * max(1.0, P_N):
            return "convergent"
    return "inconclusive"


def deficiency_probe_birth_death(b_seq, mu_seq, V, alpha: float, N: int, exact: bool = False) -> DeficiencyReport:
    """Solve ``L_V u = -alpha u`` on a birth-death chain by recursion.

    Starting from ``u(0) = 1`` the boundary relation at ``0`` gives ``u(1)``
    and the interior relation at ``n`` gives ``u(n+1)``:

        u(n+1) = u(n) + (b(n-1) (u(n) - u(n-1)) + mu(n) (V(n) + alpha) u(n)) / b(n)

    The float path rescales the running pair to avoid overflow and keeps
    logarithms.  With ``exact=True`` the recursion also runs in rational
    arithmetic (integers stay integers).

    ``classification`` is ``"divergent"`` when ``P_{2M} / P_M >= 1.5`` over
    the last three doublings up to ``N``, ``"convergent"`` when
    ``|P_N - P_{N/2}| < 1e-10 max(1, P_N)``, else ``"inconclusive"``, where
    ``P_M = sum_{n <= M} mu(n) |u(n)|^2``.  This is numerical evidence only.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    b_fn = _as_sequence(b_seq, "b_seq")
    mu_fn = _as_sequence(mu_seq, "mu_seq")
    V_fn = V if callable(V) else _as_sequence(V, "V")

    def b(n):
        v = b_fn(n)
        if v == 0:
            raise ZeroWeight(f"b({n}, {n + 1}) = 0 disconnects the chain")
        if v < 0:
            raise NonPositiveWeight(f"b({n}, {n + 1}) = {v} < 0")
        return v

    def mu(n):
        v = mu_fn(n)
        if not v > 0:
            raise NonPositiveWeight(f"mu({n}) = {v} is not positive")
        return v

    log_abs = np.empty(N + 1)
    sign = np.empty(N + 1)
    log_P = np.empty(N + 1)
    prev, cur, log_scale = 0.0, 1.0, 0.0
    for n in range(N + 1):
        log_abs[n] = (math.log(abs(cur)) if cur != 0 else -math.inf) + log_scale
        sign[n] = math.copysign(1.0, cur) if cur != 0 else 0.0
        term = math.log(mu(n)) + 2 * log_abs[n]
        log_P[n] = term if n == 0 else np.logaddexp(log_P[n - 1], term)
        if n == N:
            break
        back = b(n - 1) * (cur - prev) if n > 0 else 0.0
        nxt = cur + (back + mu(n) * (float(V_fn(n)) + alpha) * cur) / b(n)
        prev, cur = cur, nxt
        big = max(abs(prev), abs(cur))
        if big > RESCALE_AT:
            prev, cur = prev / big, cur / big
            log_scale += math.log(big)

    exact_values = None
    if exact:
        q = [Fraction(1)]
        a = Fraction(alpha)
        for n in range(N):
            back = Fraction(b(n - 1)) * (q[n] - q[n - 1]) if n > 0 else 0
            q.append(q[n] + (back + Fraction(mu(n)) * (Fraction(V_fn(n)) + a) * q[n]) / Fraction(b(n)))
        exact_values = [int(v) if v.denominator == 1 else v for v in q]

    growth = float(log_P[N] / math.log(N))
    return DeficiencyReport(N, float(alpha), log_abs, sign, log_P, growth, _classify(log_P, N), exact_values)
