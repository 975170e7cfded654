"""Constrained sparse NLP solver over hypergraph problems.

Augmented-Lagrangian outer loop around a box-projected Levenberg-Marquardt
inner loop. All derivatives are edge-local central finite differences taken
through the nonlinear increment operator, and parameter updates apply
per-block increments (plain addition for Euclidean blocks, wrap-around for
angular state components).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum

from typing import Any, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .manifold import _wrap, generic_boxminus, generic_boxplus, interpolate
from .transcription import Edge, EdgeKind, GridMode, HypergraphProblem, TrajectoryGrid

_SUM_EPS = 1e-12  # floor for sum-aggregated objective terms inside sqrt
_DENSE_LIMIT = 450  # tangent dims above this use sparse normal equations


class SolverStatus(Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    TIME_BUDGET = "time_budget"
    INFEASIBLE = "infeasible"


@dataclass
class SolverConfig:
    max_outer: int = 12
    max_inner: int = 40
    feas_tol: float = 1e-6
    opt_tol: float = 1e-6
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    # Cap on the quadratic penalty: the merit Jacobian carries sqrt(rho/2), so
    # rho beyond ~1e8 squares into a normal-matrix conditioning LM cannot
    # survive in double precision; multiplier updates carry feasibility from
    # there.
    penalty_max: float = 1e8
    fd_step: float = 1e-6
    lm_lambda_init: float = 1e-4
    time_budget: float = math.inf
    log_stream: Optional[Any] = None

    def __post_init__(self):
        if self.feas_tol <= 0 or self.opt_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.penalty_growth <= 1:
            raise ValueError("penalty growth factor must exceed 1")


@dataclass
class SolverResult:
    status: SolverStatus
    cost: float
    max_violation: float
    iterations: int
    wall_time: float
    duals: Optional[dict] = None  # edge id -> (lambda, mu) at the final iterate
    rho: float = math.nan


def _fd_h(value: float, h0: float) -> float:
    return h0 * max(1.0, abs(value))


def edge_jacobian(edge: Edge, problem: HypergraphProblem, h0: float = 1e-6):
    """Central-difference Jacobian blocks of the raw edge residual.

    Each probe perturbs one local-tangent coordinate through the nonlinear
    increment operator before evaluation. Returns {vertex_id: (dim x v.dim)}.
    Fixed vertices are skipped.
    """
    vals = [problem.vertices[vid].values for vid in edge.vertex_ids]
    blocks = {}
    for i, vid in enumerate(edge.vertex_ids):
        v = problem.vertices[vid]
        if v.fixed:
            continue
        J = np.empty((edge.dim, v.dim))
        base = vals[i]
        any_angular = bool(v.angular.any())
        for j in range(v.dim):
            h = _fd_h(base[j], h0)
            pert = base.copy()
            pert[j] = _wrap(base[j] + h) if (any_angular and v.angular[j]) else base[j] + h
            vals[i] = pert
            rp = edge.fn(*vals)
            pert = base.copy()
            pert[j] = _wrap(base[j] - h) if (any_angular and v.angular[j]) else base[j] - h
            vals[i] = pert
            rm = edge.fn(*vals)
            J[:, j] = (np.asarray(rp) - np.asarray(rm)) / (2.0 * h)
        vals[i] = base
        if not np.isfinite(J).all():
            raise FloatingPointError(
                f"non-finite residual while differencing edge '{edge.id}'"
            )
        blocks[vid] = J
    return blocks


def _batch_gather(batch, problem):
    return [
        np.array([problem.vertices[vid].values for vid in slot]) for slot in batch.slots
    ]


def _batch_residual_map(batches, problem) -> dict:
    """Raw residual row per covered edge id, evaluated family-at-a-time."""
    rows = {}
    for b in batches:
        R = np.asarray(b.fn(*_batch_gather(b, problem)), dtype=float)
        for m, eid in enumerate(b.edge_ids):
            rows[eid] = R[m]
    return rows


def _batch_jacobians_stacked(batch, problem, h0: float):
    """Per-slot stacked FD Jacobians for every edge of a batch at once.

    Returns a list aligned with batch.slots; each entry is (M, dim, d_s) or
    None when every vertex in the slot is fixed. The probes match
    edge_jacobian: central differences through the increment operator with
    per-coordinate step h0 * max(1, |value|).
    """
    Z = _batch_gather(batch, problem)
    M = len(batch.edge_ids)
    out = []
    for s, slot in enumerate(batch.slots):
        verts = [problem.vertices[vid] for vid in slot]
        if all(v.fixed for v in verts):
            out.append(None)
            continue
        base = Z[s]
        d_s = base.shape[1]
        ang = verts[0].angular
        Jslot = np.empty((M, batch.dim, d_s))
        for j in range(d_s):
            col = base[:, j]
            h = h0 * np.maximum(1.0, np.abs(col))
            pert = base.copy()
            pert[:, j] = _wrap(col + h) if ang[j] else col + h
            Z[s] = pert
            rp = np.asarray(batch.fn(*Z), dtype=float)
            pert = base.copy()
            pert[:, j] = _wrap(col - h) if ang[j] else col - h
            Z[s] = pert
            rm = np.asarray(batch.fn(*Z), dtype=float)
            Jslot[:, :, j] = (rp - rm) / (2.0 * h)[:, None]
        Z[s] = base
        if not np.isfinite(Jslot).all():
            raise FloatingPointError(
                f"non-finite residual while differencing '{batch.family}' batch"
            )
        out.append(Jslot)
    return out


def _batch_jacobians(batch, problem, h0: float):
    """Edge-local FD Jacobian blocks for every edge of a batch at once.

    Returns a list aligned with batch.edge_ids of {vertex_id: (dim x d_s)}
    blocks; fixed vertices are skipped.
    """
    stacked = _batch_jacobians_stacked(batch, problem, h0)
    M = len(batch.edge_ids)
    blocks = [dict() for _ in range(M)]
    for s, slot in enumerate(batch.slots):
        Jslot = stacked[s]
        if Jslot is None:
            continue
        for m in range(M):
            vid = slot[m]
            if problem.vertices[vid].fixed:
                continue
            d = blocks[m]
            if vid in d:
                d[vid] = d[vid] + Jslot[m]
            else:
                d[vid] = Jslot[m]
    return blocks


def _batch_jacobian_map(batches, problem, h0: float) -> dict:
    out = {}
    for b in batches:
        for eid, blk in zip(b.edge_ids, _batch_jacobians(b, problem, h0)):
            out[eid] = blk
    return out


class _EdgeInfo:
    """Per-edge bookkeeping: merit-row layout and inequality side structure."""

    __slots__ = ("edge", "free_ids", "row", "nrows", "sides")

    def __init__(self, edge: Edge, problem: HypergraphProblem):
        self.edge = edge
        self.free_ids = [
            vid for vid in edge.vertex_ids if not problem.vertices[vid].fixed
        ]
        # sides: list of (row_in_edge, sign, bound) for inequality constraints
        # rewritten as c = sign * (r - bound) >= 0.
        self.sides = []
        if edge.kind == EdgeKind.INEQUALITY:
            for i in range(edge.dim):
                if np.isfinite(edge.lb[i]):
                    self.sides.append((i, 1.0, float(edge.lb[i])))
                if np.isfinite(edge.ub[i]):
                    self.sides.append((i, -1.0, float(edge.ub[i])))
        self.row = 0
        if edge.kind == EdgeKind.INEQUALITY:
            self.nrows = len(self.sides)
        else:
            self.nrows = edge.dim


class _State:
    """Stacked raw residuals plus derived merit pieces at one iterate."""

    __slots__ = ("raw", "Rb", "cost", "eq_viol", "ineq_viol", "merit")


class _FamilyMeta:
    """Stacked merit bookkeeping for one homogeneous edge family batch.

    Multipliers live in the stacked LAM/MU arrays; the solver's per-edge
    lams/mus lists hold row views into them so per-edge access stays valid.
    """

    __slots__ = (
        "batch",
        "idx",
        "kind",
        "aggregation",
        "dim",
        "nr",
        "ROW",
        "LAM",
        "MU",
        "SEL",
        "SIGN",
        "BOUND",
        "slot_entries",
    )

    def __init__(self, batch, idx, infos):
        self.batch = batch
        self.idx = idx
        e0 = infos[idx[0]].edge
        self.kind = e0.kind
        self.aggregation = e0.aggregation
        self.dim = e0.dim
        self.nr = infos[idx[0]].nrows
        M = len(idx)
        self.LAM = self.MU = self.SEL = self.SIGN = self.BOUND = None
        if self.kind == EdgeKind.EQUALITY:
            self.LAM = np.zeros((M, self.dim))
        elif self.kind == EdgeKind.INEQUALITY:
            self.MU = np.zeros((M, self.nr))
            self.SEL = np.empty((M, self.nr), dtype=int)
            self.SIGN = np.empty((M, self.nr))
            self.BOUND = np.empty((M, self.nr))
            for m, i in enumerate(idx):
                for t, (row, sign, bound) in enumerate(infos[i].sides):
                    self.SEL[m, t] = row
                    self.SIGN[m, t] = sign
                    self.BOUND[m, t] = bound
        self.ROW = None
        self.slot_entries = []


def _build_metas(problem, infos, batches):
    """Group batched edges into homogeneous family metas; return uncovered ids.

    A batch whose edges disagree in kind or merit-row count is left to the
    scalar per-edge path.
    """
    id2idx = {info.edge.id: i for i, info in enumerate(infos)}
    metas = []
    covered = set()
    for b in batches:
        idx = [id2idx[eid] for eid in b.edge_ids]
        kinds = {infos[i].edge.kind for i in idx}
        nrows = {infos[i].nrows for i in idx}
        aggs = {infos[i].edge.aggregation for i in idx}
        if len(kinds) != 1 or len(nrows) != 1 or len(aggs) != 1:
            continue
        metas.append(_FamilyMeta(b, idx, infos))
        covered.update(b.edge_ids)
    scalar_idx = [
        i for i, info in enumerate(infos) if info.edge.id not in covered
    ]
    return metas, scalar_idx


def _ineq_c(meta, R):
    """Stacked inequality values c = sign * (r - bound) >= 0, shape (M, nr)."""
    return meta.SIGN * (np.take_along_axis(R, meta.SEL, axis=1) - meta.BOUND)


def _problem_state(infos, problem, lams, mus, rho, metas=(), scalar_idx=None) -> _State:
    st = _State()
    if scalar_idx is None:
        scalar_idx = range(len(infos))
    raw = [None] * len(infos)
    Rb = []
    cost = 0.0
    eq_viol = 0.0
    ineq_viol = 0.0
    merit = 0.0
    for meta in metas:
        R = np.asarray(meta.batch.fn(*_batch_gather(meta.batch, problem)), dtype=float)
        Rb.append(R)
        if meta.kind == EdgeKind.OBJECTIVE:
            if meta.aggregation == "squared":
                c = float(np.sum(R * R))
            else:
                c = float(np.sum(R))
            cost += c
            merit += c
        elif meta.kind == EdgeKind.EQUALITY:
            if R.size:
                eq_viol = max(eq_viol, float(np.max(np.abs(R))))
            S = R + meta.LAM / rho
            merit += 0.5 * rho * float(np.sum(S * S))
        else:
            C = _ineq_c(meta, R)
            if C.size:
                ineq_viol = max(ineq_viol, -float(np.min(C)))
            A = np.maximum(meta.MU / rho - C, 0.0)
            merit += 0.5 * rho * float(np.sum(A * A))
    for i in scalar_idx:
        info = infos[i]
        e = info.edge
        r = np.atleast_1d(np.asarray(e.fn(*problem.edge_values(e)), dtype=float))
        raw[i] = r
        if e.kind == EdgeKind.OBJECTIVE:
            if e.aggregation == "squared":
                c = float(r @ r)
            else:
                c = float(np.sum(r))
            cost += c
            merit += c
        elif e.kind == EdgeKind.EQUALITY:
            eq_viol = max(eq_viol, float(np.max(np.abs(r))) if r.size else 0.0)
            s = r + lams[i] / rho
            merit += 0.5 * rho * float(s @ s)
        else:
            for (j, sign, bound), m in zip(info.sides, mus[i]):
                c = sign * (r[j] - bound)
                if c < -ineq_viol:
                    ineq_viol = -c
                a = m / rho - c
                if a > 0.0:
                    merit += 0.5 * rho * a * a
    st.raw = raw
    st.Rb = Rb
    st.cost = cost
    st.eq_viol = eq_viol
    st.ineq_viol = max(0.0, ineq_viol)
    st.merit = merit
    return st


def solve(
    problem: HypergraphProblem,
    config: SolverConfig,
    dual_init: Optional[dict] = None,
    rho_init: Optional[float] = None,
) -> SolverResult:
    """Solve the hypergraph NLP in place; vertex values hold the final iterate.

    dual_init/rho_init warm-start the augmented-Lagrangian state from a
    previous, structurally similar solve (matched per edge id; mismatched or
    missing entries start at zero).
    """
    t_start = time.perf_counter()
    offsets, n = problem.layout()
    infos = [_EdgeInfo(e, problem) for e in problem.edges]
    batches = tuple(getattr(problem, "batches", ()))
    metas, scalar_idx = _build_metas(problem, infos, batches)
    # Per-edge multiplier rows; batched families view into the stacked arrays.
    lams = [
        np.zeros(e.dim) if e.kind == EdgeKind.EQUALITY else np.zeros(0)
        for e in problem.edges
    ]
    mus = [np.zeros(len(info.sides)) for info in infos]
    for meta in metas:
        for m, i in enumerate(meta.idx):
            if meta.LAM is not None:
                lams[i] = meta.LAM[m]
            if meta.MU is not None:
                mus[i] = meta.MU[m]
    if dual_init:
        for i, info in enumerate(infos):
            prev = dual_init.get(info.edge.id)
            if prev is None:
                continue
            lam0, mu0 = prev
            if lam0.shape == lams[i].shape:
                lams[i][...] = lam0
            if mu0.shape == mus[i].shape:
                mus[i][...] = np.maximum(mu0, 0.0)
    rho = float(rho_init) if rho_init is not None else config.penalty_init
    rho = min(rho, config.penalty_max)
    lm_lambda = config.lm_lambda_init
    iterations = 0
    singular_failures = 0
    log = config.log_stream

    def out_of_time():
        return time.perf_counter() - t_start > config.time_budget

    def snapshot():
        return {vid: problem.vertices[vid].values.copy() for vid in offsets}

    def restore(snap):
        for vid, vals in snap.items():
            problem.vertices[vid].values = vals.copy()

    def apply_step(dz):
        for vid, sl in offsets.items():
            v = problem.vertices[vid]
            newv = generic_boxplus(v.values, dz[sl], v.angular)
            np.clip(newv, v.lb, v.ub, out=newv)
            v.values = newv

    # Static merit-system layout: row offsets, batched slot column indices and
    # the fixed sparse triplet index arrays (only the data vector changes
    # between iterations).
    dense = n <= _DENSE_LIMIT
    row0 = 0
    for info in infos:
        info.row = row0
        row0 += info.nrows
    total_rows = row0
    nnz = 0
    tri_parts_i, tri_parts_j = [], []
    for meta in metas:
        nr = meta.nr
        meta.ROW = np.array(
            [np.arange(infos[i].row, infos[i].row + nr) for i in meta.idx], dtype=int
        )
        meta.slot_entries = []
        for slot in meta.batch.slots:
            free = np.fromiter(
                (not problem.vertices[vid].fixed for vid in slot),
                dtype=bool,
                count=len(slot),
            )
            if not free.any():
                meta.slot_entries.append(None)
                continue
            d_slot = problem.vertices[slot[0]].dim
            colidx = np.array(
                [
                    np.arange(offsets[vid].start, offsets[vid].stop)
                    if vid in offsets
                    else np.zeros(d_slot, dtype=int)  # fixed row, masked by `free`
                    for vid in slot
                ],
                dtype=int,
            )
            d_s = colidx.shape[1]
            nf = int(free.sum())
            size = nf * nr * d_s
            if not dense:
                tri_parts_i.append(
                    np.repeat(meta.ROW[free][:, :, None], d_s, axis=2).ravel()
                )
                tri_parts_j.append(
                    np.repeat(colidx[free][:, None, :], nr, axis=1).ravel()
                )
            meta.slot_entries.append((free, colidx, nnz, size))
            nnz += size
    jac_slots = []  # per scalar edge: [(vid, col slice, data offset, size), ...]
    for i in scalar_idx:
        info = infos[i]
        lst = []
        for vid in info.free_ids:
            sl = offsets[vid]
            nc = sl.stop - sl.start
            if not dense:
                tri_parts_i.append(
                    np.repeat(np.arange(info.row, info.row + info.nrows), nc)
                )
                tri_parts_j.append(np.tile(np.arange(sl.start, sl.stop), info.nrows))
            lst.append((vid, sl, nnz, info.nrows * nc))
            nnz += info.nrows * nc
        jac_slots.append(lst)
    if not dense:
        tri_i = np.concatenate(tri_parts_i) if tri_parts_i else np.zeros(0, dtype=int)
        tri_j = np.concatenate(tri_parts_j) if tri_parts_j else np.zeros(0, dtype=int)

    def merit_rows_and_jac(st):
        """Assemble the merit least-squares residual and Jacobian at the iterate."""
        rvec = np.zeros(total_rows)
        data = None if dense else np.zeros(nnz)
        Jd = np.zeros((total_rows, n)) if dense else None
        w = math.sqrt(0.5 * rho)
        for meta, R in zip(metas, st.Rb):
            sel3 = None
            if meta.kind == EdgeKind.OBJECTIVE:
                if meta.aggregation == "squared":
                    V = R
                    SC = None
                else:
                    V = np.sqrt(np.maximum(R, _SUM_EPS))
                    SC = 0.5 / V
            elif meta.kind == EdgeKind.EQUALITY:
                V = w * (R + meta.LAM / rho)
                SC = np.full_like(R, w)
            else:
                C = _ineq_c(meta, R)
                A = meta.MU / rho - C
                act = A > 0.0
                V = np.where(act, w * A, 0.0)
                SC = np.where(act, -w * meta.SIGN, 0.0)
                sel3 = meta.SEL[:, :, None]
            rvec[meta.ROW] = V
            jac = _batch_jacobians_stacked(meta.batch, problem, config.fd_step)
            for Jslot, ent in zip(jac, meta.slot_entries):
                if ent is None or Jslot is None:
                    continue
                free, colidx, off, size = ent
                Bs = Jslot if sel3 is None else np.take_along_axis(Jslot, sel3, axis=1)
                if SC is not None:
                    Bs = Bs * SC[:, :, None]
                if dense:
                    Jd[meta.ROW[free][:, :, None], colidx[free][:, None, :]] += Bs[free]
                else:
                    data[off : off + size] = Bs[free].ravel()
        for i, lst in zip(scalar_idx, jac_slots):
            info = infos[i]
            e = info.edge
            r = st.raw[i]
            blocks = edge_jacobian(e, problem, config.fd_step) if lst else {}
            r0 = info.row
            nr = info.nrows
            if e.kind == EdgeKind.OBJECTIVE:
                if e.aggregation == "squared":
                    rvec[r0 : r0 + nr] = r
                    scale = np.ones(e.dim)
                else:
                    s = np.maximum(r, _SUM_EPS)
                    rvec[r0 : r0 + nr] = np.sqrt(s)
                    scale = 0.5 / np.sqrt(s)
                sel = None
            elif e.kind == EdgeKind.EQUALITY:
                rvec[r0 : r0 + nr] = w * (r + lams[i] / rho)
                scale = np.full(e.dim, w)
                sel = None
            else:
                vals = np.empty(nr)
                scale = np.empty(nr)
                sel = np.empty(nr, dtype=int)
                for t, ((j, sign, bound), m) in enumerate(zip(info.sides, mus[i])):
                    c = sign * (r[j] - bound)
                    a = m / rho - c
                    sel[t] = j
                    if a > 0.0:
                        vals[t] = w * a
                        scale[t] = -w * sign
                    else:
                        vals[t] = 0.0
                        scale[t] = 0.0
                rvec[r0 : r0 + nr] = vals
            for vid, sl, off, size in lst:
                B = blocks[vid]
                if sel is None:
                    Bs = B * scale[:, None]
                else:
                    Bs = B[sel] * scale[:, None]
                if dense:
                    Jd[r0 : r0 + nr, sl] += Bs
                else:
                    data[off : off + size] = Bs.ravel()
        if dense:
            J = Jd
        else:
            J = sp.coo_matrix((data, (tri_i, tri_j)), shape=(total_rows, n)).tocsr()
        return rvec, J

    # Stacked box bounds for the projected-gradient test.
    box_lb = np.concatenate([problem.vertices[vid].lb for vid in offsets])
    box_ub = np.concatenate([problem.vertices[vid].ub for vid in offsets])

    def projected_grad_norm(g):
        """Infinity norm of the gradient projected on the feasible box directions."""
        vals = np.concatenate([problem.vertices[vid].values for vid in offsets])
        blocked = ((vals <= box_lb + 1e-12) & (g > 0)) | (
            (vals >= box_ub - 1e-12) & (g < 0)
        )
        if blocked.all():
            return 0.0
        return float(np.max(np.abs(g[~blocked])))

    # project initial values into bounds
    apply_step(np.zeros(n))

    status = SolverStatus.MAX_ITER
    st = _problem_state(infos, problem, lams, mus, rho, metas, scalar_idx)
    if not math.isfinite(st.merit):
        return SolverResult(
            SolverStatus.INFEASIBLE,
            st.cost,
            max(st.eq_viol, st.ineq_viol),
            0,
            time.perf_counter() - t_start,
        )

    feas_prev = math.inf
    for outer in range(config.max_outer):
        inner_converged = False
        dz = None
        for _ in range(config.max_inner):
            if out_of_time():
                status = SolverStatus.TIME_BUDGET
                break
            rvec, J = merit_rows_and_jac(st)
            if sp.issparse(J):
                g = 2.0 * np.asarray(J.T @ rvec)
                JtJ = (J.T @ J).tocsc()
                diag = JtJ.diagonal()
            else:
                g = 2.0 * (J.T @ rvec)
                JtJ = J.T @ J
                diag = np.diag(JtJ).copy()
            if projected_grad_norm(g) <= config.opt_tol:
                inner_converged = True
                break
            diag = np.maximum(diag, 1e-10)
            accepted = False
            for _try in range(30):
                if sp.issparse(JtJ):
                    A = JtJ + sp.diags(lm_lambda * diag)
                    try:
                        dz = spla.spsolve(A.tocsc(), -0.5 * g)
                    except Exception:
                        dz = None
                else:
                    A = JtJ + np.diag(lm_lambda * diag)
                    try:
                        dz = np.linalg.solve(A, -0.5 * g)
                    except np.linalg.LinAlgError:
                        dz = None
                if dz is None or not np.all(np.isfinite(dz)):
                    singular_failures += 1
                    lm_lambda = min(lm_lambda * 10.0, 1e12)
                    if singular_failures > 5:
                        return SolverResult(
                            SolverStatus.INFEASIBLE,
                            st.cost,
                            max(st.eq_viol, st.ineq_viol),
                            iterations,
                            time.perf_counter() - t_start,
                        )
                    continue
                snap = snapshot()
                apply_step(dz)
                st_trial = _problem_state(infos, problem, lams, mus, rho, metas, scalar_idx)
                if math.isfinite(st_trial.merit) and st_trial.merit < st.merit:
                    st = st_trial
                    lm_lambda = max(lm_lambda / 3.0, 1e-12)
                    accepted = True
                    break
                restore(snap)
                lm_lambda = min(lm_lambda * 3.0, 1e12)
            iterations += 1
            if log is not None:
                step_norm = float(np.linalg.norm(dz)) if accepted and dz is not None else 0.0
                log.write(
                    f"{iterations}\t{st.cost:.6e}\t{max(st.eq_viol, st.ineq_viol):.3e}"
                    f"\t{step_norm:.3e}\t{st.merit:.6e}\t{lm_lambda:.2e}\t{int(accepted)}\n"
                )
            if not accepted:
                inner_converged = True  # cannot decrease further at this penalty
                break
        if status == SolverStatus.TIME_BUDGET:
            break
        feas = max(st.eq_viol, st.ineq_viol)
        if feas <= config.feas_tol and inner_converged:
            status = SolverStatus.CONVERGED
            break
        # first-order multiplier updates
        for meta, R in zip(metas, st.Rb):
            if meta.kind == EdgeKind.EQUALITY:
                meta.LAM += rho * R
            elif meta.kind == EdgeKind.INEQUALITY:
                np.maximum(0.0, meta.MU - rho * _ineq_c(meta, R), out=meta.MU)
        for i in scalar_idx:
            info = infos[i]
            e = info.edge
            r = st.raw[i]
            if e.kind == EdgeKind.EQUALITY:
                lams[i] += rho * r
            elif e.kind == EdgeKind.INEQUALITY:
                mu = mus[i]
                for t, (j, sign, bound) in enumerate(info.sides):
                    c = sign * (r[j] - bound)
                    mu[t] = max(0.0, mu[t] - rho * c)
        # grow the penalty only when feasibility stalls
        if feas > 0.25 * feas_prev:
            rho = min(rho * config.penalty_growth, config.penalty_max)
        feas_prev = feas
        st = _problem_state(infos, problem, lams, mus, rho, metas, scalar_idx)

    wall = time.perf_counter() - t_start
    duals = {
        info.edge.id: (lam.copy(), mu.copy())
        for info, lam, mu in zip(infos, lams, mus)
    }
    return SolverResult(
        status, st.cost, max(st.eq_viol, st.ineq_viol), iterations, wall, duals, rho
    )


def _total_rows(infos) -> int:
    return sum(info.nrows for info in infos)


class ShiftPolicy(Enum):
    RECEDING_SHIFT = "receding"
    SHRINKING_REPIN = "shrinking"


def _sample_grid(grid: TrajectoryGrid, t: float, angular) -> np.ndarray:
    """State of the grid trajectory at time t (piecewise manifold-linear)."""
    if t <= 0.0:
        return grid.states[0].copy()
    tau = 0.0
    for k in range(grid.N):
        if t <= tau + grid.dts[k]:
            alpha = (t - tau) / grid.dts[k]
            return interpolate(grid.states[k], grid.states[k + 1], alpha, angular)
        tau += grid.dts[k]
    return grid.states[-1].copy()


def _sample_control(grid: TrajectoryGrid, t: float) -> np.ndarray:
    """Piecewise-constant control of the grid trajectory at time t."""
    tau = 0.0
    for k in range(grid.N):
        if t < tau + grid.dts[k]:
            return grid.controls[k].copy()
        tau += grid.dts[k]
    return grid.controls[-1].copy()


def warm_start(
    grid: TrajectoryGrid, measured_x, policy: ShiftPolicy, angular, consumed: float = 0.0
) -> TrajectoryGrid:
    """Warm-start grid advanced by the executed time `consumed`.

    Receding: the horizon keeps its length and interval sizes; the trajectory
    is re-timed forward by `consumed`, holding the terminal state at the tail.
    Shrinking: the total time additionally shrinks by `consumed` and the
    intervals are rescaled uniformly.
    """
    out = grid.copy()
    measured_x = np.asarray(measured_x, dtype=float)
    if measured_x.shape != (grid.states.shape[1],):
        raise ValueError("measured state incompatible with grid")
    if consumed > 0.0:
        N = grid.N
        if policy == ShiftPolicy.SHRINKING_REPIN:
            tf_new = max(grid.total_time - consumed, N * 1e-3)
            out.dts[:] = tf_new / N
        times = np.concatenate([[0.0], np.cumsum(out.dts)])
        for k in range(N + 1):
            out.states[k] = _sample_grid(grid, consumed + times[k], angular)
        for k in range(N):
            out.controls[k] = _sample_control(grid, consumed + 0.5 * (times[k] + times[k + 1]))
    out.states[0] = measured_x
    return out


def resample_grid(grid: TrajectoryGrid, new_N: int, angular) -> TrajectoryGrid:
    """Uniformly resample a grid to a new interval count, preserving total time."""
    if new_N < 1:
        raise ValueError("new_N must be >= 1")
    old_N = grid.N
    p = grid.states.shape[1]
    states = np.empty((new_N + 1, p))
    controls = np.empty((new_N, grid.controls.shape[1]))
    for k in range(new_N + 1):
        s = k * old_N / new_N
        i = min(int(s), old_N - 1)
        alpha = s - i
        states[k] = interpolate(grid.states[i], grid.states[i + 1], alpha, angular)
    for k in range(new_N):
        s = (k + 0.5) * old_N / new_N
        controls[k] = grid.controls[min(int(s), old_N - 1)]
    dts = np.full(new_N, grid.total_time / new_N)
    return TrajectoryGrid(states, controls, dts, grid.mode, grid.fixed_dt)
