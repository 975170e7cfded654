"""Direct transcription of the OCP into a sparse hypergraph NLP.

Decision variables are states x_0..x_N (x_0 pinned), controls u_0..u_{N-1} and
time intervals dt_0..dt_{N-1} (a single shared dt in global-uniform mode; none
in fixed-dt quadratic-form mode). Cost terms and constraints become hyperedges
over small vertex subsets, which keeps derivatives edge-local.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .geometry import (
    MovingStadiumObstacle,
    axis_rows,
    dist_segment_segment_rows,
    signed_clearance,
)
from .manifold import _wrap, generic_boxminus, interpolate


class CollocationKernel(Enum):
    FORWARD_DIFF = "fwd"
    CRANK_NICOLSON = "cn"


class GridMode(Enum):
    LOCAL_UNIFORM = "local"
    GLOBAL_UNIFORM = "global"


class EdgeKind(Enum):
    OBJECTIVE = "objective"
    EQUALITY = "equality"
    INEQUALITY = "inequality"


@dataclass
class Vertex:
    """Variable block: values plus manifold tags, fix flag and box bounds."""

    id: str
    values: np.ndarray
    angular: np.ndarray
    fixed: bool = False
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.atleast_1d(np.asarray(self.values, dtype=float))
        self.angular = np.atleast_1d(np.asarray(self.angular, dtype=bool))
        n = self.values.size
        if self.lb is None:
            self.lb = np.full(n, -np.inf)
        if self.ub is None:
            self.ub = np.full(n, np.inf)
        self.lb = np.atleast_1d(np.asarray(self.lb, dtype=float))
        self.ub = np.atleast_1d(np.asarray(self.ub, dtype=float))

    @property
    def dim(self) -> int:
        return self.values.size

    @property
    def has_bounds(self) -> bool:
        return bool(np.any(np.isfinite(self.lb)) or np.any(np.isfinite(self.ub)))


@dataclass
class Edge:
    """Cost or constraint term over a subset of vertices.

    fn maps the connected vertices' value arrays to a residual vector.
    Objective edges aggregate either as sum of residual entries ('sum') or as
    the squared norm ('squared'). Inequality edges demand lb <= fn(...) <= ub.
    """

    id: str
    kind: EdgeKind
    vertex_ids: list
    fn: Callable[..., np.ndarray]
    dim: int
    family: str
    aggregation: str = "sum"
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("edge residual dimension must be positive")
        if self.kind == EdgeKind.INEQUALITY:
            if self.lb is None:
                self.lb = np.full(self.dim, -np.inf)
            if self.ub is None:
                self.ub = np.full(self.dim, np.inf)
            self.lb = np.atleast_1d(np.asarray(self.lb, dtype=float))
            self.ub = np.atleast_1d(np.asarray(self.ub, dtype=float))


@dataclass
class FamilyBatch:
    """Vectorized evaluator for a structurally identical family of edges.

    fn maps stacked slot arrays (one (M, d_s) array per slot, rows aligned with
    edge_ids) to the stacked residuals (M, dim). Each covered edge's scalar fn
    must agree row-wise with this evaluator; the solver uses batches purely as
    a fast path.
    """

    family: str
    edge_ids: list
    slots: list  # slots[s][m]: vertex id filling slot s of edge m
    fn: Callable[..., np.ndarray]
    dim: int


class HypergraphProblem:
    """Sparse NLP: variable-block vertices connected by cost/constraint hyperedges."""

    def __init__(self):
        self.vertices: dict[str, Vertex] = {}
        self.edges: list[Edge] = []
        self.batches: list[FamilyBatch] = []

    def add_vertex(self, v: Vertex) -> Vertex:
        if v.id in self.vertices:
            raise ValueError(f"duplicate vertex id '{v.id}'")
        self.vertices[v.id] = v
        return v

    def add_edge(self, e: Edge) -> Edge:
        for vid in e.vertex_ids:
            if vid not in self.vertices:
                raise ValueError(f"edge '{e.id}' references unknown vertex '{vid}'")
        self.edges.append(e)
        return e

    def free_vertices(self) -> list[Vertex]:
        return [v for v in self.vertices.values() if not v.fixed]

    def layout(self) -> tuple[dict[str, slice], int]:
        """Offsets of each free vertex in the stacked tangent space."""
        offsets = {}
        n = 0
        for v in self.free_vertices():
            offsets[v.id] = slice(n, n + v.dim)
            n += v.dim
        return offsets, n

    def edge_values(self, edge: Edge) -> tuple:
        return tuple(self.vertices[vid].values for vid in edge.vertex_ids)

    def eval_edge(self, edge: Edge) -> np.ndarray:
        return np.atleast_1d(np.asarray(edge.fn(*self.edge_values(edge)), dtype=float))

    def families(self) -> set:
        fams = {e.family for e in self.edges}
        if any(v.has_bounds for v in self.free_vertices()):
            fams.add("bound")
        return fams

    def edges_of(self, family: str) -> list[Edge]:
        return [e for e in self.edges if e.family == family]

    def objective_value(self) -> float:
        total = 0.0
        for e in self.edges:
            if e.kind != EdgeKind.OBJECTIVE:
                continue
            r = self.eval_edge(e)
            total += float(np.sum(r * r)) if e.aggregation == "squared" else float(np.sum(r))
        return total


@dataclass
class BoundaryData:
    """Previous control/interval and the fixed final control of the horizon."""

    u_prev: np.ndarray
    dt_prev: float
    u_final: np.ndarray

    def __post_init__(self):
        self.u_prev = np.asarray(self.u_prev, dtype=float)
        self.u_final = np.asarray(self.u_final, dtype=float)
        if self.dt_prev <= 0:
            raise ValueError("dt_prev must be positive")


@dataclass
class TrajectoryGrid:
    """Discrete states, piecewise-constant controls and time intervals."""

    states: np.ndarray  # (N+1, p)
    controls: np.ndarray  # (N, q)
    dts: np.ndarray  # (N,)
    mode: GridMode = GridMode.LOCAL_UNIFORM
    fixed_dt: bool = False

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.controls = np.asarray(self.controls, dtype=float)
        self.dts = np.asarray(self.dts, dtype=float)
        if self.N < 1:
            raise ValueError("grid needs at least one interval")
        if np.any(self.dts <= 0):
            raise ValueError("all time intervals must be positive")

    @property
    def N(self) -> int:
        return self.controls.shape[0]

    @property
    def total_time(self) -> float:
        return float(self.dts.sum())

    def copy(self) -> "TrajectoryGrid":
        return TrajectoryGrid(
            self.states.copy(), self.controls.copy(), self.dts.copy(), self.mode, self.fixed_dt
        )


def time_of_state(k: int, grid: TrajectoryGrid) -> float:
    """t_k = k * dt_k under the uniform grid (dt_{N-1} reused for k = N)."""
    if not 0 <= k <= grid.N:
        raise ValueError("state index out of range")
    if k == 0:
        return 0.0
    return float(k * grid.dts[min(k, grid.N - 1)])


def defect(kernel: CollocationKernel, x_k, x_kp1, u_k, dt_k, model, angular=None):
    """Collocation defect phi = (x_{k+1} boxminus x_k)/dt - xi(...)."""
    if dt_k <= 0:
        raise ValueError("dt must be positive")
    if angular is None:
        angular = model.angular
    d = generic_boxminus(x_kp1, x_k, angular) / dt_k
    if kernel == CollocationKernel.FORWARD_DIFF:
        xi = model.f(x_k, u_k)
    else:
        xi = 0.5 * (model.f(x_k, u_k) + model.f(x_kp1, u_k))
    return d - xi


def initialize_guess(
    x_s,
    x_f,
    N: int,
    dt_init: float,
    angular,
    waypoints=None,
    mode: GridMode = GridMode.LOCAL_UNIFORM,
    fixed_dt: bool = False,
    control_dim: int = 2,
    yaw_channel: int | None = None,
) -> TrajectoryGrid:
    """Straight-line (or waypoint-following) initial grid.

    Angular dims interpolate along the shortest arc; user waypoints are
    resampled uniformly by cumulative xy arc length. The first control
    channel is seeded with the longitudinal velocity implied by consecutive
    guess positions: at zero velocity the heading dynamics of both supported
    models lose control authority, which strands zero-control guesses on a
    saddle. When yaw_channel names a direct yaw-rate control it is seeded
    from the interpolated headings for the same reason: a rotation-dominant
    move with zero yaw rate sits on the bilinear dt * omega saddle of the
    heading defect.
    """
    if N < 1 or dt_init <= 0:
        raise ValueError("require N >= 1 and dt_init > 0")
    x_s = np.asarray(x_s, dtype=float)
    x_f = np.asarray(x_f, dtype=float)
    pts = [x_s] + [np.asarray(w, dtype=float) for w in (waypoints or [])] + [x_f]
    # Cumulative parameter along the waypoint polyline (xy arc length with a
    # floor so coincident points still advance).
    seg = []
    for a, b in zip(pts[:-1], pts[1:]):
        seg.append(max(float(np.hypot(b[0] - a[0], b[1] - a[1])), 1e-9))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    states = np.empty((N + 1, x_s.size))
    for k in range(N + 1):
        s = total * k / N
        i = int(np.searchsorted(cum, s, side="right") - 1)
        i = min(i, len(seg) - 1)
        alpha = (s - cum[i]) / seg[i]
        states[k] = interpolate(pts[i], pts[i + 1], alpha, angular)
    controls = np.zeros((N, control_dim))
    if x_s.size >= 3 and control_dim >= 1:
        for k in range(N):
            dx = states[k + 1][0] - states[k][0]
            dy = states[k + 1][1] - states[k][1]
            th = states[k][2]
            controls[k, 0] = (dx * math.cos(th) + dy * math.sin(th)) / dt_init
    if x_s.size >= 3 and yaw_channel is not None and yaw_channel < control_dim:
        dth = _wrap(np.diff(states[:, 2]))
        controls[:, yaw_channel] = dth / dt_init
    return TrajectoryGrid(
        states=states,
        controls=controls,
        dts=np.full(N, float(dt_init)),
        mode=mode,
        fixed_dt=fixed_dt,
    )


def _psd_sqrt(M) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    w, V = np.linalg.eigh(M)
    if np.any(w < -1e-10):
        raise ValueError("weight matrix must be positive semidefinite")
    return V @ np.diag(np.sqrt(np.clip(w, 0.0, None))) @ V.T


def _is_zero(M) -> bool:
    return not np.any(np.asarray(M))


def assemble_nlp(
    scenario,
    config,
    guess: TrajectoryGrid,
    t0: float = 0.0,
    associations=None,
    euclidean_ablation: bool = False,
) -> HypergraphProblem:
    """Build the hypergraph NLP for one MPC solve.

    `config` is either a quadratic-form config (attributes Q, Q_f, R, dt_s,
    terminal) implying a fixed grid resolution, or a time-optimal config
    (attributes dt_min, dt_max, R_hybrid) implying variable time intervals.
    Obstacle constraints follow `associations` (per-state obstacle index
    lists); pass None for no obstacle edges.
    """
    model = scenario.model
    bounds = scenario.bounds
    boundary = scenario.boundary
    N = guess.N
    p, q = model.state_dim, model.control_dim

    fixed_dt = hasattr(config, "Q")
    if not fixed_dt and not hasattr(config, "dt_min"):
        raise ValueError("unrecognized controller config")
    state_tags = np.zeros(p, dtype=bool) if euclidean_ablation else model.angular
    x_f = np.asarray(config.x_f, dtype=float)

    if guess.states.shape != (N + 1, p) or guess.controls.shape != (N, q):
        raise ValueError("initial guess dimensions inconsistent with scenario model")

    prob = HypergraphProblem()

    # --- vertices ---
    prob.add_vertex(Vertex("x0", guess.states[0], state_tags, fixed=True))
    for k in range(1, N + 1):
        prob.add_vertex(Vertex(f"x{k}", guess.states[k], state_tags))
    for k in range(N):
        prob.add_vertex(
            Vertex(
                f"u{k}",
                guess.controls[k],
                np.zeros(q, dtype=bool),
                lb=bounds.lower,
                ub=bounds.upper,
            )
        )
    if not fixed_dt:
        dt_lb = np.array([config.dt_min])
        dt_ub = np.array([config.dt_max])
        if guess.mode == GridMode.GLOBAL_UNIFORM:
            prob.add_vertex(
                Vertex("dt", np.array([guess.dts[0]]), np.zeros(1, dtype=bool), lb=dt_lb, ub=dt_ub)
            )
        else:
            for k in range(N):
                prob.add_vertex(
                    Vertex(
                        f"dt{k}",
                        np.array([guess.dts[k]]),
                        np.zeros(1, dtype=bool),
                        lb=dt_lb,
                        ub=dt_ub,
                    )
                )

    def dt_id(k: int) -> str:
        return "dt" if guess.mode == GridMode.GLOBAL_UNIFORM else f"dt{k}"

    # --- (a) objective edges ---
    if fixed_dt:
        dt_s = float(config.dt_s)
        sQ = _psd_sqrt(config.Q) * math.sqrt(dt_s)
        sR = _psd_sqrt(config.R) * math.sqrt(dt_s)
        has_q = not _is_zero(config.Q)
        has_r = not _is_zero(config.R)
        if has_q or has_r:
            dim = (p if has_q else 0) + (q if has_r else 0)
            for k in range(N):
                def run_cost(xk, uk, _sQ=sQ, _sR=sR, _hq=has_q, _hr=has_r, _dim=dim):
                    out = np.empty(_dim)
                    if _hq:
                        out[:p] = _sQ @ generic_boxminus(xk, x_f, state_tags)
                    if _hr:
                        out[_dim - q :] = _sR @ uk
                    return out

                prob.add_edge(
                    Edge(
                        f"cost_run{k}",
                        EdgeKind.OBJECTIVE,
                        [f"x{k}", f"u{k}"],
                        run_cost,
                        dim,
                        family="cost",
                        aggregation="squared",
                    )
                )

            def cost_batch(X, U, _sQ=sQ, _sR=sR, _hq=has_q, _hr=has_r, _dim=dim):
                out = np.empty((X.shape[0], _dim))
                if _hq:
                    D = X - x_f[None, :]
                    if state_tags.any():
                        D[:, state_tags] = _wrap(D[:, state_tags])
                    out[:, :p] = D @ _sQ.T
                if _hr:
                    out[:, _dim - q :] = U @ _sR.T
                return out

            prob.batches.append(
                FamilyBatch(
                    "cost",
                    [f"cost_run{k}" for k in range(N)],
                    [[f"x{k}" for k in range(N)], [f"u{k}" for k in range(N)]],
                    cost_batch,
                    dim,
                )
            )
        if not _is_zero(config.Q_f):
            sQf = _psd_sqrt(config.Q_f)

            def term_cost(xN, _s=sQf):
                return _s @ generic_boxminus(xN, x_f, state_tags)

            prob.add_edge(
                Edge(
                    "cost_term",
                    EdgeKind.OBJECTIVE,
                    [f"x{N}"],
                    term_cost,
                    p,
                    family="cost",
                    aggregation="squared",
                )
            )
    else:
        R_h = np.atleast_2d(np.asarray(config.R_hybrid, dtype=float))
        hybrid = not _is_zero(R_h)
        for k in range(N):
            if hybrid:
                def run_cost(uk, dtk, _R=R_h):
                    return np.array([(1.0 + float(uk @ _R @ uk)) * dtk[0]])

                vids = [f"u{k}", dt_id(k)]
            else:
                def run_cost(dtk):
                    return np.array([dtk[0]])

                vids = [dt_id(k)]
            prob.add_edge(
                Edge(
                    f"cost_run{k}",
                    EdgeKind.OBJECTIVE,
                    vids,
                    run_cost,
                    1,
                    family="cost",
                    aggregation="sum",
                )
            )
        if hybrid:
            def cost_batch(U, DT, _R=R_h):
                return (1.0 + np.einsum("mi,ij,mj->m", U, _R, U))[:, None] * DT

            cost_slots = [
                [f"u{k}" for k in range(N)],
                [dt_id(k) for k in range(N)],
            ]
        else:
            def cost_batch(DT):
                return DT.copy()

            cost_slots = [[dt_id(k) for k in range(N)]]
        prob.batches.append(
            FamilyBatch(
                "cost", [f"cost_run{k}" for k in range(N)], cost_slots, cost_batch, 1
            )
        )

    # --- (b) collocation defect edges ---
    kernel = scenario.kernel
    for k in range(N):
        if fixed_dt:
            def defect_fn(xk, xk1, uk, _dt=float(config.dt_s)):
                return defect(kernel, xk, xk1, uk, _dt, model, state_tags)

            vids = [f"x{k}", f"x{k + 1}", f"u{k}"]
        else:
            def defect_fn(xk, xk1, uk, dtk):
                return defect(kernel, xk, xk1, uk, dtk[0], model, state_tags)

            vids = [f"x{k}", f"x{k + 1}", f"u{k}", dt_id(k)]
        prob.add_edge(
            Edge(f"defect{k}", EdgeKind.EQUALITY, vids, defect_fn, p, family="defect")
        )
    fb = model.f_batch
    if fb is not None:
        fwd = kernel == CollocationKernel.FORWARD_DIFF

        def defect_batch(Xk, Xk1, Uk, DT=None, _dt=(float(config.dt_s) if fixed_dt else None)):
            d = Xk1 - Xk
            if state_tags.any():
                d[:, state_tags] = _wrap(d[:, state_tags])
            d /= _dt if DT is None else DT
            xi = fb(Xk, Uk) if fwd else 0.5 * (fb(Xk, Uk) + fb(Xk1, Uk))
            return d - xi

        defect_slots = [
            [f"x{k}" for k in range(N)],
            [f"x{k + 1}" for k in range(N)],
            [f"u{k}" for k in range(N)],
        ]
        if not fixed_dt:
            defect_slots.append([dt_id(k) for k in range(N)])
        prob.batches.append(
            FamilyBatch(
                "defect", [f"defect{k}" for k in range(N)], defect_slots, defect_batch, p
            )
        )

    # --- (d) control-deviation edges, including both boundary edges ---
    du_lb, du_ub = bounds.d_lower, bounds.d_upper
    u_p = boundary.u_prev
    dt_p = boundary.dt_prev
    u_final = boundary.u_final

    def add_dev(eid, vids, fn):
        prob.add_edge(
            Edge(eid, EdgeKind.INEQUALITY, vids, fn, q, family="deviation", lb=du_lb, ub=du_ub)
        )

    add_dev("dev0", ["u0"], lambda u0: (u0 - u_p) / dt_p)
    for k in range(1, N):
        if fixed_dt:
            def dev_fn(ua, ub_, _dt=float(config.dt_s)):
                return (ub_ - ua) / _dt

            add_dev(f"dev{k}", [f"u{k - 1}", f"u{k}"], dev_fn)
        else:
            def dev_fn(ua, ub_, dtk):
                return (ub_ - ua) / dtk[0]

            add_dev(f"dev{k}", [f"u{k - 1}", f"u{k}", dt_id(k - 1)], dev_fn)
    if fixed_dt:
        def dev_last(uN1, _dt=float(config.dt_s)):
            return (u_final - uN1) / _dt

        add_dev(f"dev{N}", [f"u{N - 1}"], dev_last)
    else:
        def dev_last(uN1, dtk):
            return (u_final - uN1) / dtk[0]

        add_dev(f"dev{N}", [f"u{N - 1}", dt_id(N - 1)], dev_last)
    if N >= 2:
        if fixed_dt:
            def dev_batch(Ua, Ub, _dt=float(config.dt_s)):
                return (Ub - Ua) / _dt

            dev_slots = [
                [f"u{k - 1}" for k in range(1, N)],
                [f"u{k}" for k in range(1, N)],
            ]
        else:
            def dev_batch(Ua, Ub, DT):
                return (Ub - Ua) / DT

            dev_slots = [
                [f"u{k - 1}" for k in range(1, N)],
                [f"u{k}" for k in range(1, N)],
                [dt_id(k - 1) for k in range(1, N)],
            ]
        prob.batches.append(
            FamilyBatch(
                "deviation", [f"dev{k}" for k in range(1, N)], dev_slots, dev_batch, q
            )
        )

    # --- (e) grid-uniformity edges (local-uniform, variable dt only) ---
    if not fixed_dt and guess.mode == GridMode.LOCAL_UNIFORM:
        for k in range(N - 1):
            prob.add_edge(
                Edge(
                    f"uniform{k}",
                    EdgeKind.EQUALITY,
                    [dt_id(k), dt_id(k + 1)],
                    lambda a, b: a - b,
                    1,
                    family="uniformity",
                )
            )
        if N >= 2:
            prob.batches.append(
                FamilyBatch(
                    "uniformity",
                    [f"uniform{k}" for k in range(N - 1)],
                    [
                        [dt_id(k) for k in range(N - 1)],
                        [dt_id(k + 1) for k in range(N - 1)],
                    ],
                    lambda A, B: A - B,
                    1,
                )
            )

    # --- (f) terminal condition ---
    pinned = (not fixed_dt) or getattr(config, "terminal", "free") == "pinned"
    if pinned:
        def term_fn(xN):
            return generic_boxminus(xN, x_f, state_tags)

        prob.add_edge(
            Edge("terminal", EdgeKind.EQUALITY, [f"x{N}"], term_fn, p, family="terminal")
        )

    # --- (g) obstacle-separation edges ---
    if associations is not None:
        fp = scenario.footprint
        d_min = scenario.d_min
        static_rows: list[tuple] = []  # (edge_id, x_vid, segment_a, segment_b, radius)
        moving_rows: list[tuple] = []  # (edge_id, x_vid, dt_vid, k, obstacle)
        for k in range(1, N + 1):  # x0 is fixed; no edge needed
            for l in associations[k] if k < len(associations) else []:
                obs = scenario.obstacles[l]
                moving = isinstance(obs, MovingStadiumObstacle)
                eid = f"obs_{k}_{l}"
                if moving and not fixed_dt:
                    def obs_fn(xk, dtk, _o=obs, _k=k):
                        return np.array(
                            [signed_clearance(fp, xk, _o, t0 + _k * dtk[0]) - d_min]
                        )

                    vids = [f"x{k}", dt_id(min(k, N - 1))]
                    moving_rows.append((eid, f"x{k}", vids[1], k, obs))
                else:
                    t_k = t0 + k * (float(config.dt_s) if fixed_dt else guess.dts[min(k, N - 1)])
                    def obs_fn(xk, _o=obs, _t=t_k):
                        return np.array([signed_clearance(fp, xk, _o, _t) - d_min])

                    vids = [f"x{k}"]
                    a, b = obs.segment(t_k)
                    static_rows.append((eid, f"x{k}", a, b, obs.radius))
                prob.add_edge(
                    Edge(
                        eid,
                        EdgeKind.INEQUALITY,
                        vids,
                        obs_fn,
                        1,
                        family="obstacle",
                        lb=np.array([0.0]),
                    )
                )
        # One batch over all static-time rows and one over all moving rows keeps
        # the batch count independent of the obstacle count.
        if static_rows:
            A2 = np.array([a for _, _, a, _, _ in static_rows], dtype=float)
            B2 = np.array([b for _, _, _, b, _ in static_rows], dtype=float)
            rad = np.array([r for _, _, _, _, r in static_rows], dtype=float)

            def obs_static_batch(X, _A2=A2, _B2=B2, _rad=rad):
                A1, B1 = axis_rows(fp, X)
                d = dist_segment_segment_rows(A1, B1, _A2, _B2)
                return (d - fp.radius - _rad - d_min)[:, None]

            prob.batches.append(
                FamilyBatch(
                    "obstacle",
                    [r[0] for r in static_rows],
                    [[r[1] for r in static_rows]],
                    obs_static_batch,
                    1,
                )
            )
        if moving_rows:
            ks = np.array([r[3] for r in moving_rows], dtype=float)
            ox = np.array([r[4].origin[0] for r in moving_rows], dtype=float)
            oy = np.array([r[4].origin[1] for r in moving_rows], dtype=float)
            ln = np.array([r[4].length for r in moving_rows], dtype=float)
            rad = np.array([r[4].radius for r in moving_rows], dtype=float)
            vel = np.array([r[4].velocity for r in moving_rows], dtype=float)

            def obs_moving_batch(X, DT, _ks=ks, _ox=ox, _oy=oy, _ln=ln, _rad=rad, _vel=vel):
                T = t0 + _ks * DT[:, 0]
                ax = _ox + _vel * T
                A2 = np.stack([ax, _oy], axis=1)
                B2 = np.stack([ax + _ln, _oy], axis=1)
                A1, B1 = axis_rows(fp, X)
                d = dist_segment_segment_rows(A1, B1, A2, B2)
                return (d - fp.radius - _rad - d_min)[:, None]

            prob.batches.append(
                FamilyBatch(
                    "obstacle",
                    [r[0] for r in moving_rows],
                    [[r[1] for r in moving_rows], [r[2] for r in moving_rows]],
                    obs_moving_batch,
                    1,
                )
            )

    return prob


def extract_grid(prob: HypergraphProblem, guess: TrajectoryGrid) -> TrajectoryGrid:
    """Read optimized vertex values back into a trajectory grid."""
    N = guess.N
    out = guess.copy()
    for k in range(N + 1):
        out.states[k] = prob.vertices[f"x{k}"].values
    for k in range(N):
        out.controls[k] = prob.vertices[f"u{k}"].values
    if not guess.fixed_dt:
        if guess.mode == GridMode.GLOBAL_UNIFORM and "dt" in prob.vertices:
            out.dts[:] = prob.vertices["dt"].values[0]
        elif f"dt0" in prob.vertices:
            for k in range(N):
                out.dts[k] = prob.vertices[f"dt{k}"].values[0]
    return out
