"""Level-set solver for the auxiliary control problem of the continuous model.

The state-dependent auxiliary value W(t, x, y) solves, backward from
W(T, x, y) = |g(x) - y|^2,

    dW/dt + min over (a, z) of [ 0.5*W_xx + 0.5*z'W_yy z + z.W_yx
        + sum_i ( excess_i(t,x,a,z_i)^(3/2) - own_min_i(t,x,a_-i,z_i)*W_yi ) ] = 0

where, writing the z-coupled running cost c_i = f_i(t,x,a_i) + b(t,x,a)*z_i,
own_min_i minimizes c_i over player i's action and excess_i = c_i - own_min_i
is nonnegative. Wherever W vanishes at time t the y-vector is an attainable
equilibrium value, so the set value is read off as the near-zero level set on
the grid.

Explicit time stepping on a rectangular grid, one spatial dimension, one or
two players. First-order y-terms can be upwinded (monotone variant); all
other derivatives are central with one-sided stencils at the boundary.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .equilibria import ValueSet
from .errors import GameValidationError, NumericInstabilityError

_BOUND_TOL = 1e-9


@dataclass(frozen=True)
class DiffusionGameSpec:
    """Drift-controlled diffusion game with bounded data on action grids."""

    n_players: int
    drift: callable
    running: tuple
    terminal: tuple
    action_grids: tuple
    horizon: float
    drift_bound: float
    cost_bound: float

    def __post_init__(self):
        if self.n_players not in (1, 2):
            raise GameValidationError("grid solver supports one or two players")
        if len(self.running) != self.n_players or len(self.terminal) != self.n_players:
            raise GameValidationError("need one running and one terminal cost per player")
        if len(self.action_grids) != self.n_players or any(
            len(g) == 0 for g in self.action_grids
        ):
            raise GameValidationError("every player needs a nonempty action grid")
        if self.horizon <= 0:
            raise GameValidationError("horizon must be positive")

    @property
    def joint_actions(self) -> list[tuple[float, ...]]:
        return list(itertools.product(*self.action_grids))

    def check_bounds(self, x_values: np.ndarray) -> None:
        """Sample the declared bounds on the grid; continuity is assumed."""
        times = (0.0, 0.5 * self.horizon, self.horizon)
        for t in times:
            for a in self.joint_actions:
                for x in x_values:
                    if abs(self.drift(t, float(x), a)) > self.drift_bound + _BOUND_TOL:
                        raise GameValidationError(
                            f"drift exceeds declared bound at t={t}, x={x}, a={a}"
                        )
                    for i in range(self.n_players):
                        if abs(self.running[i](t, float(x), a[i])) > self.cost_bound + _BOUND_TOL:
                            raise GameValidationError("running cost exceeds declared bound")
        for i in range(self.n_players):
            for x in x_values:
                if abs(self.terminal[i](float(x))) > self.cost_bound + _BOUND_TOL:
                    raise GameValidationError("terminal cost exceeds declared bound")


class CoupledCost:
    """The z-coupled running costs and their own-action lower envelope."""

    def __init__(self, spec: DiffusionGameSpec):
        self.spec = spec

    def coupled(self, i: int, t: float, x: float, a: tuple, z_i: float) -> float:
        return self.spec.running[i](t, x, a[i]) + self.spec.drift(t, x, a) * z_i

    def own_min(self, i: int, t: float, x: float, a: tuple, z_i: float) -> float:
        others = list(a)
        best = math.inf
        for ai in self.spec.action_grids[i]:
            others[i] = ai
            best = min(best, self.coupled(i, t, x, tuple(others), z_i))
        return best

    def excess(self, i: int, t: float, x: float, a: tuple, z_i: float) -> float:
        return self.coupled(i, t, x, a, z_i) - self.own_min(i, t, x, a, z_i)


def hamiltonian(
    spec: DiffusionGameSpec,
    z_values,
    t: float,
    x: float,
    y,
    grads: dict,
    return_argmin: bool = False,
):
    """Minimized PDE bracket over the joint action and z grids at one point.

    ``grads`` supplies the finite-difference derivatives: ``w_xx`` (scalar),
    ``w_y`` and ``w_yx`` (length-N), and ``w_yy`` (N x N). The y argument is
    unused by the bracket itself but kept for symmetric call sites.
    """
    del y
    n = spec.n_players
    costs = CoupledCost(spec)
    w_xx = float(grads["w_xx"])
    w_y = [float(v) for v in grads["w_y"]]
    w_yx = [float(v) for v in grads["w_yx"]]
    w_yy = [[float(v) for v in row] for row in grads["w_yy"]]
    best = math.inf
    best_arg = None
    for a in spec.joint_actions:
        for z in itertools.product(z_values, repeat=n):
            val = 0.5 * w_xx
            for i in range(n):
                val += z[i] * w_yx[i]
                for j in range(n):
                    val += 0.5 * z[i] * z[j] * w_yy[i][j]
            for i in range(n):
                ex = max(costs.excess(i, t, x, a, z[i]), 0.0)
                val += ex**1.5 - costs.own_min(i, t, x, a, z[i]) * w_y[i]
            if val < best:
                best, best_arg = val, (a, z)
    if return_argmin:
        return best, best_arg
    return best


@dataclass(frozen=True)
class GridConfig:
    """Rectangular grid and scheme knobs for the W solver."""

    x_lo: float = -2.0
    x_hi: float = 2.0
    nx: int = 41
    y_lo: float = -1.2
    y_hi: float = 1.2
    ny: int = 41
    t_final: float = 0.25
    z_max: float = 1.5
    nz: int = 13
    cfl_safety: float = 0.25
    ht: float | None = None
    delta_scale: float = 1.0
    monotone: bool = True
    store_times: tuple = ()

    def __post_init__(self):
        if self.nx < 5 or self.ny < 5:
            raise GameValidationError("need at least 5 nodes per spatial axis")
        if self.nz < 1 or self.nz % 2 == 0:
            raise GameValidationError("nz must be odd so the z grid contains 0")
        if self.z_max <= 0 or self.t_final <= 0:
            raise GameValidationError("z_max and t_final must be positive")
        if not 0 < self.cfl_safety:
            raise GameValidationError("cfl_safety must be positive")

    @property
    def hx(self) -> float:
        return (self.x_hi - self.x_lo) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return (self.y_hi - self.y_lo) / (self.ny - 1)

    @property
    def x_values(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.nx)

    @property
    def y_values(self) -> np.ndarray:
        return np.linspace(self.y_lo, self.y_hi, self.ny)

    @property
    def z_values(self) -> np.ndarray:
        return np.linspace(-self.z_max, self.z_max, self.nz)

    @property
    def ht_bound(self) -> float:
        return self.cfl_safety * min(
            self.hx * self.hx, self.hy * self.hy / (1.0 + self.z_max * self.z_max)
        )

    def resolve_ht(self) -> tuple[float, int]:
        bound = self.ht_bound
        if self.ht is not None:
            if self.ht > bound:
                raise GameValidationError(
                    f"time step {self.ht} violates the stability bound {bound:.3e}"
                )
            ht = self.ht
        else:
            ht = bound
        nt = max(1, math.ceil(self.t_final / ht))
        return self.t_final / nt, nt

    def refined(self) -> GridConfig:
        """Halved spatial spacings in x and y, everything else unchanged."""
        return GridConfig(
            x_lo=self.x_lo,
            x_hi=self.x_hi,
            nx=2 * self.nx - 1,
            y_lo=self.y_lo,
            y_hi=self.y_hi,
            ny=2 * self.ny - 1,
            t_final=self.t_final,
            z_max=self.z_max,
            nz=self.nz,
            cfl_safety=self.cfl_safety,
            ht=None,
            delta_scale=self.delta_scale,
            monotone=self.monotone,
            store_times=self.store_times,
        )


@dataclass
class PdeField:
    """Solved W on the grid, with layers kept at selected times."""

    spec: DiffusionGameSpec
    grid: GridConfig
    layers: dict
    ht: float
    nt: int
    min_w: float

    def layer(self, t: float) -> np.ndarray:
        for key, arr in self.layers.items():
            if abs(key - t) <= 0.5 * self.ht:
                return arr
        raise GameValidationError(
            f"no stored layer near t={t}; stored at {sorted(self.layers)}"
        )


# -- finite differences --------------------------------------------------------


def first_diff(w: np.ndarray, h: float, axis: int, mode: str = "central") -> np.ndarray:
    out = np.empty_like(w)
    wm = np.moveaxis(w, axis, 0)
    om = np.moveaxis(out, axis, 0)
    if mode == "central":
        om[1:-1] = (wm[2:] - wm[:-2]) / (2.0 * h)
        om[0] = (wm[1] - wm[0]) / h
        om[-1] = (wm[-1] - wm[-2]) / h
    elif mode == "forward":
        om[:-1] = (wm[1:] - wm[:-1]) / h
        om[-1] = om[-2]
    elif mode == "backward":
        om[1:] = (wm[1:] - wm[:-1]) / h
        om[0] = om[1]
    else:
        raise GameValidationError(f"unknown difference mode {mode!r}")
    return out


def second_diff(w: np.ndarray, h: float, axis: int) -> np.ndarray:
    out = np.empty_like(w)
    wm = np.moveaxis(w, axis, 0)
    om = np.moveaxis(out, axis, 0)
    om[1:-1] = (wm[2:] - 2.0 * wm[1:-1] + wm[:-2]) / (h * h)
    om[0] = (wm[0] - 2.0 * wm[1] + wm[2]) / (h * h)
    om[-1] = (wm[-1] - 2.0 * wm[-2] + wm[-3]) / (h * h)
    return out


def _terminal_layer(spec: DiffusionGameSpec, grid: GridConfig) -> np.ndarray:
    xs = grid.x_values
    ys = grid.y_values
    g = [np.array([spec.terminal[i](float(x)) for x in xs]) for i in range(spec.n_players)]
    if spec.n_players == 1:
        return (g[0][:, None] - ys[None, :]) ** 2
    return (g[0][:, None, None] - ys[None, :, None]) ** 2 + (
        g[1][:, None, None] - ys[None, None, :]
    ) ** 2


def solve_w(spec: DiffusionGameSpec, grid: GridConfig) -> PdeField:
    """Explicit backward sweep of the auxiliary HJB equation.

    Per-combination coefficient arrays (coupled cost envelope and excess
    power) are precomputed over the x axis at t=0; the presets are time
    invariant, and mild time dependence only shifts those coefficients.
    """
    ht, nt = grid.resolve_ht()
    xs = grid.x_values
    spec.check_bounds(xs)
    n = spec.n_players
    costs = CoupledCost(spec)
    combos = []
    for a in spec.joint_actions:
        for z in itertools.product(grid.z_values.tolist(), repeat=n):
            own_min = []
            excess_pow = []
            for i in range(n):
                om = np.array([costs.own_min(i, 0.0, float(x), a, z[i]) for x in xs])
                ex = np.array([costs.excess(i, 0.0, float(x), a, z[i]) for x in xs])
                if float(ex.min()) < -1e-9:
                    raise GameValidationError("coupled cost fell below its own minimum")
                own_min.append(om)
                excess_pow.append(np.maximum(ex, 0.0) ** 1.5)
            combos.append((z, own_min, excess_pow))

    shape_tail = (1,) * n

    def col(arr: np.ndarray) -> np.ndarray:
        return arr.reshape((grid.nx,) + shape_tail)

    w = _terminal_layer(spec, grid)
    layers = {grid.t_final: w.copy()}
    want_times = set(grid.store_times) | {0.0, grid.t_final}
    min_w = float(w.min())

    y_axes = tuple(range(1, n + 1))
    with np.errstate(over="ignore", invalid="ignore"):
        return _sweep(spec, grid, w, layers, want_times, min_w, ht, nt, combos, y_axes, col)


def _sweep(spec, grid, w, layers, want_times, min_w, ht, nt, combos, y_axes, col):
    n = spec.n_players
    for step in range(1, nt + 1):
        w_xx = second_diff(w, grid.hx, axis=0)
        w_yy = [second_diff(w, grid.hy, axis=ax) for ax in y_axes]
        w_y_c = [first_diff(w, grid.hy, axis=ax, mode="central") for ax in y_axes]
        w_y_f = (
            [first_diff(w, grid.hy, axis=ax, mode="forward") for ax in y_axes]
            if grid.monotone
            else w_y_c
        )
        w_y_b = (
            [first_diff(w, grid.hy, axis=ax, mode="backward") for ax in y_axes]
            if grid.monotone
            else w_y_c
        )
        w_yx = [
            first_diff(first_diff(w, grid.hy, axis=ax, mode="central"), grid.hx, axis=0)
            for ax in y_axes
        ]
        w_y1y2 = None
        if n == 2:
            w_y1y2 = first_diff(
                first_diff(w, grid.hy, axis=1, mode="central"), grid.hy, axis=2
            )

        base = 0.5 * w_xx
        h_min = None
        for z, own_min, excess_pow in combos:
            val = base.copy()
            for i in range(n):
                zi = z[i]
                val += (0.5 * zi * zi) * w_yy[i] + zi * w_yx[i]
                mu = -col(own_min[i])
                if grid.monotone:
                    val += mu * np.where(mu > 0, w_y_f[i], w_y_b[i])
                else:
                    val += mu * w_y_c[i]
                val += col(excess_pow[i])
            if n == 2:
                val += (z[0] * z[1]) * w_y1y2
            h_min = val if h_min is None else np.minimum(h_min, val)

        w = w + ht * h_min
        mn = float(w.min())
        if not math.isfinite(mn) or not math.isfinite(float(w.max())):
            raise NumericInstabilityError(
                f"non-finite W at step {step}/{nt} (t={grid.t_final - step * ht:.5f}); "
                "refine the grid or lower cfl_safety"
            )
        min_w = min(min_w, mn)
        t_now = grid.t_final - step * ht
        for wanted in want_times:
            if abs(t_now - wanted) <= 0.5 * ht and wanted not in layers:
                layers[wanted] = w.copy()
    layers[0.0] = w.copy()
    return PdeField(spec=spec, grid=grid, layers=layers, ht=ht, nt=nt, min_w=min_w)


# -- level-set extraction --------------------------------------------------------


@dataclass(frozen=True)
class NodalCluster:
    centroid: tuple
    n_nodes: int
    extent: tuple
    w_min: float

    @property
    def diameter(self) -> float:
        return max(self.extent)


@dataclass(frozen=True)
class NodalResult:
    points: ValueSet
    clusters: tuple
    delta: float
    t: float
    x: float


def default_delta(grid: GridConfig, ht: float) -> float:
    return grid.delta_scale * (grid.hx + grid.hy + math.sqrt(ht))


def nodal_set(field: PdeField, t: float, x: float, delta: float | None = None) -> NodalResult:
    """Near-zero y-nodes of W(t, x, .) with connected clusters and centroids."""
    grid = field.grid
    layer = field.layer(t)
    xi = int(round((x - grid.x_lo) / grid.hx))
    if not 0 <= xi < grid.nx or abs(grid.x_values[xi] - x) > 1e-9 + 1e-12 * abs(x):
        raise GameValidationError(f"x={x} is not a grid node")
    if delta is None:
        delta = default_delta(grid, field.ht)
    sect = layer[xi]
    ys = grid.y_values
    n = field.spec.n_players
    mask = sect <= delta

    points = []
    idxs = np.argwhere(mask)
    for idx in idxs:
        points.append(tuple(float(ys[k]) for k in idx))

    clusters = []
    seen = np.zeros_like(mask, dtype=bool)
    for start in map(tuple, idxs):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        members = []
        while stack:
            cur = stack.pop()
            members.append(cur)
            for axis in range(n):
                for step in (-1, 1):
                    nxt = list(cur)
                    nxt[axis] += step
                    nxt = tuple(nxt)
                    if all(0 <= nxt[k] < mask.shape[k] for k in range(n)):
                        if mask[nxt] and not seen[nxt]:
                            seen[nxt] = True
                            stack.append(nxt)
        coords = np.array([[ys[k] for k in m] for m in members])
        w_vals = np.array([sect[m] for m in members])
        clusters.append(
            NodalCluster(
                centroid=tuple(float(c) for c in coords.mean(axis=0)),
                n_nodes=len(members),
                extent=tuple(
                    float(coords[:, k].max() - coords[:, k].min()) for k in range(n)
                ),
                w_min=float(w_vals.min()),
            )
        )
    clusters.sort(key=lambda c: c.centroid)
    return NodalResult(
        points=ValueSet.of(points),
        clusters=tuple(clusters),
        delta=float(delta),
        t=t,
        x=x,
    )


# -- independent single-player oracle ---------------------------------------------


def single_player_hjb(
    terminal,
    actions,
    x_lo: float,
    x_hi: float,
    nx: int,
    t_final: float,
    safety: float = 0.4,
) -> np.ndarray:
    """Scalar HJB value v(0, .) for a drift-controlled diffusion, upwind explicit.

    Solves v_t + 0.5*v_xx + min_a (a * v_x) = 0 backward from v(T, x) = g(x).
    Entirely independent of the W machinery; used as an oracle.
    """
    xs = np.linspace(x_lo, x_hi, nx)
    hx = (x_hi - x_lo) / (nx - 1)
    a_max = max(abs(float(a)) for a in actions)
    bound = hx * hx
    if a_max > 0:
        bound = min(bound, hx / a_max)
    ht = safety * bound
    nt = max(1, math.ceil(t_final / ht))
    ht = t_final / nt
    v = np.array([terminal(float(x)) for x in xs])
    for _ in range(nt):
        v_xx = second_diff(v, hx, axis=0)
        fwd = first_diff(v, hx, axis=0, mode="forward")
        bwd = first_diff(v, hx, axis=0, mode="backward")
        drift_term = None
        for a in actions:
            a = float(a)
            term = a * (fwd if a > 0 else bwd)
            drift_term = term if drift_term is None else np.minimum(drift_term, term)
        v = v + ht * (0.5 * v_xx + drift_term)
        if not math.isfinite(float(v.min())):
            raise NumericInstabilityError("oracle HJB solve became non-finite")
    return v


# -- presets -----------------------------------------------------------------------


def _sine_terminal(x: float) -> float:
    return math.sin(math.pi * x / 4.0)


def _ramp_terminal(x: float) -> float:
    return 0.4 * x


def _zero(t: float, x: float, a: float) -> float:
    return 0.0


def pde_preset(name: str) -> tuple[DiffusionGameSpec, GridConfig]:
    if name == "single-player":
        spec = DiffusionGameSpec(
            n_players=1,
            drift=lambda t, x, a: float(a[0]),
            running=(_zero,),
            terminal=(_sine_terminal,),
            action_grids=((-1.0, 0.0, 1.0),),
            horizon=0.25,
            drift_bound=1.0,
            cost_bound=1.0,
        )
        grid = GridConfig(
            x_lo=-2.0, x_hi=2.0, nx=41, y_lo=-1.2, y_hi=1.2, ny=41,
            t_final=0.25, z_max=1.5, nz=13,
        )
        return spec, grid
    if name == "static":
        spec = DiffusionGameSpec(
            n_players=2,
            drift=lambda t, x, a: 0.0,
            running=(_zero, _zero),
            terminal=(lambda x: 0.0, lambda x: 0.0),
            action_grids=((0.0,), (0.0,)),
            horizon=0.1,
            drift_bound=1.0,
            cost_bound=1.0,
        )
        grid = GridConfig(
            x_lo=-1.0, x_hi=1.0, nx=21, y_lo=-1.0, y_hi=1.0, ny=21,
            t_final=0.1, z_max=1.0, nz=5,
        )
        return spec, grid
    if name == "zero-sum":
        g1 = _ramp_terminal
        spec = DiffusionGameSpec(
            n_players=2,
            drift=lambda t, x, a: 0.5 * (a[0] - a[1]),
            running=(_zero, _zero),
            terminal=(g1, lambda x: -g1(x)),
            action_grids=((-1.0, 1.0), (-1.0, 1.0)),
            horizon=0.2,
            drift_bound=1.0,
            cost_bound=1.0,
        )
        grid = GridConfig(
            x_lo=-2.0, x_hi=2.0, nx=21, y_lo=-1.0, y_hi=1.0, ny=21,
            t_final=0.2, z_max=0.5, nz=5,
        )
        return spec, grid
    raise GameValidationError(f"no PDE preset named {name!r}")
