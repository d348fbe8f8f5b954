"""Reduced gradient descent with backtracking line search and subspace enrichment.

The run starts with a single (constant-weight) mode, so the first stage can
only apply a global affine map. Whenever the full-space step shrinks below
the stage's stall threshold, one more mode is appended (z grows by 12 zeroed
entries, leaving the current shape untouched) and optimization continues in
the enlarged subspace with a tighter threshold.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from .energy import dirichlet_energy, total_energy
from .errors import InvalidInputError
from .mesh import box_diagonal, joint_bounding_box, unvectorize, vectorize
from .operators import cotan_laplacian, lumped_mass
from .sdf import make_quadrature
from .subspace import build_basis, compute_modes, project_gradient, reconstruct


@dataclass
class OptimizerConfig:
    max_modes: int = 30
    stall_start: float = 0.1
    stall_end: float = 1e-3
    max_inner: int = 500
    max_total: int = 20000
    armijo: float = 1e-4
    shrink: float = 0.5
    max_halvings: int = 40
    step_growth: float = 2.0
    step_cap: float = 1.0
    reg_lambda: float = 0.0
    # multiplies the stall thresholds; None means the joint bbox diagonal,
    # 1.0 is appropriate for meshes pre-normalized to unit diagonal
    stall_scale: float | None = None

    def validate(self):
        if self.max_modes < 1:
            raise InvalidInputError(f"max_modes must be >= 1, got {self.max_modes}")
        if not (0 < self.stall_end <= self.stall_start):
            raise InvalidInputError(
                f"need 0 < stall_end <= stall_start, got "
                f"{self.stall_end} / {self.stall_start}"
            )
        if self.reg_lambda < 0:
            raise InvalidInputError(f"reg_lambda must be >= 0, got {self.reg_lambda}")


@dataclass
class TraceRow:
    stage: int
    iteration: int
    energy: float
    grad_norm: float
    alpha: float
    dx_norm: float
    event: str = ""


@dataclass
class OptimizerTrace:
    rows: list = field(default_factory=list)
    termination: str = ""

    def accepted_energies(self):
        return [r.energy for r in self.rows if r.alpha > 0.0]

    def stage_end_energies(self):
        """Final accepted energy per stage, for stages with >= 1 accepted step."""
        out = {}
        for r in self.rows:
            if r.alpha > 0.0:
                out[r.stage] = r.energy
        return out

    def to_csv(self, path=None):
        buf = io.StringIO()
        buf.write("stage,iter,energy,grad_norm,alpha,dx_norm,event\n")
        for r in self.rows:
            buf.write(
                f"{r.stage},{r.iteration},{r.energy:.17g},{r.grad_norm:.17g},"
                f"{r.alpha:.17g},{r.dx_norm:.17g},{r.event}\n"
            )
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text


def stall_schedule(stage, max_modes, start, end):
    """Per-stage stall threshold: geometric decay from start to end."""
    if not (1 <= stage <= max_modes):
        raise InvalidInputError(f"stage {stage} outside [1, {max_modes}]")
    if max_modes == 1:
        return end
    return start * (end / start) ** ((stage - 1) / (max_modes - 1))


def stall_check(dx, eps_stall):
    """True when the full-space step is too small to count as progress."""
    return float(np.linalg.norm(dx)) < eps_stall


def _armijo(z, direction, grad_z, energy_fn, alpha0, config, e0=None):
    g2 = float(grad_z @ grad_z)
    if g2 == 0.0:
        raise InvalidInputError("line search needs a nonzero gradient")
    if e0 is None:
        e0 = energy_fn(z)
    alpha = alpha0
    for _ in range(config.max_halvings + 1):
        trial = energy_fn(z + alpha * direction)
        if trial <= e0 - config.armijo * alpha * g2:
            return alpha, trial
        alpha *= config.shrink
    return 0.0, e0


def line_search(z, direction, grad_z, energy_fn, alpha0, config):
    """Backtracking Armijo search along direction = -grad_z.

    Returns the accepted step, or 0.0 if every halving fails (a stall signal,
    not an error).
    """
    return _armijo(z, direction, grad_z, energy_fn, alpha0, config)[0]


def register(source, target, config=None, quad=None, grid_resolution=(32, 32, 32),
             pad_fraction=0.05, sign_mode="pseudonormal", workers=-1, on_step=None):
    """Deform the source mesh to match the target's signed distance field.

    Returns (registered mesh, trace). `quad` may be passed in to reuse a
    precomputed grid; `on_step(stage, iteration, flat_coords)` is called after
    every accepted step.
    """
    config = config or OptimizerConfig()
    config.validate()
    if config.max_modes > source.num_vertices:
        raise InvalidInputError(
            f"max_modes {config.max_modes} exceeds vertex count {source.num_vertices}"
        )

    L = cotan_laplacian(source)
    M = lumped_mass(source)
    modes = compute_modes(L, M, config.max_modes)
    basis = build_basis(modes, source)
    if quad is None:
        quad = make_quadrature(source, target, grid_resolution, pad_fraction,
                               sign_mode=sign_mode, workers=workers)
    x0 = vectorize(source)
    tris = source.triangles

    scale = config.stall_scale
    if scale is None:
        scale = box_diagonal(joint_bounding_box(source, target, 0.0))

    def energy_at(z):
        x = reconstruct(basis, z, x0)
        return total_energy(x, tris, quad, config.reg_lambda, L, x0,
                            with_gradient=False, workers=workers).energy

    def energy_grad_at(z, m):
        x = reconstruct(basis, z, x0)
        report = total_energy(x, tris, quad, config.reg_lambda, L, x0,
                              with_gradient=True, workers=workers)
        return report.energy, project_gradient(basis, report.gradient, m)

    trace = OptimizerTrace()
    z = np.zeros(12)
    m = 1
    total_iters = 0
    while True:
        eps_stall = scale * stall_schedule(m, config.max_modes,
                                           config.stall_start, config.stall_end)
        prev_alpha = None
        stage_stalled = False
        current_energy = None
        for it in range(1, config.max_inner + 1):
            if total_iters >= config.max_total:
                trace.termination = "max_total_iterations"
                return _finish(basis, z, x0, tris, trace)
            energy, grad_z = energy_grad_at(z, m)
            current_energy = energy
            grad_norm = float(np.linalg.norm(grad_z))
            if grad_norm == 0.0:
                trace.rows.append(TraceRow(m, it, energy, 0.0, 0.0, 0.0,
                                           "stall:zero-gradient"))
                stage_stalled = True
                break
            if prev_alpha is None:
                alpha0 = 1.0 / max(1.0, grad_norm)
            else:
                alpha0 = min(config.step_growth * prev_alpha, config.step_cap)
            alpha, new_energy = _armijo(z, -grad_z, grad_z, energy_at, alpha0,
                                        config, e0=energy)
            total_iters += 1
            if alpha == 0.0:
                trace.rows.append(TraceRow(m, it, energy, grad_norm, 0.0, 0.0,
                                           "stall:line-search"))
                stage_stalled = True
                break
            prev_alpha = alpha
            dz = -alpha * grad_z
            z = z + dz
            current_energy = new_energy
            dx_norm = float(np.linalg.norm(basis.columns(m) @ dz))
            stalled = dx_norm < eps_stall
            trace.rows.append(TraceRow(m, it, new_energy, grad_norm, alpha, dx_norm,
                                       "stall:dx" if stalled else ""))
            if on_step is not None:
                on_step(m, it, reconstruct(basis, z, x0))
            if stalled:
                stage_stalled = True
                break
        if current_energy is None:
            current_energy = energy_at(z)
        if not stage_stalled:
            # inner-iteration cap acts like a stall: move on to the next stage
            trace.rows.append(TraceRow(m, config.max_inner, current_energy, 0.0, 0.0,
                                       0.0, "stall:max-inner"))
        if m == config.max_modes:
            trace.termination = "stalled_at_final_stage"
            return _finish(basis, z, x0, tris, trace)
        m += 1
        z = np.concatenate([z, np.zeros(12)])
        # zero padding leaves the shape, and therefore the energy, unchanged
        trace.rows.append(TraceRow(m, 0, current_energy, 0.0, 0.0, 0.0, "enrich"))


def _finish(basis, z, x0, triangles, trace):
    x = reconstruct(basis, z, x0)
    return unvectorize(x, triangles), trace
