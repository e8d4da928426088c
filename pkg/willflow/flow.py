"""Time integration of the Willmore flow in three gauges.

Every variant moves the immersion with ``-dW`` plus a tangential term: the
conformal gauge velocity, nothing (normal flow) or the DeTurck field. The
stiff biharmonic part is treated implicitly with a constant-coefficient
stabilizer so the update is diagonal in spectral space.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from willflow.log import logger
from willflow.errors import (
    AbortedRunError,
    ConfigurationError,
    ConformalizationError,
    FlowClassError,
)
from willflow.geometry import (
    EnergyReport,
    Immersion,
    balance_residual,
    energies,
    hopf_residual,
)
from willflow.gauge import (
    AdmissibilityTolerances,
    TangentialVelocity,
    check_admissible,
    conformal_tangential_velocity,
    conformalize,
    rebalance,
)
from willflow.willmore import (
    WillmoreFields,
    dissipation_rate,
    noether_residuals,
    willmore_operator,
)

VARIANTS = ("conformal", "normal", "deturck")


@dataclass
class FlowConfig:
    """Parameters of a flow run.

    ``stabilizer = None`` selects ``max(exp(-4 lam)) / 2``, refreshed every step.
    In the conformal variant a step whose Hopf residual exceeds
    ``reproject_fraction * max_hopf`` is conformalized again before the
    monitors run.
    """

    variant: str = "conformal"
    dt: float = 1e-4
    t_end: float = 0.5
    stabilizer: Optional[float] = None
    rebalance_every: int = 1
    stop_w0: float = 1e-10
    L_max: int = 32
    max_hopf: float = 1e-4
    max_lambda_excursion: float = 0.5
    energy_tolerance: float = 1e-10
    conformal_relaxation: float = 0.0
    dealias: bool = True
    reproject_fraction: float = 0.01
    max_halvings: int = 5
    grow_after: int = 20
    grow_factor: float = 1.2
    store_every: int = 100

    def validate(self):
        """Raises :class:`ConfigurationError` naming the first offending key."""
        checks = [
            ("variant", self.variant in VARIANTS),
            ("dt", self.dt > 0),
            ("t_end", self.t_end > 0),
            ("stabilizer", self.stabilizer is None or self.stabilizer >= 0),
            ("rebalance_every", self.rebalance_every >= 1),
            ("stop_w0", self.stop_w0 > 0),
            ("L_max", self.L_max >= 4),
            ("max_hopf", self.max_hopf > 0),
            ("max_lambda_excursion", self.max_lambda_excursion > 0),
            ("energy_tolerance", self.energy_tolerance >= 0),
            ("conformal_relaxation", self.conformal_relaxation >= 0),
            ("reproject_fraction", 0 < self.reproject_fraction <= 1),
            ("max_halvings", self.max_halvings >= 0),
            ("grow_after", self.grow_after >= 1),
            ("grow_factor", self.grow_factor >= 1),
            ("store_every", self.store_every >= 1),
        ]
        for key, ok in checks:
            if not ok:
                raise ConfigurationError(
                    "value {!r} out of range".format(getattr(self, key)), key=key
                )
        return self

    def stability_bound(self, stabilizer: float, dt: float = None) -> float:
        """``dt c L^4``, the stiffness handled implicitly per step."""
        dt = self.dt if dt is None else dt
        return dt * stabilizer * float(self.L_max) ** 4


@dataclass
class FlowState:
    t: float
    im: Immersion
    wf: WillmoreFields
    W0: float
    step_index: int = 0
    last_U: Optional[TangentialVelocity] = None
    dt: float = None
    clean_steps: int = 0

    def __repr__(self):
        return "FlowState(t={:.6f}, step={:d}, W0={:.4e})".format(
            self.t, self.step_index, self.W0
        )


@dataclass
class StepReport:
    """Diagnostics of one accepted step, measured at its end."""

    t: float
    step_index: int
    energies: EnergyReport
    dissipation_lhs: float
    dissipation_rhs: float
    hopf: float
    balance: float
    noether: np.ndarray
    dt_used: float
    stabilizer: float
    rebalance_iterations: int = 0
    stability_bound: float = 0.0
    reprojected: bool = False

    @property
    def dissipation_defect(self) -> float:
        return abs(self.dissipation_lhs - self.dissipation_rhs)


def initial_state(datum: Immersion, cfg: FlowConfig) -> FlowState:
    wf = willmore_operator(
        datum, require_conformal=cfg.variant == "conformal", dealias=cfg.dealias
    )
    return FlowState(t=0.0, im=datum, wf=wf, W0=energies(datum).W0, dt=cfg.dt)


def biharmonic_symbol(L_max: int) -> np.ndarray:
    l = np.arange(L_max + 1, dtype=float)[:, None]
    return np.broadcast_to((l * (l + 1)) ** 2, (L_max + 1, 2 * L_max + 1))


def imex_update(im: Immersion, velocity: np.ndarray, dt: float, c: float) -> np.ndarray:
    """``(1 + dt c Lap^2)^{-1} (Phi + dt (v + c Lap^2 Phi))`` in coefficients."""
    symbol = c * biharmonic_symbol(im.L_max)
    v_hat = im.grid.analysis(velocity, 0)
    return (im.coeffs + dt * (v_hat + symbol * im.coeffs)) / (1.0 + dt * symbol)


def deturck_vector_field(im: Immersion, ref: Immersion) -> np.ndarray:
    """DeTurck tangential velocity ``-(1/2) P(Laplace_g dPhi(W))`` in immersed form.

    ``W`` is the traced difference of the Levi-Civita connections of the
    current and the reference metric, obtained as minus the tension field of
    the identity from ``(S^2, g)`` to ``(S^2, g_ref)``.
    """
    if ref.grid is not im.grid:
        raise ConfigurationError("DeTurck reference lives on a different grid.")
    lap_ref = im.laplace_beltrami(ref.phi)
    b_t = np.sum(ref.d_theta * lap_ref, axis=0)
    b_p = np.sum(ref.d_phi * lap_ref, axis=0)
    gi_tt, gi_tp, gi_pp = ref.g_inv
    W = -(gi_tt * b_t + gi_tp * b_p) - 1j * (gi_tp * b_t + gi_pp * b_p)
    X = im.tangent_vector(W)
    lap_X = im.laplace_beltrami(X)
    N = im.normal
    return -0.5 * (lap_X - N * np.sum(N * lap_X, axis=0))


def _monitor(
    cfg: FlowConfig, state: FlowState, new_im: Immersion, W0: float, check_hopf: bool
):
    if check_hopf:
        hopf = hopf_residual(new_im)
        if hopf > cfg.max_hopf:
            raise FlowClassError(
                "Hopf residual {:.3e} exceeds {:.1e}.".format(hopf, cfg.max_hopf),
                state=state,
                monitor="hopf",
            )
    excursion = float(np.max(np.abs(np.exp(new_im.lam) - 1.0)))
    if excursion > cfg.max_lambda_excursion:
        raise FlowClassError(
            "Conformal factor excursion {:.3e} exceeds {:.1e}.".format(
                excursion, cfg.max_lambda_excursion
            ),
            state=state,
            monitor="lambda",
        )
    if W0 > state.W0 + cfg.energy_tolerance:
        raise FlowClassError(
            "W0 increased from {:.6e} to {:.6e}.".format(state.W0, W0),
            state=state,
            monitor="energy",
        )


def _stabilizer(cfg: FlowConfig, im: Immersion) -> float:
    if cfg.stabilizer is not None:
        return cfg.stabilizer
    return 0.5 * float(np.max(np.exp(-4 * im.lam)))


def _reproject(state: FlowState, cfg: FlowConfig, new_im: Immersion):
    """Conformalizes ``new_im`` again once its Hopf residual passes the trigger.

    The implicit stabilizer damps the tangential velocity together with the
    normal one, so conformality drifts by a small amount every step.
    """
    trigger = cfg.reproject_fraction * cfg.max_hopf
    hopf = hopf_residual(new_im)
    if hopf <= trigger:
        return new_im, False
    try:
        new_im = conformalize(new_im, tol=max(1e-2 * trigger, 1e-12))
    except ConformalizationError as err:
        raise FlowClassError(
            "Reprojection to conformal gauge failed: {}".format(err),
            state=state,
            monitor="hopf",
        )
    logger.debug(
        "Reprojected at t = {:.5f}: hopf {:.3e} -> {:.3e}.".format(
            state.t, hopf, hopf_residual(new_im)
        )
    )
    return new_im, True


def _advance(
    state: FlowState,
    cfg: FlowConfig,
    tangential: np.ndarray,
    dt: float,
    rebalance_now: bool,
    tv: TangentialVelocity = None,
    conformal: bool = False,
):
    im, wf = state.im, state.wf
    c = _stabilizer(cfg, im)
    velocity = -wf.dW + tangential
    new_im = Immersion(im.grid, imex_update(im, velocity, dt, c))
    reprojected = False
    if conformal:
        new_im, reprojected = _reproject(state, cfg, new_im)
    iterations = 0
    if rebalance_now:
        new_im, psi = rebalance(new_im)
        iterations = psi.newton_iterations
    new_wf = willmore_operator(new_im, require_conformal=False, dealias=cfg.dealias)
    report_energies = energies(new_im)
    _monitor(cfg, state, new_im, report_energies.W0, check_hopf=conformal)

    new_state = FlowState(
        t=state.t + dt,
        im=new_im,
        wf=new_wf,
        W0=report_energies.W0,
        step_index=state.step_index + 1,
        last_U=tv,
        dt=state.dt,
        clean_steps=state.clean_steps,
    )
    report = StepReport(
        t=new_state.t,
        step_index=new_state.step_index,
        energies=report_energies,
        dissipation_lhs=(report_energies.W0 - state.W0) / dt,
        dissipation_rhs=-dissipation_rate(im, wf),
        hopf=report_energies.hopf_l2,
        balance=float(np.linalg.norm(balance_residual(new_im))),
        noether=noether_residuals(new_im, new_wf),
        dt_used=dt,
        stabilizer=c,
        rebalance_iterations=iterations,
        stability_bound=cfg.stability_bound(c, dt),
        reprojected=reprojected,
    )
    return new_state, report


def step_conformal(state: FlowState, cfg: FlowConfig, dt: float = None):
    """One conformal-gauge step, rebalanced every ``rebalance_every`` steps.

    Raises:
        FlowClassError: on a monitor breach.
    """
    dt = dt or cfg.dt
    tv = conformal_tangential_velocity(
        state.im,
        state.wf,
        relaxation=cfg.conformal_relaxation,
        conformal_tol=max(cfg.max_hopf, 1e-4),
    )
    rebalance_now = (state.step_index + 1) % cfg.rebalance_every == 0
    return _advance(state, cfg, tv.immersed, dt, rebalance_now, tv, conformal=True)


def step_normal(state: FlowState, cfg: FlowConfig, dt: float = None):
    """One step of the purely normal flow; conformality is not maintained."""
    dt = dt or cfg.dt
    return _advance(state, cfg, np.zeros_like(state.im.phi), dt, False)


def step_deturck(state: FlowState, cfg: FlowConfig, ref: Immersion, dt: float = None):
    """One step of the DeTurck-gauged flow relative to ``ref``."""
    dt = dt or cfg.dt
    return _advance(state, cfg, deturck_vector_field(state.im, ref), dt, False)


@dataclass
class Trajectory:
    """States at the storage cadence and one report per accepted step."""

    states: List[FlowState] = field(default_factory=list)
    reports: List[StepReport] = field(default_factory=list)
    initial_W0: float = None
    initial_area: float = None
    reference: Immersion = None
    halvings: int = 0
    converged: bool = False

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    def dissipated(self) -> float:
        """``sum dt int |dW|^2 dsigma_g`` over the accepted steps."""
        return float(sum(-r.dt_used * r.dissipation_rhs for r in self.reports))

    def energy_defect(self) -> float:
        """``W0(T) - W0(0) + dissipated``, zero for the exact flow."""
        return self.final.W0 - self.initial_W0 + self.dissipated()


def _step_for(cfg: FlowConfig, ref: Immersion) -> Callable:
    if cfg.variant == "conformal":
        return step_conformal
    if cfg.variant == "normal":
        return step_normal
    return lambda state, cfg, dt=None: step_deturck(state, cfg, ref, dt)


def run_flow(
    datum: Immersion,
    cfg: FlowConfig,
    on_step: Callable = None,
    state: FlowState = None,
    reference: Immersion = None,
    initial_W0: float = None,
    initial_area: float = None,
    tolerances: AdmissibilityTolerances = None,
) -> Trajectory:
    """Integrates the flow until ``t_end`` or ``W0 <= stop_w0``.

    Args:
        datum (Immersion): Initial immersion, normalized for the conformal variant.
        cfg (FlowConfig): Run parameters.
        on_step (callable): Called as ``on_step(state, report)`` after each
            accepted step.
        state (FlowState): Resume from this state instead of ``datum``.
        reference (Immersion): DeTurck reference, the datum by default.
        initial_W0, initial_area (float): Values at t = 0 when resuming.
        tolerances (AdmissibilityTolerances): Membership thresholds checked on
            a fresh conformal start.

    Returns:
        Trajectory: The stored states and all step reports.

    Raises:
        AdmissibilityError: when a fresh conformal start is not a normalized
            datum of small energy.
        AbortedRunError: when a step keeps breaching after ``max_halvings``
            halvings. The trajectory so far, ending with the last accepted
            state, is attached to the exception.
    """
    cfg.validate()
    if state is None:
        if cfg.variant == "conformal":
            check_admissible(datum, tolerances)
        state = initial_state(datum, cfg)
    reference = reference if reference is not None else datum
    trajectory = Trajectory(
        states=[state],
        initial_W0=initial_W0 if initial_W0 is not None else state.W0,
        initial_area=initial_area if initial_area is not None else state.im.area(),
        reference=reference,
    )
    step = _step_for(cfg, reference)
    dt = state.dt or cfg.dt
    clean = state.clean_steps
    c0 = _stabilizer(cfg, state.im)
    logger.info(
        "Starting {} flow at t = {:.4f} with W0 = {:.4e}, dt = {:.2e}, dt c L^4 = {:.3g}.".format(
            cfg.variant, state.t, state.W0, dt, cfg.stability_bound(c0, dt)
        )
    )
    while state.t < cfg.t_end * (1 - 1e-12):
        if state.W0 <= cfg.stop_w0:
            trajectory.converged = True
            logger.info("W0 = {:.3e} below stop threshold at t = {:.4f}.".format(state.W0, state.t))
            break
        dt_try = min(dt, cfg.t_end - state.t)
        for attempt in range(cfg.max_halvings + 1):
            try:
                new_state, report = step(state, cfg, dt=dt_try)
                break
            except FlowClassError as err:
                if attempt == cfg.max_halvings:
                    logger.error("Aborting at t = {:.4f}: {}".format(state.t, err))
                    if trajectory.states[-1] is not state:
                        trajectory.states.append(state)
                    raise AbortedRunError(
                        "Run aborted at t = {:.6f} after {:d} halvings: {}".format(
                            state.t, attempt, err
                        ),
                        trajectory=trajectory,
                    )
                dt_try /= 2
                trajectory.halvings += 1
                logger.warning("{} Halving dt to {:.3e}.".format(err, dt_try))
        if attempt > 0:
            dt, clean = dt_try, 0
        else:
            clean += 1
            if clean >= cfg.grow_after and dt < cfg.dt:
                dt, clean = min(cfg.dt, dt * cfg.grow_factor), 0
        new_state.dt, new_state.clean_steps = dt, clean
        state = new_state
        trajectory.reports.append(report)
        if state.step_index % cfg.store_every == 0:
            trajectory.states.append(state)
        if on_step is not None:
            on_step(state, report)
        logger.debug(
            "step {:d}: t = {:.5f}, W0 = {:.6e}, hopf = {:.2e}".format(
                report.step_index, report.t, report.energies.W0, report.hopf
            )
        )
    else:
        trajectory.converged = state.W0 <= cfg.stop_w0
    if trajectory.states[-1] is not state:
        trajectory.states.append(state)
    logger.info(
        "Finished at t = {:.4f} after {:d} steps, W0 = {:.4e}.".format(
            state.t, state.step_index, state.W0
        )
    )
    return trajectory
