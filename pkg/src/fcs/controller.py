"""Runtime control laws: baseline PI, hard saturation, constraint augmentation
and anti-windup-only augmentation."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConstraintFault, ModelError


class ControllerMode(str, Enum):
    BASELINE = "baseline"
    HARD_SATURATION = "saturation"
    AUGMENTED = "augmented"
    AW_ONLY = "awonly"


@dataclass(frozen=True, eq=False)
class ControlDecision:
    u_bl: np.ndarray
    v: np.ndarray
    w: np.ndarray
    u_total: np.ndarray
    delta: np.ndarray
    y_lim_minmax: np.ndarray
    dH_min: np.ndarray
    dH_max: np.ndarray


def baseline_control(gains, e_yI, x_p):
    return -gains.K_I @ np.asarray(e_yI, dtype=float) - gains.K_P @ np.asarray(x_p, dtype=float)


def hard_saturate(u, box):
    return np.maximum(box.u_min, np.minimum(np.asarray(u, dtype=float), box.u_max))


def modified_constraints(design, y_min, y_max, x, nominal):
    """``(dH_min, dH_max)`` for an arbitrary nominal extended input.

    ``nominal`` is what the open loop receives without augmentation; for
    the PI servo it is ``[-y_cmd; u_bl]``.
    """
    s = design.H_x @ x + design.H_u @ nominal
    a = design.alpha_pi
    return -s + a * y_min, s - a * y_max


def delta_h(design, ext, x, u_bl, y_cmd):
    """Offsets of the modified min/max constraints at ``v = w = 0``."""
    nominal = np.concatenate([-np.asarray(y_cmd, dtype=float), np.asarray(u_bl, dtype=float)])
    return modified_constraints(design, ext.y_lim_min, ext.y_lim_max, np.asarray(x, dtype=float), nominal)


def activity(dH_min, dH_max):
    """Binary activity pattern; raises if both branches of a channel fire."""
    lo = dH_min > 0
    hi = dH_max > 0
    both = lo & hi
    if np.any(both):
        raise ConstraintFault(f"min and max constraints simultaneously active on channels {np.flatnonzero(both).tolist()}")
    return lo, hi


def augment(design, dH_min, dH_max):
    """Min-norm augmentation ``[v; w] = H_u^-1 (max(0, dH_min) - max(0, dH_max))``.

    Returns ``(v, w, delta)`` with ``delta`` the 0/1 activity of each channel.
    """
    dH_min = np.asarray(dH_min, dtype=float)
    dH_max = np.asarray(dH_max, dtype=float)
    lo, hi = activity(dH_min, dH_max)
    rhs = np.where(lo, dH_min, 0.0) - np.where(hi, dH_max, 0.0)
    vw = design.H_u_inv @ rhs
    m = vw.size // 2
    return vw[:m], vw[m:], (lo | hi).astype(int)


def aw_only(gains, plant, alpha_pi, x, y_cmd, bounds):
    """Anti-windup signal for input constraints alone.

    With no output limits the control sensitivity reduces to ``-K_I``, so

        v = K_I^-1 (max(0, dG_max) - max(0, dG_min))

    where ``dG_min/dG_max`` are the input-channel rows of the modified
    constraint offsets evaluated with ``u_bl = -K_x x``.
    """
    u_min, u_max = (np.asarray(b, dtype=float) for b in bounds)
    m = plant.m
    alpha = np.asarray(alpha_pi, dtype=float)[:m]
    x = np.asarray(x, dtype=float)
    e, x_p = x[:m], x[m:]
    K_I, K_P = gains.K_I, gains.K_P
    M = K_I @ plant.D_p_reg + K_P @ plant.B_p
    u_bl = -K_I @ e - K_P @ x_p
    # nominal d/dt u_bl (v = 0, u = u_bl)
    rate = -K_I @ (plant.C_p_reg @ x_p - y_cmd) - K_P @ plant.A_p @ x_p - M @ u_bl
    dG_min = -rate + alpha * (u_min - u_bl)
    dG_max = rate + alpha * (u_bl - u_max)
    lo, hi = activity(dG_min, dG_max)
    rhs = np.where(hi, dG_max, 0.0) - np.where(lo, dG_min, 0.0)
    return np.linalg.solve(K_I, rhs)


class ControlLaw:
    """Precomputed evaluator of one controller mode.

    ``__call__`` returns the extended input ``[v - y_cmd; u_bl + w]`` and is
    what the integrator calls at every stage; :meth:`decide` returns the full
    diagnostic record.
    """

    def __init__(self, mode, ext, design=None):
        self.mode = ControllerMode(mode)
        self.ext = ext
        self.design = design
        m = ext.m
        self.m = m
        K = ext.gains.K_x
        self.K = K
        self.u_min = ext.box.u_min
        self.u_max = ext.box.u_max
        self.y_min = ext.y_lim_min
        self.y_max = ext.y_lim_max
        if design is None:
            if self.mode in (ControllerMode.AUGMENTED, ControllerMode.AW_ONLY):
                raise ModelError(f"mode {self.mode.value} needs an augmentation design")
            return
        a = design.alpha_pi
        self.alpha = a
        # H_x x + H_u [-y_cmd; -K x] = F x - G y_cmd
        self.F = design.H_x - design.H_u[:, m:] @ K
        self.G = design.H_u[:, :m]
        self.a_ymin = a * self.y_min
        self.a_ymax = a * self.y_max
        self.K_I_inv = np.linalg.inv(ext.gains.K_I)

    def _offsets(self, x, y_cmd):
        s = self.F @ x - self.G @ y_cmd
        return -s + self.a_ymin, s - self.a_ymax

    def _signals(self, x, y_cmd):
        m = self.m
        u_bl = -self.K @ x
        zero = np.zeros(m)
        if self.mode is ControllerMode.BASELINE:
            return u_bl, zero, zero, None
        if self.mode is ControllerMode.HARD_SATURATION:
            u = np.minimum(np.maximum(u_bl, self.u_min), self.u_max)
            return u_bl, zero, u - u_bl, None
        dmin, dmax = self._offsets(x, y_cmd)
        if self.mode is ControllerMode.AUGMENTED:
            v, w, _ = augment(self.design, dmin, dmax)
            return u_bl, v, w, (dmin, dmax)
        lo, hi = activity(dmin[:m], dmax[:m])
        rhs = np.where(lo, dmin[:m], 0.0) - np.where(hi, dmax[:m], 0.0)
        return u_bl, -self.K_I_inv @ rhs, zero, (dmin, dmax)

    def __call__(self, x, y_cmd):
        if self.mode is ControllerMode.AUGMENTED:
            # hot path of the integrator; same arithmetic as augment()
            s = self.F @ x - self.G @ y_cmd
            dmin = self.a_ymin - s
            dmax = s - self.a_ymax
            pmin = np.maximum(dmin, 0.0)
            pmax = np.maximum(dmax, 0.0)
            if ((dmin > 0) & (dmax > 0)).any():
                activity(dmin, dmax)
            vw = self.design.H_u_inv @ (pmin - pmax)
            m = self.m
            vw[:m] -= y_cmd
            vw[m:] -= self.K @ x
            return vw
        u_bl, v, w, _ = self._signals(x, y_cmd)
        return np.concatenate([v - y_cmd, self._total(u_bl, w)])

    def _total(self, u_bl, w):
        if self.mode is ControllerMode.HARD_SATURATION:
            # exact clamp; u_bl + (sat(u_bl) - u_bl) may round off the bound
            return np.minimum(np.maximum(u_bl, self.u_min), self.u_max)
        return u_bl + w

    def decide(self, x, y_cmd):
        x = np.asarray(x, dtype=float)
        y_cmd = np.asarray(y_cmd, dtype=float)
        m = self.m
        u_bl, v, w, offsets = self._signals(x, y_cmd)
        if offsets is None and self.design is not None:
            offsets = self._offsets(x, y_cmd)
        if offsets is None:
            dmin = dmax = np.full(2 * m, np.nan)
        else:
            dmin, dmax = offsets
        lo = np.zeros(2 * m, dtype=bool)
        hi = np.zeros(2 * m, dtype=bool)
        if self.mode is ControllerMode.HARD_SATURATION:
            lo[:m] = u_bl < self.u_min
            hi[:m] = u_bl > self.u_max
        elif self.mode is ControllerMode.AUGMENTED:
            lo, hi = activity(dmin, dmax)
        elif self.mode is ControllerMode.AW_ONLY:
            lo[:m], hi[:m] = activity(dmin[:m], dmax[:m])
        delta = (lo | hi).astype(int)
        y_mm = np.where(lo, self.y_min, np.where(hi, self.y_max, 0.0))
        return ControlDecision(
            u_bl=u_bl, v=v, w=w, u_total=self._total(u_bl, w), delta=delta,
            y_lim_minmax=y_mm, dH_min=dmin, dH_max=dmax,
        )


def decide(mode, design, ext, gains, x, y_cmd):
    """One-shot evaluation of a controller mode (see :class:`ControlLaw`)."""
    if gains is not None and not np.array_equal(gains.K_x, ext.gains.K_x):
        raise ModelError("gains differ from those the extended system was built with")
    return ControlLaw(mode, ext, design).decide(x, y_cmd)


def siso_pi_constrained_matrices(plant, gains, alpha_u):
    """Closed loop of a SISO PI servo riding its input limit.

    With the input constraint active the command obeys
    ``du/dt = -alpha_u (u - u_lim)``. Mapping ``(x_p, u)`` back to
    ``(x_p, e_yI)`` through ``u = -k_p x_p - k_I e_yI`` gives

        d/dt [x_p; e_yI] = A_G [x_p; e_yI] + b_G u_lim

    Returns ``(A_G, b_G)``; ``A_G`` is similar to
    ``[[A_p, b_p], [0, -alpha_u]]`` so its spectrum is
    ``lambda(A_p) U {-alpha_u}``.
    """
    if plant.m != 1:
        raise ModelError("siso_pi_constrained_matrices needs a single-input plant")
    k_I = float(gains.K_I[0, 0])
    if k_I == 0.0:
        raise ModelError("k_I must be non-zero")
    if alpha_u <= 0:
        raise ValueError("alpha_u must be positive")
    A_p, b_p = plant.A_p, plant.B_p
    k_p = gains.K_P
    n_p = plant.n_p
    A_cl = A_p - b_p @ k_p
    A_G = np.block([
        [A_cl, -b_p * k_I],
        [-(k_p @ (A_cl + alpha_u * np.eye(n_p))) / k_I, k_p @ b_p - alpha_u],
    ])
    b_G = np.zeros(n_p + 1)
    b_G[-1] = -alpha_u / k_I
    return A_G, b_G
