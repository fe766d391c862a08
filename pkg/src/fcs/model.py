"""Plant, constraint box, PI gains and the extended servo system.

The extended state is ``x = [e_yI; x_p]`` (integrated tracking error first),
and the extended input is ``[v - y_cmd; u_bl + w]``. Limited outputs stack
the baseline command on top of the plant's limited outputs, so channel
``i < m`` is an input constraint and channel ``i >= m`` an output constraint.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError

PBH_EIG_TOL = 1e-9
PBH_RANK_RTOL = 1e-9
GAIN_COND_MAX = 1e10


def _mat(value, name, shape=None):
    M = np.array(value, dtype=float, ndmin=2)
    if M.ndim != 2:
        raise ModelError(f"{name} must be a 2-D matrix")
    if not np.all(np.isfinite(M)):
        raise ModelError(f"{name} has non-finite entries")
    if shape is not None and M.shape != shape:
        raise ModelError(f"{name} has shape {M.shape}, expected {shape}")
    M.setflags(write=False)
    return M


def _vec(value, name, size):
    v = np.array(value, dtype=float).reshape(-1)
    if v.size != size:
        raise ModelError(f"{name} has {v.size} entries, expected {size}")
    if np.any(np.isnan(v)):
        raise ModelError(f"{name} has NaN entries")
    v.setflags(write=False)
    return v


def is_stabilizable(A, B):
    """PBH test: ``rank [A - lam I, B] = n`` at every eigenvalue with Re >= 0."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if lam.real < -PBH_EIG_TOL:
            continue
        M = np.hstack([A - lam * np.eye(n), B.astype(complex)])
        s = np.linalg.svd(M, compute_uv=False)
        tol = PBH_RANK_RTOL * max(np.linalg.norm(M, 2), 1.0)
        if np.sum(s > tol) < n:
            return False
    return True


@dataclass(frozen=True, eq=False)
class Plant:
    """Open-loop LTI plant with regulated and limited outputs.

    All quantities are in radians / seconds / g. The toolkit requires as many
    regulated and limited outputs as control inputs.
    """

    A_p: np.ndarray
    B_p: np.ndarray
    C_p_reg: np.ndarray
    D_p_reg: np.ndarray
    C_p_lim: np.ndarray
    state_labels: tuple = ()
    input_labels: tuple = ()
    reg_labels: tuple = ()
    lim_labels: tuple = ()
    state_units: tuple = ()
    input_units: tuple = ()
    reg_units: tuple = ()
    lim_units: tuple = ()

    def __post_init__(self):
        A_p = _mat(self.A_p, "A_p")
        n_p = A_p.shape[0]
        if A_p.shape != (n_p, n_p):
            raise ModelError(f"A_p must be square, got {A_p.shape}")
        B_p = _mat(self.B_p, "B_p")
        if B_p.shape[0] != n_p:
            raise ModelError(f"B_p has {B_p.shape[0]} rows, expected {n_p}")
        m = B_p.shape[1]
        C_reg = _mat(self.C_p_reg, "C_p_reg")
        C_lim = _mat(self.C_p_lim, "C_p_lim")
        for M, name in ((C_reg, "C_p_reg"), (C_lim, "C_p_lim")):
            if M.shape[1] != n_p:
                raise ModelError(f"{name} has {M.shape[1]} columns, expected {n_p}")
            if M.shape[0] != m:
                raise ModelError(
                    f"{name} has {M.shape[0]} outputs but the plant has {m} inputs; "
                    "regulated and limited outputs must match the input count"
                )
        D_reg = _mat(self.D_p_reg, "D_p_reg", (m, m))
        for name, M in (("A_p", A_p), ("B_p", B_p), ("C_p_reg", C_reg),
                        ("D_p_reg", D_reg), ("C_p_lim", C_lim)):
            object.__setattr__(self, name, M)
        defaults = {
            "state_labels": [f"x{i}" for i in range(n_p)],
            "input_labels": [f"u{i}" for i in range(m)],
            "reg_labels": [f"y{i}" for i in range(m)],
            "lim_labels": [f"z{i}" for i in range(m)],
        }
        sizes = {"state": n_p, "input": m, "reg": m, "lim": m}
        for kind, size in sizes.items():
            labels = tuple(getattr(self, f"{kind}_labels")) or tuple(defaults[f"{kind}_labels"])
            units = tuple(getattr(self, f"{kind}_units")) or ("-",) * size
            if len(labels) != size or len(units) != size:
                raise ModelError(f"{kind} labels/units must have {size} entries")
            object.__setattr__(self, f"{kind}_labels", labels)
            object.__setattr__(self, f"{kind}_units", units)
        if not is_stabilizable(A_p, B_p):
            raise ModelError("(A_p, B_p) is not stabilizable")

    @property
    def n_p(self):
        return self.A_p.shape[0]

    @property
    def m(self):
        return self.B_p.shape[1]


@dataclass(frozen=True, eq=False)
class ConstraintBox:
    """Component-wise bounds on control inputs and limited outputs.

    Output bounds may be infinite, which switches those channels off.
    """

    u_min: np.ndarray
    u_max: np.ndarray
    z_min: np.ndarray
    z_max: np.ndarray

    def __post_init__(self):
        m = np.size(self.u_min)
        for name in ("u_min", "u_max", "z_min", "z_max"):
            object.__setattr__(self, name, _vec(getattr(self, name), name, m))
        if np.any(~np.isfinite(self.u_min)) or np.any(~np.isfinite(self.u_max)):
            raise ModelError("input bounds must be finite")
        if np.any(self.u_min >= self.u_max):
            raise ModelError("u_min must be strictly below u_max component-wise")
        if np.any(self.z_min >= self.z_max):
            raise ModelError("z_min must be strictly below z_max component-wise")

    @property
    def m(self):
        return self.u_min.size

    @property
    def y_min(self):
        return np.concatenate([self.u_min, self.z_min])

    @property
    def y_max(self):
        return np.concatenate([self.u_max, self.z_max])


@dataclass(frozen=True, eq=False)
class ServoGains:
    """PI servo gains; the baseline law is ``u_bl = -K_I e_yI - K_P x_p``."""

    K_I: np.ndarray
    K_P: np.ndarray

    def __post_init__(self):
        K_I = _mat(self.K_I, "K_I")
        m = K_I.shape[0]
        if K_I.shape != (m, m):
            raise ModelError(f"K_I must be square, got {K_I.shape}")
        K_P = _mat(self.K_P, "K_P")
        if K_P.shape[0] != m:
            raise ModelError(f"K_P has {K_P.shape[0]} rows, expected {m}")
        if np.linalg.cond(K_I) > GAIN_COND_MAX:
            raise ModelError("K_I is numerically singular")
        object.__setattr__(self, "K_I", K_I)
        object.__setattr__(self, "K_P", K_P)

    @property
    def K_x(self):
        return np.hstack([self.K_I, self.K_P])

    @classmethod
    def from_K(cls, K, m):
        K = np.asarray(K, dtype=float)
        return cls(K[:, :m], K[:, m:])


@dataclass(frozen=True, eq=False)
class ExtendedSystem:
    """Integrator-augmented open loop with its limited-output map.

    ``A`` is n x n and ``B`` is n x 2m with ``n = n_p + m``; the first m
    columns of ``B`` carry ``v - y_cmd`` and the last m carry ``u``.
    """

    plant: Plant
    gains: ServoGains
    box: ConstraintBox
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    C_lim: np.ndarray = field(repr=False)

    @property
    def m(self):
        return self.plant.m

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def B_v(self):
        return self.B[:, : self.m]

    @property
    def B_u(self):
        return self.B[:, self.m:]

    @property
    def y_lim_min(self):
        return self.box.y_min

    @property
    def y_lim_max(self):
        return self.box.y_max


def extended_matrices(plant):
    """Open-loop extended ``(A, B)`` without reference to gains."""
    m, n_p = plant.m, plant.n_p
    n = n_p + m
    A = np.zeros((n, n))
    A[:m, m:] = plant.C_p_reg
    A[m:, m:] = plant.A_p
    B = np.zeros((n, 2 * m))
    B[:m, :m] = np.eye(m)
    B[:m, m:] = plant.D_p_reg
    B[m:, m:] = plant.B_p
    return A, B


def build_extended(plant, gains, box):
    m, n_p = plant.m, plant.n_p
    if gains.K_I.shape != (m, m) or gains.K_P.shape != (m, n_p):
        raise ModelError(
            f"gain shapes {gains.K_I.shape}/{gains.K_P.shape} do not match plant (m={m}, n_p={n_p})"
        )
    if box.m != m:
        raise ModelError(f"constraint box has {box.m} channels, plant has {m} inputs")
    A, B = extended_matrices(plant)
    C_lim = np.zeros((2 * m, n_p + m))
    C_lim[:m, :m] = -gains.K_I
    C_lim[:m, m:] = -gains.K_P
    C_lim[m:, m:] = plant.C_p_lim
    for M in (A, B, C_lim):
        M.setflags(write=False)
    return ExtendedSystem(plant, gains, box, A, B, C_lim)


def eval_outputs(plant, x_p, u):
    """Regulated and limited outputs ``(y_reg, z_lim)`` for plant state and input."""
    x_p = np.asarray(x_p, dtype=float)
    u = np.asarray(u, dtype=float)
    return plant.C_p_reg @ x_p + plant.D_p_reg @ u, plant.C_p_lim @ x_p


def constraint_residuals(ext, x):
    """``(h_min, h_max)``; the state is admissible iff both are <= 0 everywhere."""
    y = ext.C_lim @ np.asarray(x, dtype=float)
    return ext.y_lim_min - y, y - ext.y_lim_max


def split_state(ext, x):
    """``(e_yI, x_p)`` views of an extended state."""
    x = np.asarray(x)
    return x[..., : ext.m], x[..., ext.m:]
