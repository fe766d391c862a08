"""Offline synthesis: LQR PI gains and the constraint-augmentation matrices.

Each limited channel ``i`` gets a stable polynomial ``phi_i(s)`` of order
equal to its relative degree. Applying ``phi_i`` to the channel output turns
the box constraints into conditions that are affine in the augmentation
signals ``[v; w]``:

    Y_lim = H_x x + H_u ([-y_cmd; u_bl] + [v; w])

with ``H_x`` the state sensitivity, ``H_u`` the control sensitivity and
``alpha_pi`` the diagonal of zero-order polynomial coefficients.
"""

from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import DesignError, NumericsError
from .model import ServoGains, extended_matrices

RELDEG_TOL = 1e-9
HU_BLOCK_ATOL = 1e-10
HU_COND_MAX = 1e12
KI_COND_MAX = 1e10


@dataclass(frozen=True, eq=False)
class PolynomialSpec:
    """Real negative roots of each channel's stable polynomial."""

    roots: tuple

    def __post_init__(self):
        roots = tuple(tuple(float(r) for r in np.atleast_1d(ch)) for ch in self.roots)
        for i, ch in enumerate(roots):
            if not ch:
                raise DesignError(f"channel {i}: empty root list")
            if any(not np.isfinite(r) or r >= 0 for r in ch):
                raise DesignError(f"channel {i}: roots must be real and strictly negative, got {ch}")
        object.__setattr__(self, "roots", roots)

    @classmethod
    def from_alpha(cls, alpha):
        """First-order polynomials ``s + alpha_i``."""
        return cls(tuple((-float(a),) for a in alpha))

    @property
    def orders(self):
        return tuple(len(ch) for ch in self.roots)

    def coefficients(self, i):
        """Coefficients ``c_i0 .. c_ir`` of ``prod_j (s - lambda_ij)``, ascending."""
        return np.poly(self.roots[i])[::-1].copy()

    @property
    def alpha(self):
        return np.array([np.prod([-r for r in ch]) for ch in self.roots])


@dataclass(frozen=True, eq=False)
class AugmentationDesign:
    """Sensitivity matrices of the constraint augmentation."""

    r: tuple
    H_x: np.ndarray
    H_u: np.ndarray
    H_u_inv: np.ndarray
    H_w: np.ndarray
    alpha_pi: np.ndarray
    roots: tuple = ()
    H_u_cond: float = field(default=np.nan)

    @property
    def alpha_matrix(self):
        return np.diag(self.alpha_pi)


def lqr_pi_design(plant, Q, R):
    """LQR PI gains on the integrator-augmented plant.

    Only the control columns of the extended input matrix are LQR decision
    variables; the command/anti-windup channel is not.

    Parameters
    ----------
    plant : Plant
    Q : (n, n) or (n,) array
        State weight on ``[e_yI; x_p]``; a vector is taken as the diagonal.
    R : (m, m) or (m,) array
        Control weight.
    """
    A, B = extended_matrices(plant)
    m = plant.m
    B_u = B[:, m:]
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    Q = np.diag(Q) if Q.ndim == 1 else Q
    R = np.diag(R) if R.ndim == 1 else R
    if Q.shape != A.shape:
        raise DesignError(f"Q must be {A.shape}, got {Q.shape}")
    if R.shape != (m, m):
        raise DesignError(f"R must be {(m, m)}, got {R.shape}")
    try:
        _, K = numerics.care_solve(A, B_u, Q, R)
    except NumericsError as exc:
        raise DesignError(f"LQR PI design failed: {exc}") from exc
    K_I = K[:, :m]
    if np.linalg.cond(K_I) > KI_COND_MAX:
        raise DesignError("integral gain K_I is numerically singular")
    return ServoGains(K_I, K[:, m:])


def relative_degree(ext):
    """Per-channel relative degree of ``y_lim`` with respect to ``[v; w]``.

    A row ``(C_lim)_i A^(k-1) B`` counts as zero when its norm is below
    ``RELDEG_TOL * ||C_lim|| * ||A||^(k-1) * ||B||``.
    """
    A, B, C = ext.A, ext.B, ext.C_lim
    n = ext.n
    nA = max(np.linalg.norm(A, 2), 1.0)
    nB = np.linalg.norm(B, 2)
    nC = np.linalg.norm(C, 2)
    degrees = []
    for i in range(C.shape[0]):
        row = C[i]
        for k in range(1, n + 1):
            if np.linalg.norm(row @ B) > RELDEG_TOL * nC * nA ** (k - 1) * nB:
                degrees.append(k)
                break
            row = row @ A
        else:
            raise DesignError(f"limited channel {i} has no finite relative degree")
    m = ext.m
    if any(d != 1 for d in degrees[:m]):
        raise DesignError(f"input constraint channels must have relative degree one, got {degrees[:m]}")
    return tuple(degrees)


def h_u_block_form(plant, gains, H_w):
    """Closed-form control sensitivity of a PI servo-controller."""
    m = plant.m
    top_right = -gains.K_I @ plant.D_p_reg - gains.K_P @ plant.B_p
    return np.block([[-gains.K_I, top_right], [np.zeros((m, m)), H_w]])


def build_sensitivities(ext, gains, poly, r=None):
    """Assemble ``H_x``, ``H_u``, ``H_w`` and ``alpha_pi``.

    ``H_u`` is built row by row and cross-checked against the PI block form
    before it is inverted.
    """
    plant = ext.plant
    m, n = ext.m, ext.n
    r = relative_degree(ext) if r is None else tuple(r)
    if len(poly.roots) != 2 * m:
        raise DesignError(f"need {2 * m} root lists, got {len(poly.roots)}")
    if poly.orders != r:
        raise DesignError(f"polynomial orders {poly.orders} do not match relative degrees {r}")

    A, B, C = ext.A, ext.B, ext.C_lim
    I = np.eye(n)
    H_x = np.empty((2 * m, n))
    H_u = np.empty((2 * m, 2 * m))
    for i in range(2 * m):
        row = C[i].copy()
        for lam in poly.roots[i]:
            row = row @ (A - lam * I)
        H_x[i] = row
        H_u[i] = C[i] @ np.linalg.matrix_power(A, r[i] - 1) @ B

    H_w = np.vstack([
        plant.C_p_lim[j] @ np.linalg.matrix_power(plant.A_p, r[m + j] - 1) @ plant.B_p
        for j in range(m)
    ])
    block = h_u_block_form(plant, gains, H_w)
    if not np.allclose(H_u, block, rtol=0.0, atol=HU_BLOCK_ATOL * max(1.0, np.abs(block).max())):
        raise DesignError("row-built H_u disagrees with the PI block form")

    cond = float(np.linalg.cond(H_u))
    if not np.isfinite(cond) or cond > HU_COND_MAX:
        raise DesignError(f"H_u is singular (condition {cond:.3g})")
    H_u_inv = np.linalg.inv(H_u)
    for M in (H_x, H_u, H_u_inv, H_w):
        M.setflags(write=False)
    return AugmentationDesign(
        r=r, H_x=H_x, H_u=H_u, H_u_inv=H_u_inv, H_w=H_w,
        alpha_pi=poly.alpha, roots=poly.roots, H_u_cond=cond,
    )


def design_record(ext, design):
    """JSON-ready dictionary of the gains and augmentation matrices."""
    g = ext.gains
    return {
        "K_I": g.K_I.tolist(),
        "K_P": g.K_P.tolist(),
        "H_x": design.H_x.tolist(),
        "H_u": design.H_u.tolist(),
        "H_u_inv": design.H_u_inv.tolist(),
        "H_w": design.H_w.tolist(),
        "alpha_pi": design.alpha_pi.tolist(),
        "relative_degrees": list(design.r),
        "roots": [list(ch) for ch in design.roots],
        "diagnostics": {
            "H_u_cond": design.H_u_cond,
            "K_I_cond": float(np.linalg.cond(g.K_I)),
            "closed_loop_abscissa": numerics.spectral_abscissa(ext.A - ext.B_u @ g.K_x),
        },
    }


def design_from_record(record):
    """Inverse of :func:`design_record` for the gains and augmentation."""
    gains = ServoGains(np.array(record["K_I"]), np.array(record["K_P"]))
    H_u = np.array(record["H_u"])
    design = AugmentationDesign(
        r=tuple(record["relative_degrees"]),
        H_x=np.array(record["H_x"]),
        H_u=H_u,
        H_u_inv=np.array(record["H_u_inv"]),
        H_w=np.array(record["H_w"]),
        alpha_pi=np.array(record["alpha_pi"]),
        roots=tuple(tuple(ch) for ch in record["roots"]),
        H_u_cond=record["diagnostics"]["H_u_cond"],
    )
    return gains, design
