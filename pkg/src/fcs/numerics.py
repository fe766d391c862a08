"""Small dense linear-algebra kernel.

Everything here targets the tiny systems that show up in flight-control
design (n <= 16), so clarity wins over asymptotic cost: the Lyapunov solver
vectorizes with Kronecker products and the Riccati solver is a plain
Kleinman-Newton iteration built on top of it.
"""

import numpy as np

from .errors import NumericsError, SingularResolventError

LYAPUNOV_RTOL = 1e-10
CARE_RTOL = 1e-9
CARE_MAX_ITER = 100
RESOLVENT_COND_MAX = 1e12
SYMMETRY_ATOL = 1e-12


def _square(M, name="M"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NumericsError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NumericsError(f"{name} has non-finite entries")
    return M


def _sym(M):
    return 0.5 * (M + M.T)


def spectrum(M):
    """Eigenvalues of a real square matrix.

    Sorted by real part, ties broken by imaginary part. Complex pairs are
    snapped to exact conjugates so the result is closed under conjugation.
    """
    M = _square(M)
    if M.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    try:
        lam = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:  # LAPACK QR iteration did not converge
        raise NumericsError(f"eigenvalue iteration failed: {exc}") from exc
    lam = np.asarray(lam, dtype=complex)
    # real input: pair each eigenvalue with a conjugate partner
    scale = max(1.0, np.abs(lam).max())
    tiny = 1e-12 * scale
    lam = np.where(np.abs(lam.imag) <= tiny, lam.real + 0j, lam)
    upper = lam[lam.imag > 0]
    real = lam[lam.imag == 0]
    lam = np.concatenate([real, upper, upper.conj()])
    order = np.lexsort((lam.imag, lam.real))
    return lam[order]


def spectral_abscissa(M):
    """Largest real part among the eigenvalues of ``M``."""
    lam = spectrum(M)
    return float(lam.real.max()) if lam.size else -np.inf


def is_hurwitz(M, margin=0.0):
    """True iff every eigenvalue of ``M`` has real part below ``-margin``."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    return spectral_abscissa(M) < -margin


def lyapunov_solve(A, Q):
    """Solve ``A.T @ P + P @ A + Q = 0`` for symmetric ``P``.

    Parameters
    ----------
    A : (n, n) array
        Hurwitz state matrix.
    Q : (n, n) array
        Symmetric right-hand side.

    Returns
    -------
    P : (n, n) ndarray
        Symmetric solution. The relative residual is checked against
        ``LYAPUNOV_RTOL``; one step of iterative refinement is applied.
    """
    A = _square(A, "A")
    Q = _square(Q, "Q")
    n = A.shape[0]
    if Q.shape != A.shape:
        raise NumericsError(f"Q shape {Q.shape} does not match A shape {A.shape}")
    if not is_hurwitz(A):
        raise NumericsError("A is not Hurwitz; the Lyapunov equation has no unique solution")
    Q = _sym(Q)
    I = np.eye(n)
    # vec(A^T P + P A) = (I kron A^T + A^T kron I) vec(P), column-major vec
    L = np.kron(I, A.T) + np.kron(A.T, I)

    def solve(rhs):
        try:
            x = np.linalg.solve(L, -rhs.reshape(-1, order="F"))
        except np.linalg.LinAlgError as exc:
            raise NumericsError(f"Kronecker Lyapunov system is singular: {exc}") from exc
        return x.reshape(n, n, order="F")

    P = _sym(solve(Q))
    R = A.T @ P + P @ A + Q
    P = _sym(P + solve(R))
    qn = np.linalg.norm(Q)
    if qn == 0.0:
        return P
    res = np.linalg.norm(A.T @ P + P @ A + Q) / qn
    if res > LYAPUNOV_RTOL:
        raise NumericsError(f"Lyapunov residual {res:.3g} above {LYAPUNOV_RTOL:g}")
    return P


def care_residual(A, B, Q, R, P):
    """Relative residual of the continuous algebraic Riccati equation.

    Normalized by ``||Q|| + 2 ||A|| ||P|| + ||P B R^-1 B^T P||`` so that the
    measure is scale-free and well defined when ``Q = 0``.
    """
    A, B, Q, R, P = (np.asarray(X, dtype=float) for X in (A, B, Q, R, P))
    G = P @ B @ np.linalg.solve(R, B.T @ P)
    res = A.T @ P + P @ A - G + Q
    scale = np.linalg.norm(Q) + 2 * np.linalg.norm(A) * np.linalg.norm(P) + np.linalg.norm(G)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(res) / scale)


def stabilizing_gain(A, B):
    """Some gain K with ``A - B K`` Hurwitz (Bass's shifted-Lyapunov method).

    Returns zeros when A is already Hurwitz. Otherwise solves
    ``F Z + Z F^T + 2 B B^T = 0`` with ``F = -(A + s I)`` and
    ``s > max |Re lambda(A)|``, and returns ``K = B^T Z^-1``.
    """
    A = _square(A, "A")
    B = np.asarray(B, dtype=float)
    n, m = B.shape
    if is_hurwitz(A):
        return np.zeros((m, n))
    shift = 1.0 + np.abs(spectrum(A).real).max() + np.linalg.norm(A, 1) * 1e-3
    F = -(A + shift * np.eye(n))
    Z = lyapunov_solve(F.T, 2.0 * B @ B.T)
    try:
        K = np.linalg.solve(Z, B).T
    except np.linalg.LinAlgError as exc:
        raise NumericsError("stabilizing initial gain not found: (A, B) not controllable") from exc
    if not np.all(np.isfinite(K)) or not is_hurwitz(A - B @ K):
        raise NumericsError("stabilizing initial gain not found")
    return K


def care_solve(A, B, Q, R, K0=None, max_iter=CARE_MAX_ITER):
    """Stabilizing solution of ``A^T P + P A - P B R^-1 B^T P + Q = 0``.

    Kleinman-Newton iteration: starting from a stabilizing gain, each step
    solves the closed-loop Lyapunov equation
    ``(A - B K)^T P + P (A - B K) + Q + K^T R K = 0`` and updates
    ``K = R^-1 B^T P``.

    Returns
    -------
    P : (n, n) ndarray
        Symmetric positive semidefinite Riccati solution.
    K : (m, n) ndarray
        Optimal gain ``R^-1 B^T P``; ``A - B K`` is Hurwitz.
    """
    A = _square(A, "A")
    Q = _sym(_square(Q, "Q"))
    R = _sym(_square(R, "R"))
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    if B.ndim != 2 or B.shape[0] != n or R.shape[0] != B.shape[1] or Q.shape[0] != n:
        raise NumericsError("inconsistent CARE dimensions")
    if np.linalg.eigvalsh(R).min() <= 0:
        raise NumericsError("R must be positive definite")

    K = stabilizing_gain(A, B) if K0 is None else np.asarray(K0, dtype=float)
    P_prev = None
    last_step = np.inf
    for it in range(1, max_iter + 1):
        Acl = A - B @ K
        try:
            P = lyapunov_solve(Acl, Q + K.T @ R @ K)
        except NumericsError as exc:
            raise NumericsError(f"Kleinman iteration {it}: {exc}") from exc
        K = np.linalg.solve(R, B.T @ P)
        if P_prev is not None:
            step = np.linalg.norm(P - P_prev)
            # quadratic convergence ends in rounding noise; stop once it stalls
            if step <= 1e-13 * max(1.0, np.linalg.norm(P)) or (it > 5 and step >= last_step):
                break
            last_step = step
        P_prev = P
    else:
        raise NumericsError(f"Kleinman iteration did not converge in {max_iter} iterations")

    res = care_residual(A, B, Q, R, P)
    if res > CARE_RTOL:
        raise NumericsError(f"CARE residual {res:.3g} above {CARE_RTOL:g}")
    if not is_hurwitz(A - B @ K):
        raise NumericsError("CARE solution is not stabilizing")
    return P, K


def min_singular_value(M):
    M = np.asarray(M, dtype=complex)
    if not np.all(np.isfinite(M)):
        raise NumericsError("matrix has non-finite entries")
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False).min())


def freq_response_solve(A, B, omega):
    """``(j omega I - A)^-1 B`` via a complex linear solve.

    Raises :class:`SingularResolventError` when the resolvent condition
    number exceeds ``RESOLVENT_COND_MAX`` so callers can skip the point.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    M = 1j * omega * np.eye(A.shape[0]) - A
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > RESOLVENT_COND_MAX:
        raise SingularResolventError(omega, cond)
    return np.linalg.solve(M, B.astype(complex))
