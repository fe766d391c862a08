"""Stability margins at the plant-input breakpoint.

For a constant activity pattern ``delta`` the switched closed loop is linear.
Cutting it at the control input gives the loop gain

    L_u(s) = K_eff (sI - A_eff)^-1 B_u

from which singular-value (MIMO) and loop-at-a-time (SISO) margins follow.
"""

from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import DesignError, ModelError, SingularResolventError

GRID_MIN = 1e-3
GRID_MAX = 1e4
GRID_POINTS = 4000
BLOCK_FORM_ATOL = 1e-10
STABILITY_MARGIN = 1e-8
OPEN_LOOP_ATOL = 1e-14
GOLDEN_ITERS = 60
REFINE_MINIMA = 6
BISECT_ITERS = 80

TABLE_PATTERNS = (
    ("none", ()),
    ("aileron", (0,)),
    ("rudder", (1,)),
    ("both", (0, 1)),
)


@dataclass(frozen=True)
class DeltaPattern:
    """Constant 0/1 activity flags; input channels first, then limited outputs."""

    bits: tuple

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ModelError(f"pattern flags must be 0 or 1, got {bits}")
        if len(bits) % 2:
            raise ModelError("pattern needs an even number (2m) of flags")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def parse(cls, text, m=None):
        text = text.strip()
        if not text or any(c not in "01" for c in text):
            raise ModelError(f"pattern must be a string of 0/1 characters, got {text!r}")
        if m is not None and len(text) != 2 * m:
            raise ModelError(f"pattern {text!r} must have {2 * m} flags")
        return cls(tuple(int(c) for c in text))

    @classmethod
    def from_inputs(cls, channels, m):
        return cls(tuple(int(i in channels) for i in range(2 * m)))

    @property
    def matrix(self):
        return np.diag(np.array(self.bits, dtype=float))

    def __str__(self):
        return "".join(str(b) for b in self.bits)


@dataclass(frozen=True, eq=False)
class LoopGainModel:
    """State-space data of the loop gain; ``channels`` selects the breakpoint inputs."""

    K_eff: np.ndarray
    A_eff: np.ndarray
    B_u: np.ndarray
    channels: tuple = None
    pattern: DeltaPattern = None
    delta_v: np.ndarray = field(default=None, repr=False)
    delta_w: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.channels is None:
            object.__setattr__(self, "channels", tuple(range(self.K_eff.shape[0])))

    @property
    def closed_loop(self):
        return self.A_eff - self.B_u @ self.K_eff

    @property
    def is_open_loop(self):
        K = self.K_eff[list(self.channels)]
        return K.size == 0 or np.abs(K).max() <= OPEN_LOOP_ATOL * max(1.0, np.abs(self.A_eff).max())


@dataclass(frozen=True)
class SisoMargin:
    channel: int
    gm_db: tuple
    pm_deg: float
    phase_crossings: tuple = ()
    gain_crossings: tuple = ()
    degenerate: bool = False


@dataclass
class MarginReport:
    pattern: str
    treatment: str
    alpha: float | None
    beta: float | None
    gm_db: tuple | None
    pm_deg: float | None
    siso: list
    stable: bool | None
    open_loop: bool = False
    degenerate: bool = False
    intervals: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    abscissa: float | None = None
    note: str = ""

    def as_dict(self):
        return {
            "pattern": self.pattern,
            "treatment": self.treatment,
            "alpha": self.alpha,
            "beta": self.beta,
            "gm_db": None if self.gm_db is None else list(self.gm_db),
            "pm_deg": None if self.pm_deg is None else [-self.pm_deg, self.pm_deg],
            "siso": [
                {
                    "channel": s.channel,
                    "gm_db": list(s.gm_db),
                    "pm_deg": [-s.pm_deg, s.pm_deg],
                    "degenerate": s.degenerate,
                }
                for s in self.siso
            ],
            "stable": self.stable,
            "open_loop": self.open_loop,
            "degenerate": self.degenerate,
            "intervals": self.intervals,
            "grid": self.grid,
            "closed_loop_abscissa": self.abscissa,
            "note": self.note,
        }


def default_grid(points=GRID_POINTS):
    return np.logspace(np.log10(GRID_MIN), np.log10(GRID_MAX), points)


def activity_gains(ext, design, pattern):
    """``(delta_v, delta_w, G)`` with ``[v; w] = [delta_v; delta_w] G x`` in the active region.

    ``G = H_u [0; I] K_x - H_x`` is the state gain of the active constraint
    offsets; constant command terms do not enter the loop gain.
    """
    m = ext.m
    if len(pattern.bits) != 2 * m:
        raise ModelError(f"pattern has {len(pattern.bits)} flags, expected {2 * m}")
    K = ext.gains.K_x
    HinvD = design.H_u_inv @ pattern.matrix
    delta_v, delta_w = HinvD[:m], HinvD[m:]
    G = design.H_u[:, m:] @ K - design.H_x
    return delta_v, delta_w, G


def _block_forms(ext, design, pattern):
    """PI-structured expressions of ``delta_v`` and ``delta_w``."""
    plant, gains = ext.plant, ext.gains
    try:
        H_w_inv = np.linalg.inv(design.H_w)
    except np.linalg.LinAlgError as exc:
        raise DesignError("H_w is singular") from exc
    if not np.all(np.isfinite(H_w_inv)) or np.linalg.cond(design.H_w) > 1e12:
        raise DesignError("H_w is singular")
    m = ext.m
    M = gains.K_I @ plant.D_p_reg + gains.K_P @ plant.B_p
    K_I_inv = np.linalg.inv(gains.K_I)
    D = pattern.matrix
    dv = -K_I_inv @ np.hstack([np.eye(m), M @ H_w_inv]) @ D
    dw = np.hstack([np.zeros((m, m)), H_w_inv]) @ D
    return dv, dw


def build_loop_model(ext, gains, design, pattern):
    """Loop gain of the augmented closed loop for a fixed activity pattern.

    In the active region ``v = delta_v G x`` and ``w = delta_w G x`` so

        K_eff = K_x - delta_w G,   A_eff = A + B_v delta_v G.
    """
    if gains is not None and not np.array_equal(gains.K_x, ext.gains.K_x):
        raise ModelError("gains differ from those the extended system was built with")
    dv, dw, G = activity_gains(ext, design, pattern)
    dv_b, dw_b = _block_forms(ext, design, pattern)
    scale = max(1.0, np.abs(dv).max(), np.abs(dw).max())
    if not (np.allclose(dv, dv_b, rtol=0, atol=BLOCK_FORM_ATOL * scale)
            and np.allclose(dw, dw_b, rtol=0, atol=BLOCK_FORM_ATOL * scale)):
        raise DesignError("activity gains disagree with their PI block forms")
    K_eff = ext.gains.K_x - dw @ G
    A_eff = ext.A + ext.B_v @ dv @ G
    if not (np.all(np.isfinite(K_eff)) and np.all(np.isfinite(A_eff))):
        raise DesignError("loop model is not finite")
    return LoopGainModel(K_eff=K_eff, A_eff=A_eff, B_u=ext.B_u.copy(), pattern=pattern,
                         delta_v=dv, delta_w=dw)


def baseline_loop_model(ext):
    m = ext.m
    return LoopGainModel(K_eff=ext.gains.K_x.copy(), A_eff=ext.A.copy(), B_u=ext.B_u.copy(),
                         pattern=DeltaPattern((0,) * (2 * m)))


def loop_gain_at(model, omega):
    """``L_u(j omega)`` restricted to the breakpoint channels."""
    ch = list(model.channels)
    X = numerics.freq_response_solve(model.A_eff, model.B_u[:, ch], omega)
    return model.K_eff[ch] @ X


def loop_gain_grid(model, grid):
    """Batched loop gain; returns ``(L, ok)`` with ``ok`` false at singular points."""
    grid = np.asarray(grid, dtype=float)
    ch = list(model.channels)
    n = model.A_eff.shape[0]
    M = 1j * grid[:, None, None] * np.eye(n) - model.A_eff
    cond = np.linalg.cond(M)
    ok = np.isfinite(cond) & (cond <= numerics.RESOLVENT_COND_MAX)
    L = np.full((grid.size, len(ch), len(ch)), np.nan + 0j)
    if np.any(ok):
        B = np.broadcast_to(model.B_u[:, ch].astype(complex), (int(ok.sum()), n, len(ch)))
        X = np.linalg.solve(M[ok], B)
        L[ok] = model.K_eff[ch] @ X
    return L, ok


def _sigma_ab(L):
    """``sigma_min(I + L)`` and ``sigma_min(I + L^-1)`` for a stack of loop gains."""
    k = L.shape[-1]
    I = np.eye(k)
    S = I + L
    sa = np.linalg.svd(S, compute_uv=False).min(axis=-1)
    # sigma_min(I + L^-1) = 1 / sigma_max(L (I + L)^-1); finite even when L is singular
    T = np.swapaxes(np.linalg.solve(np.swapaxes(S, -1, -2), np.swapaxes(L, -1, -2)), -1, -2)
    smax = np.linalg.svd(T, compute_uv=False).max(axis=-1)
    with np.errstate(divide="ignore"):
        sb = np.where(smax > 0, 1.0 / smax, np.inf)
    return sa, sb


def _golden_min(f, a, b, iters=GOLDEN_ITERS):
    """Minimum of a unimodal ``f`` on ``[a, b]`` by golden-section search."""
    g = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return min((fc, c), (fd, d))


def _refined_min(values, grid, ok, f):
    """Grid minimum refined by golden sections around the lowest local minima."""
    idx = np.flatnonzero(ok & np.isfinite(values))
    if idx.size == 0:
        return np.inf, np.nan
    v = values[idx]
    best_k = int(np.argmin(v))
    best = (float(v[best_k]), float(grid[idx[best_k]]))
    interior = [k for k in range(1, v.size - 1) if v[k] <= v[k - 1] and v[k] <= v[k + 1]]
    interior.sort(key=lambda k: v[k])
    logw = np.log10(grid[idx])
    for k in interior[:REFINE_MINIMA]:
        def h(lw):
            val = f(10.0 ** lw)
            return val if np.isfinite(val) else np.inf
        val, lw = _golden_min(h, logw[k - 1], logw[k + 1])
        if val < best[0]:
            best = (float(val), float(10.0 ** lw))
    return best


def _db(x):
    if x <= 0:
        return -np.inf
    if not np.isfinite(x):
        return np.inf
    return float(20.0 * np.log10(x))


def _pm_from(x):
    """Phase bound ``2 asin(x/2)`` in degrees, capped at 180 for ``x >= 2``."""
    return float(np.degrees(2.0 * np.arcsin(min(x, 2.0) / 2.0)))


def envelope(alpha, beta):
    """Outer envelope of the return-difference and stability-robustness bounds.

    Returns ``(gm_db, pm_deg, intervals)``. An infinite ``beta`` (singular
    loop gain) contributes no phase bound.
    """
    a_lo, a_hi = 1.0 / (1.0 + alpha), (1.0 / (1.0 - alpha) if alpha < 1.0 else np.inf)
    b_lo, b_hi = 1.0 - beta, 1.0 + beta
    pm_a = _pm_from(alpha)
    pm_b = _pm_from(beta) if np.isfinite(beta) else None
    gm = (_db(min(a_lo, b_lo)), _db(max(a_hi, b_hi)))
    pm = max(pm_a, pm_b) if pm_b is not None else pm_a
    intervals = {
        "return_difference": {"gm_db": [_db(a_lo), _db(a_hi)], "pm_deg": pm_a},
        "stability_robustness": {"gm_db": [_db(b_lo), _db(b_hi)], "pm_deg": pm_b},
    }
    return gm, pm, intervals


def _grid_meta(grid):
    return {"min": float(grid[0]), "max": float(grid[-1]), "points": int(grid.size)}


def sigma_minima(model, grid=None):
    """``(alpha, w_alpha, beta, w_beta, skipped)`` over the grid with refinement."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    L, ok = loop_gain_grid(model, grid)
    sa = np.full(grid.size, np.nan)
    sb = np.full(grid.size, np.nan)
    if np.any(ok):
        sa[ok], sb[ok] = _sigma_ab(L[ok])

    def point(w):
        try:
            Lw = loop_gain_at(model, w)
        except SingularResolventError:
            return np.nan, np.nan
        a, b = _sigma_ab(Lw[None])
        return a[0], b[0]

    alpha, w_a = _refined_min(sa, grid, ok, lambda w: point(w)[0])
    beta, w_b = _refined_min(sb, grid, ok, lambda w: point(w)[1])
    return alpha, w_a, beta, w_b, int((~ok).sum())


def mimo_margins(model, grid=None, treatment="augmentation", with_siso=True):
    """Singular-value margins of the loop gain.

    Margins are reported only when ``A_eff - B_u K_eff`` is Hurwitz; an
    unstable pattern is flagged degenerate with zero-width margins. A loop
    gain that vanishes identically is flagged ``open_loop``.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    pattern = "" if model.pattern is None else str(model.pattern)
    Acl = model.closed_loop
    abscissa = numerics.spectral_abscissa(Acl)
    stable = numerics.is_hurwitz(Acl, margin=STABILITY_MARGIN)
    meta = _grid_meta(grid)
    if model.is_open_loop:
        gm, pm, intervals = envelope(1.0, np.inf)
        return MarginReport(
            pattern=pattern, treatment=treatment, alpha=1.0, beta=np.inf, gm_db=gm, pm_deg=pm,
            siso=[], stable=stable, open_loop=True, degenerate=True, intervals=intervals,
            grid=meta, abscissa=abscissa,
            note="loop gain vanishes: plant runs open loop; margins are those of L = 0",
        )
    if not stable:
        return MarginReport(
            pattern=pattern, treatment=treatment, alpha=None, beta=None, gm_db=(0.0, 0.0),
            pm_deg=0.0, siso=[], stable=False, degenerate=True, grid=meta, abscissa=abscissa,
            note=("closed loop marginally stable (pole on the imaginary axis); margins undefined"
                  if abs(abscissa) <= STABILITY_MARGIN else
                  "closed loop not asymptotically stable; margins undefined"),
        )
    alpha, w_a, beta, w_b, skipped = sigma_minima(model, grid)
    gm, pm, intervals = envelope(alpha, beta)
    intervals["return_difference"]["omega"] = w_a
    intervals["stability_robustness"]["omega"] = w_b
    meta["skipped"] = skipped
    siso = [siso_margins(model, i, grid) for i in range(len(model.channels))] if with_siso else []
    return MarginReport(
        pattern=pattern, treatment=treatment, alpha=float(alpha), beta=float(beta), gm_db=gm,
        pm_deg=pm, siso=siso, stable=True, intervals=intervals, grid=meta, abscissa=abscissa,
    )


def _siso_loop(model, channel, omega):
    """Scalar loop seen at breakpoint ``channel`` with the other loops closed."""
    L = loop_gain_at(model, omega)
    i = channel
    o = [j for j in range(L.shape[0]) if j != i]
    l = L[i, i]
    if o:
        l = l - L[i, o] @ np.linalg.solve(np.eye(len(o)) + L[np.ix_(o, o)], L[o, i])
    return complex(l)


def _bisect_roots(f, grid, values):
    """Roots of a real ``f`` at sign changes of ``values`` on ``grid`` (log bisection)."""
    roots = []
    s = np.sign(values)
    for k in np.flatnonzero(np.isfinite(values[:-1]) & np.isfinite(values[1:]) & (s[:-1] * s[1:] < 0)):
        a, b = np.log10(grid[k]), np.log10(grid[k + 1])
        fa = values[k]
        for _ in range(BISECT_ITERS):
            c = 0.5 * (a + b)
            fc = f(10.0 ** c)
            if np.sign(fc) == np.sign(fa):
                a, fa = c, fc
            else:
                b = c
        roots.append(10.0 ** (0.5 * (a + b)))
    return roots


def siso_margins(model, channel, grid=None):
    """Loop-at-a-time gain and phase margins of one input channel.

    Gain margins come from phase crossings (``l`` real and negative), phase
    margins from unity-gain crossings. Missing crossings give unbounded
    margins.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    ls = np.full(grid.size, np.nan + 0j)
    for k, w in enumerate(grid):
        try:
            ls[k] = _siso_loop(model, channel, w)
        except (SingularResolventError, np.linalg.LinAlgError):
            pass
    mag = np.abs(ls)
    if np.all(np.nan_to_num(mag) <= OPEN_LOOP_ATOL):
        return SisoMargin(channel, (-np.inf, np.inf), np.inf, degenerate=True)

    phase_w = _bisect_roots(lambda w: _siso_loop(model, channel, w).imag, grid, ls.imag)
    lo, hi = -np.inf, np.inf
    phase_crossings = []
    for w in phase_w:
        l = _siso_loop(model, channel, w)
        if l.real >= 0:
            continue
        k_db = _db(1.0 / abs(l))
        phase_crossings.append(float(w))
        if k_db > 0:
            hi = min(hi, k_db)
        elif k_db < 0:
            lo = max(lo, k_db)
        else:
            lo = hi = 0.0

    gain_w = _bisect_roots(lambda w: abs(_siso_loop(model, channel, w)) - 1.0, grid, mag - 1.0)
    pm = np.inf
    for w in gain_w:
        ph = np.degrees(abs(np.angle(_siso_loop(model, channel, w))))
        pm = min(pm, 180.0 - ph)
    return SisoMargin(channel, (lo, hi), float(pm), tuple(phase_crossings),
                      tuple(float(w) for w in gain_w))


def saturation_model(ext, saturated):
    """Loop model with the saturated input rows of ``K_x`` zeroed.

    The breakpoint keeps only the unsaturated channels: a frozen actuator
    command no longer closes a loop.
    """
    m = ext.m
    saturated = sorted(set(int(i) for i in saturated))
    if any(i < 0 or i >= m for i in saturated):
        raise ModelError(f"saturated channels must lie in 0..{m - 1}")
    K = ext.gains.K_x.copy()
    K[saturated] = 0.0
    remaining = tuple(i for i in range(m) if i not in saturated)
    return LoopGainModel(K_eff=K, A_eff=ext.A.copy(), B_u=ext.B_u.copy(), channels=remaining,
                         pattern=DeltaPattern.from_inputs(saturated, m))


def saturation_margins(ext, gains, saturated, grid=None):
    if gains is not None and not np.array_equal(gains.K_x, ext.gains.K_x):
        raise ModelError("gains differ from those the extended system was built with")
    model = saturation_model(ext, saturated)
    if not model.channels:
        # every actuator frozen: loop gain is identically zero
        model = LoopGainModel(K_eff=np.zeros_like(ext.gains.K_x), A_eff=model.A_eff,
                              B_u=model.B_u, pattern=model.pattern)
    report = mimo_margins(model, grid, treatment="saturation")
    report.siso = [
        SisoMargin(model.channels[s.channel], s.gm_db, s.pm_deg, s.phase_crossings,
                   s.gain_crossings, s.degenerate)
        for s in report.siso
    ]
    return report


def table2_report(ext, gains, design, grid=None):
    """Margins for each input-activity pattern under three treatments.

    Baseline margins exist only for the unconstrained pattern: with an
    active constraint the baseline loop violates it.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    m = ext.m
    reports = []
    for name, channels in TABLE_PATTERNS:
        if any(c >= m for c in channels):
            continue
        pattern = DeltaPattern.from_inputs(channels, m)
        if channels:
            reports.append(MarginReport(
                pattern=str(pattern), treatment="baseline", alpha=None, beta=None, gm_db=None,
                pm_deg=None, siso=[], stable=None, note="N/A (constraint violated)",
            ))
        else:
            base = mimo_margins(baseline_loop_model(ext), grid, treatment="baseline")
            reports.append(base)
        reports.append(saturation_margins(ext, gains, channels, grid))
        model = build_loop_model(ext, gains, design, pattern)
        reports.append(mimo_margins(model, grid, treatment="augmentation"))
        for r in reports[-3:]:
            r.note = f"{name}: {r.note}" if r.note else name
    return reports
