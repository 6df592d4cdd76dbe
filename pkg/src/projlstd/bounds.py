"""Closed-form finite-sample quantities for LSTD(lambda)-RP.

Every function evaluates its formula exactly as written, with the
confidence level already split by the caller where a statement splits it.
Preconditions that the guarantees need (the ``D`` versus ``d`` gap, the
lower bound on ``d``) raise :class:`BoundDomainError` unless
``strict=False``; the returned report then records which ones failed.

The lower-order term ``h(n, d, delta) = O~((d/n) log(1/delta))`` has no
published constant and is never added; reports carry ``h_term_omitted``.
"""

import math
from dataclasses import asdict, dataclass, field

import mpmath


class BoundDomainError(ValueError):
    """A formula was evaluated outside the regime where it is defined or valid."""


@dataclass(frozen=True)
class MixingParams:
    """Exponential beta-mixing rate ``beta(m) <= beta0 exp(-beta1 m^kappa)``."""

    beta0: float = 1.0
    beta1: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        for name in ("beta0", "beta1", "kappa"):
            if not getattr(self, name) > 0:
                raise ValueError(f"mixing parameter {name} must be positive")


@dataclass(frozen=True)
class BoundInputs:
    n: int
    d: int
    D: int
    delta: float
    gamma: float
    lam: float
    L: float
    nu_F: float
    v_max: float
    mixing: MixingParams = field(default_factory=MixingParams)
    m_pi_f_v: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0 <= self.lam <= 1:
            raise ValueError("lambda must lie in [0, 1]")
        if self.d < 1 or self.D < 1 or self.L <= 0 or self.nu_F <= 0 or self.v_max <= 0:
            raise ValueError("d, D, L, nu_F and v_max must be positive")


@dataclass
class BoundReport:
    m_n_lambda: int
    xi: float
    eta: float
    Lambda_val: float
    I_val: float
    Upsilon_val: float
    n0: object
    estimation_bound: float
    approximation_bound: float
    total_bound: float
    hypotheses_ok: bool = True
    failed_hypotheses: tuple = ()
    h_term_omitted: bool = True

    def as_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# building blocks

def m_n_lambda(n, lam, gamma):
    """``ceil(log(n-1) / log(1/(lam gamma)))``, or 0 when ``lam = 0``."""
    n = int(n)
    if n < 2:
        raise ValueError("n must be >= 2")
    if lam == 0:
        return 0
    lg = lam * gamma
    if not 0 < lg < 1:
        raise BoundDomainError(f"lambda * gamma must lie in (0, 1), got {lg}")
    ratio = math.log(n - 1) / math.log(1.0 / lg)
    nearest = round(ratio)
    # snap float noise so exact powers (n-1 = (1/lg)^k) give k, not k+1
    if abs(ratio - nearest) <= 1e-12 * max(1.0, abs(ratio)):
        return int(nearest)
    return int(math.ceil(ratio))


def xi(n, d, delta):
    """``1 + sqrt((8/d) log(n/delta))``."""
    val = math.log(n / delta)
    if val < 0:
        raise BoundDomainError("xi needs n/delta >= 1")
    return 1.0 + math.sqrt(8.0 / d * val)


def eta_inner(d, D, delta):
    return 1.0 - math.sqrt(d / D) - math.sqrt(2.0 * math.log(2.0 / delta) / D)


def eta(d, D, delta):
    """``(1 - sqrt(d/D) - sqrt(2 log(2/delta) / D))^2``; the bracket must be positive."""
    inner = eta_inner(d, D, delta)
    if inner <= 0:
        raise BoundDomainError(
            f"eta undefined: 1 - sqrt(d/D) - sqrt(2 log(2/delta)/D) = {inner:.4g} <= 0 "
            f"(need D > d + 2 sqrt(2 d log(2/delta)) + 2 log(2/delta))")
    return inner * inner


def Lambda_fn(n, delta, mixing):
    """``log(8 n^2 / delta) + log(max(4 e^2, n beta0))``."""
    return math.log(8.0 * n * n / delta) + math.log(max(4.0 * math.e ** 2, n * mixing.beta0))


def I_fn(n, delta, mixing):
    """``32 Lambda max(Lambda / beta1, 1)^(1/kappa)``."""
    lam_val = Lambda_fn(n, delta, mixing)
    return 32.0 * lam_val * max(lam_val / mixing.beta1, 1.0) ** (1.0 / mixing.kappa)


def upsilon_bound_form(n, delta, mixing):
    """``log((4 + n beta0)/delta)^(1 + 1/kappa) beta1^(-1/kappa)`` (approximation bound form)."""
    base = math.log((4.0 + n * mixing.beta0) / delta)
    return base ** (1.0 + 1.0 / mixing.kappa) * mixing.beta1 ** (-1.0 / mixing.kappa)


def upsilon_hoeffding_form(n, delta, mixing):
    """``[log(1/delta) + log(4 + n beta0)] * ([...] / beta1)^(1/kappa)`` (mixing Hoeffding form)."""
    base = math.log(1.0 / delta) + math.log(4.0 + n * mixing.beta0)
    return base * (base / mixing.beta1) ** (1.0 / mixing.kappa)


def upsilon_consistency(n, delta, mixing):
    """Ratio of the two Upsilon expressions (1 when they agree)."""
    return upsilon_bound_form(n, delta, mixing) / upsilon_hoeffding_form(n, delta, mixing)


def mixing_hoeffding_radius(n, delta, M_h, mixing):
    """Deviation radius ``(2 M_h / sqrt(n)) sqrt(Upsilon(n, delta))`` for beta-mixing averages."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2.0 * M_h / math.sqrt(n) * math.sqrt(upsilon_hoeffding_form(n, delta, mixing))


def approximation_coefficient(lam, gamma, improved=False):
    """``(1 - lam gamma)/(1 - gamma)``; the improved form divides by
    ``sqrt((1 - gamma)(1 + gamma - 2 lam gamma))`` instead."""
    if improved:
        return (1.0 - lam * gamma) / math.sqrt((1.0 - gamma) * (1.0 + gamma - 2.0 * lam * gamma))
    return (1.0 - lam * gamma) / (1.0 - gamma)


def lstd_rp_approximation_coefficient(gamma):
    """Coefficient ``4 sqrt(2) / sqrt(1 - gamma^2)`` of the earlier LSTD-RP analysis."""
    return 4.0 * math.sqrt(2.0) / math.sqrt(1.0 - gamma * gamma)


# ---------------------------------------------------------------------------
# hypotheses

def _d_gap(d, delta_arg):
    """``d + 2 sqrt(2 d log(c/delta)) + 2 log(c/delta)`` with ``c/delta`` passed in."""
    lg = math.log(delta_arg)
    return d + 2.0 * math.sqrt(2.0 * d * lg) + 2.0 * lg


def _check(conditions, strict):
    failed = tuple(msg for ok, msg in conditions if not ok)
    if failed and strict:
        raise BoundDomainError("; ".join(failed))
    return failed


def estimation_hypotheses(inp):
    gap = _d_gap(inp.d, 4.0 / inp.delta)
    need_d = 15.0 * math.log(4.0 * inp.n / inp.delta)
    return [
        (inp.D > gap, f"D > d + 2 sqrt(2 d log(4/delta)) + 2 log(4/delta) fails: {inp.D} <= {gap:.4g}"),
        (inp.d >= need_d, f"d >= 15 log(4n/delta) fails: {inp.d} < {need_d:.4g}"),
    ]


def approximation_hypotheses(inp):
    need_d = 15.0 * math.log(8.0 * inp.n / inp.delta)
    return [(inp.d >= need_d, f"d >= 15 log(8n/delta) fails: {inp.d} < {need_d:.4g}")]


def total_hypotheses(inp):
    gap = _d_gap(inp.d, 8.0 / inp.delta)
    need_d = 15.0 * math.log(16.0 * inp.n / inp.delta)
    return [
        (inp.D > gap, f"D > d + 2 sqrt(2 d log(8/delta)) + 2 log(8/delta) fails: {inp.D} <= {gap:.4g}"),
        (inp.d >= need_d, f"d >= 15 log(16n/delta) fails: {inp.d} < {need_d:.4g}"),
    ]


# ---------------------------------------------------------------------------
# invertibility sample size

def _invertibility_lhs_mp(inp, n):
    """Left-hand side of the invertibility condition at sample size ``n`` (mpmath)."""
    mp = mpmath.mp
    n = int(n)
    d, delta, g, lg = inp.d, mp.mpf(inp.delta), mp.mpf(inp.gamma), mp.mpf(inp.lam) * mp.mpf(inp.gamma)
    mix = inp.mixing
    b0, b1, kap = mp.mpf(mix.beta0), mp.mpf(mix.beta1), mp.mpf(mix.kappa)
    m = m_n_lambda(n, inp.lam, inp.gamma)
    nm1 = mp.mpf(n - 1)
    xi_v = 1 + mp.sqrt(mp.mpf(8) / d * mp.log(mp.mpf(n) / (delta / 4)))
    lam_v = mp.log(8 * nm1 ** 2 / (delta / 2)) + mp.log(max(4 * mp.e ** 2, nm1 * b0))
    i_v = 32 * lam_v * max(lam_v / b1, mp.mpf(1)) ** (1 / kap)
    eta_in = 1 - mp.sqrt(mp.mpf(d) / inp.D) - mp.sqrt(2 * mp.log(2 / (delta / 2)) / inp.D)
    pref = 2 * d * mp.mpf(inp.L) ** 2 / ((1 - g) * mp.mpf(inp.nu_F) * eta_in ** 2)
    bracket = (2 * xi_v / mp.sqrt(nm1) * mp.sqrt((1 + m) * i_v)
               + 2 * xi_v / nm1 * m
               + 1 / ((1 - lg) * nm1))
    return pref * bracket


def invertibility_lhs(inp, n):
    with mpmath.workdps(40):
        return float(_invertibility_lhs_mp(inp, n))


def _plateau_end(n, lam, gamma, cap):
    """Largest n' <= cap with the same m_n^lambda as n."""
    if lam == 0:
        return cap
    m = m_n_lambda(n, lam, gamma)
    hi = min(cap, int((1.0 / (lam * gamma)) ** m * 1.001) + 2)
    if m_n_lambda(hi, lam, gamma) == m:
        return hi
    lo = n  # m(lo) == m < m(hi); m is nondecreasing in n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if m_n_lambda(mid, lam, gamma) == m:
            lo = mid
        else:
            hi = mid
    return lo


def n0(inp, cap=10**9):
    """Smallest ``n <= cap`` making the invertibility condition's left side ``< 1``.

    The left side is decreasing in ``n`` on every plateau of constant
    ``m_n^lambda``, so plateaus are visited in order and the first one
    whose right end satisfies the condition is bisected.  Returns ``None``
    when no ``n <= cap`` qualifies.
    """
    if eta_inner(inp.d, inp.D, inp.delta / 2) <= 0:
        raise BoundDomainError("D too small: eta(d, D, delta/2) is undefined")
    cap = int(cap)
    with mpmath.workdps(40):
        lo = 2
        while lo <= cap:
            hi = _plateau_end(lo, inp.lam, inp.gamma, cap)
            if _invertibility_lhs_mp(inp, hi) < 1:
                if _invertibility_lhs_mp(inp, lo) < 1:
                    return lo
                a, b = lo, hi  # lhs(a) >= 1 > lhs(b)
                while b - a > 1:
                    mid = (a + b) // 2
                    if _invertibility_lhs_mp(inp, mid) < 1:
                        b = mid
                    else:
                        a = mid
                return b
            lo = hi + 1
    return None


# ---------------------------------------------------------------------------
# bounds

def _estimation_term(inp, xi_delta, i_delta, eta_delta):
    m = m_n_lambda(inp.n, inp.lam, inp.gamma)
    num = 4.0 * inp.v_max * inp.d * inp.L ** 2 * xi(inp.n, inp.d, xi_delta)
    den = math.sqrt(inp.n - 1) * (1.0 - inp.gamma) * inp.nu_F * eta(inp.d, inp.D, eta_delta)
    return num / den * math.sqrt((m + 1) * I_fn(inp.n - 1, i_delta, inp.mixing))


def _approximation_term(inp, approx_error_F, log_arg, ups_delta, improved):
    coef = approximation_coefficient(inp.lam, inp.gamma, improved)
    eps = math.sqrt(8.0 / inp.d * math.log(log_arg))
    excess = eps * (1.0 + 2.0 * math.sqrt(upsilon_bound_form(inp.n, ups_delta, inp.mixing))
                    / math.sqrt(inp.n)) * inp.m_pi_f_v
    return coef * (approx_error_F + excess)


def estimation_bound(inp, strict=True):
    """Explicit part of the high-probability estimation-error bound.

    ``4 V_max d L^2 xi(n,d,delta/4) sqrt((m+1) I(n-1,delta/4))
    / (sqrt(n-1) (1-gamma) nu_F eta(d,D,delta/2))``
    """
    _check(estimation_hypotheses(inp), strict)
    return _estimation_term(inp, inp.delta / 4, inp.delta / 4, inp.delta / 2)


def approximation_bound(inp, approx_error_F, strict=True, improved=False):
    """``coef * [||V - Pi_F V|| + sqrt((8/d) log(8n/delta)) (1 + 2 sqrt(Ups(n, delta/2)) / sqrt(n)) m(Pi_F V)]``."""
    if approx_error_F < 0:
        raise ValueError("approx_error_F must be nonnegative")
    _check(approximation_hypotheses(inp), strict)
    return _approximation_term(inp, approx_error_F, 8.0 * inp.n / inp.delta, inp.delta / 2, improved)


def total_bound(inp, approx_error_F, strict=True, with_n0=False, n0_cap=10**9, improved=False):
    """Total-error bound with the confidence split of the combined statement.

    Estimation part uses ``xi(n,d,delta/8)``, ``I(n-1,delta/8)``,
    ``eta(d,D,delta/4)``; approximation part uses ``log(16n/delta)`` and
    ``Upsilon(n,delta/4)``.  With ``strict=False`` a failed ``D``-gap
    hypothesis still raises, since ``eta`` is then undefined.
    """
    failed = _check(total_hypotheses(inp), strict)
    est = _estimation_term(inp, inp.delta / 8, inp.delta / 8, inp.delta / 4)
    app = _approximation_term(inp, approx_error_F, 16.0 * inp.n / inp.delta, inp.delta / 4, improved)
    n0_val = "not computed"
    if with_n0:
        found = n0(inp, cap=n0_cap)
        n0_val = found if found is not None else f"not found <= {n0_cap}"
    return BoundReport(
        m_n_lambda=m_n_lambda(inp.n, inp.lam, inp.gamma),
        xi=xi(inp.n, inp.d, inp.delta / 8),
        eta=eta(inp.d, inp.D, inp.delta / 4),
        Lambda_val=Lambda_fn(inp.n - 1, inp.delta / 8, inp.mixing),
        I_val=I_fn(inp.n - 1, inp.delta / 8, inp.mixing),
        Upsilon_val=upsilon_bound_form(inp.n, inp.delta / 4, inp.mixing),
        n0=n0_val,
        estimation_bound=est,
        approximation_bound=app,
        total_bound=est + app,
        hypotheses_ok=not failed,
        failed_hypotheses=failed,
    )
