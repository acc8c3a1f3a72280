"""Closed forms, fixed points and Poisson laws for the random parity matrix."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Literal

__all__ = [
    "AnalyticProfile",
    "MessageDistribution",
    "evaluate",
    "fixed_points",
    "iterate_phi",
    "dist_update",
    "dist_limit",
    "q_zero",
    "q_star",
    "po_pmf",
    "po_ge2",
    "gen_deg_d",
    "gen_deg_g",
    "slush_constants",
    "identity_suite",
]

CRITICAL_BAND = 1e-3


def _check(d: float, alpha: float) -> None:
    if not d >= 0:
        raise ValueError(f"d must be nonnegative, got {d}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")


def D(d: float, alpha: float) -> float:
    return math.exp(-d * (1.0 - alpha))


def phi(d: float, alpha: float) -> float:
    return 1.0 - math.exp(-d * D(d, alpha))


def Phi(d: float, alpha: float) -> float:
    Da = D(d, alpha)
    return D(d, 1.0 - Da) + (1.0 + d * (1.0 - alpha)) * Da - 1.0


def evaluate(d: float, alpha: float) -> dict[str, float]:
    """D, phi, Phi and first/second derivatives of phi and Phi at alpha."""
    _check(d, alpha)
    Da = D(d, alpha)
    Dd = D(d, 1.0 - Da)
    ph = 1.0 - Dd
    ph1 = d * d * Dd * Da
    ph2 = d ** 3 * Dd * Da * (1.0 - d * Da)
    Ph = Dd + (1.0 + d * (1.0 - alpha)) * Da - 1.0
    Ph1 = d * d * Da * (ph - alpha)
    Ph2 = d ** 3 * Da * (ph - alpha) + d * d * Da * (ph1 - 1.0)
    return {"D": Da, "phi": ph, "Phi": Ph, "phi1": ph1, "phi2": ph2, "Phi1": Ph1, "Phi2": Ph2}


def iterate_phi(d: float, start: float, tol: float = 1e-13, max_iter: int = 1_000_000) -> tuple[float, int, bool]:
    """Iterate alpha -> phi(alpha) from ``start``; returns (limit, steps, converged)."""
    x = start
    for k in range(1, max_iter + 1):
        y = phi(d, x)
        if abs(y - x) < tol:
            return y, k, True
        x = y
    return x, max_iter, False


def _bisect(f, lo: float, hi: float, tol: float = 0.0, max_steps: int = 200) -> float:
    flo = f(lo)
    if flo == 0:
        return lo
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi) or hi - lo <= tol:
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _balanced_root(d: float) -> float:
    """Unique root in (0, 1) of 1 - a - exp(-d(1 - a))."""
    h = lambda a: 1.0 - a - math.exp(-d * (1.0 - a))  # noqa: E731
    if h(0.0) <= 0:
        return 0.0
    return _bisect(h, 0.0, 1.0)


def _side_root(d: float, beta: float, side: int) -> float:
    """Root of phi(a) - a strictly on one side of beta, by bracketed bisection."""
    g = lambda a: phi(d, a) - a  # noqa: E731
    for k in range(12, 0, -1):
        delta = 10.0 ** -k
        x = beta + side * delta
        if not 0.0 <= x <= 1.0:
            continue
        if side * g(x) > 1e-14:
            return _bisect(g, x, 1.0) if side > 0 else _bisect(g, 0.0, x)
    return beta


@dataclass(frozen=True)
class AnalyticProfile:
    d: float
    alpha_star: float
    alpha_0: float
    alpha_upper: float
    alpha_bar: float
    lam: float
    nu: float
    nu_literal: float
    phi_at: dict
    tol: float
    iterations: dict

    @property
    def two_peaks(self) -> bool:
        return self.alpha_upper - self.alpha_star > 1e-9

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        return out


def fixed_points(d: float, tol: float = 1e-12) -> AnalyticProfile:
    """Smallest, middle and largest fixed points of phi together with lambda and nu.

    The outer fixed points are the limits of iterating phi from 0 and from 1;
    these are polished by bisection inside a sign bracket. Within 1e-3 of
    d = e plain iteration is too slow and bisection is used directly.
    """
    if not d > 0:
        raise ValueError("d must be positive")
    if not 1e-15 < tol < 1e-6:
        raise ValueError("tol must lie in (1e-15, 1e-6)")
    beta = _balanced_root(d)
    g = lambda a: phi(d, a) - a  # noqa: E731
    iters = {"low": 0, "high": 0}
    if d <= math.e:
        # unique fixed point, which is exactly the balanced root
        if abs(d - math.e) >= CRITICAL_BAND:
            _, iters["low"], _ = iterate_phi(d, 0.0, tol)
            _, iters["high"], _ = iterate_phi(d, 1.0, tol)
        lo = hi = a0 = beta
    else:
        lo = hi = None
        if abs(d - math.e) >= CRITICAL_BAND:
            x_lo, iters["low"], ok_lo = iterate_phi(d, 0.0, tol)
            x_hi, iters["high"], ok_hi = iterate_phi(d, 1.0, tol)
            # the iterates approach from outside; polish inside a sign bracket
            if ok_lo and x_lo < beta:
                lo = _bisect(g, x_lo - 1e-9, min(x_lo + 1e-6, beta - 1e-12)) if g(min(x_lo + 1e-6, beta - 1e-12)) < 0 else None
            if ok_hi and x_hi > beta:
                hi = _bisect(g, max(x_hi - 1e-6, beta + 1e-12), x_hi + 1e-9) if g(max(x_hi - 1e-6, beta + 1e-12)) > 0 else None
        if lo is None:
            lo = _side_root(d, beta, -1)
        if hi is None:
            hi = _side_root(d, beta, +1)
        a0 = beta
    for a, name in ((lo, "alpha_star"), (hi, "alpha_upper"), (a0, "alpha_0")):
        if abs(g(a)) > max(tol, 1e-14):
            raise ArithmeticError(f"{name} failed to converge for d={d}: residual {abs(g(a)):.3e}")
    lam = d * (hi - lo)
    # slush density: no f-message in and at least two s-messages in
    nu = math.exp(-d * (1.0 - hi)) - math.exp(-d * (1.0 - lo)) * (1.0 + lam)
    # same expression with alpha in place of 1 - alpha; kept for comparison only
    nu_literal = math.exp(-d * lo) - math.exp(-d * hi) * (1.0 + lam)
    if abs(nu) <= tol:
        nu = 0.0
    if abs(nu_literal) <= tol:
        nu_literal = 0.0
    if abs(lam) <= tol:
        lam = 0.0
    return AnalyticProfile(
        d=d, alpha_star=lo, alpha_0=a0, alpha_upper=hi,
        alpha_bar=1.0 - math.log(d) / d,
        lam=lam, nu=nu, nu_literal=nu_literal,
        phi_at={"alpha_star": Phi(d, lo), "alpha_0": Phi(d, a0), "alpha_upper": Phi(d, hi)},
        tol=tol, iterations=iters,
    )


# message distributions

Triple = tuple[float, float, float]


@dataclass(frozen=True)
class MessageDistribution:
    """(f, s, u) laws of variable-to-check (q_v) and check-to-variable (q_c) messages.

    Here q_v is the law of messages arriving at a variable and q_c the law of
    messages arriving at a check.
    """

    q_v: Triple
    q_c: Triple

    def __post_init__(self):
        for t in (self.q_v, self.q_c):
            if min(t) < -1e-15 or abs(sum(t) - 1.0) > 1e-12:
                raise ValueError(f"not a probability triple: {t}")

    def tv(self, other: "MessageDistribution") -> float:
        a = 0.5 * sum(abs(x - y) for x, y in zip(self.q_v, other.q_v))
        b = 0.5 * sum(abs(x - y) for x, y in zip(self.q_c, other.q_c))
        return a + b


def q_zero() -> MessageDistribution:
    return MessageDistribution((0.0, 1.0, 0.0), (0.0, 1.0, 0.0))


def q_star(profile: AnalyticProfile) -> MessageDistribution:
    lo, hi = profile.alpha_star, profile.alpha_upper
    return MessageDistribution((1.0 - hi, hi - lo, lo), (lo, hi - lo, 1.0 - hi))


def _p0(lam: float) -> float:
    return math.exp(-lam)


def dist_update(q: MessageDistribution, d: float) -> MessageDistribution:
    """One step of the induced map on message laws."""
    cf, cs, cu = q.q_c
    vf, vs, vu = q.q_v
    nv_f = _p0(d * (cu + cs))
    nv_s = _p0(d * cu) * (1.0 - _p0(d * cs))
    nv_u = 1.0 - _p0(d * cu)
    nc_f = 1.0 - _p0(d * vf)
    nc_s = _p0(d * vf) * (1.0 - _p0(d * vs))
    nc_u = _p0(d * (vf + vs))
    return MessageDistribution(_renorm((nv_f, nv_s, nv_u)), _renorm((nc_f, nc_s, nc_u)))


def _renorm(t: Triple) -> Triple:
    s = sum(t)
    return (t[0] / s, t[1] / s, t[2] / s)


def dist_limit(q0: MessageDistribution, d: float, tol: float = 1e-14, max_iter: int = 1_000_000,
               strict: bool = True) -> MessageDistribution:
    """Iterate :func:`dist_update` until the total-variation step drops below tol."""
    q = q0
    for _ in range(max_iter):
        nxt = dist_update(q, d)
        if nxt.tv(q) < tol:
            return nxt
        q = nxt
    if strict:
        raise ArithmeticError(f"message law iteration did not settle for d={d}")
    return q


# Poisson laws


def po_pmf(lam: float, k: int) -> float:
    if k < 0:
        return 0.0
    if lam == 0:
        return 1.0 if k == 0 else 0.0
    return math.exp(-lam + k * math.log(lam) - math.lgamma(k + 1))


def po_ge2(lam: float, ell: int) -> float:
    """Poisson law conditioned on being at least two."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if ell < 2:
        raise ValueError("ell must be at least 2")
    tail = -math.expm1(-lam) - lam * math.exp(-lam)
    return po_pmf(lam, ell) / tail


Mark = Literal["f", "*", "u"]


def _census_key(L) -> tuple[int, int, int, int]:
    uu, uf, fu, ff = (int(x) for x in L)
    if min(uu, uf, fu, ff) < 0:
        raise ValueError("census counts must be nonnegative")
    return uu, uf, fu, ff


def gen_deg_d(alpha_hat: float, z: Mark, L, d: float) -> float:
    """Limiting share of variables with mark z and in/out message counts L.

    L = (uu, uf, fu, ff) counts incident edges by (incoming, outgoing) message.
    """
    _check(d, alpha_hat)
    uu, uf, fu, ff = _census_key(L)
    a_in, b_in = d * alpha_hat, d * (1.0 - alpha_hat)
    if z == "u":
        return po_pmf(a_in, 0) * po_pmf(b_in, uu) if fu == uf == ff == 0 else 0.0
    if z == "*":
        return po_pmf(a_in, 1) * po_pmf(b_in, uf) if fu == 1 and uu == ff == 0 else 0.0
    if z == "f":
        return po_pmf(a_in, ff) * po_pmf(b_in, uf) if fu == uu == 0 and ff >= 2 else 0.0
    raise ValueError(f"unknown mark {z!r}")


def gen_deg_g(alpha: float, z: Mark, L, d: float) -> float:
    """Limiting share of checks with mark z and in/out message counts L."""
    _check(d, alpha)
    uu, uf, fu, ff = _census_key(L)
    a_in, b_in = d * alpha, d * (1.0 - alpha)
    if z == "u":
        return po_pmf(b_in, uu) * po_pmf(a_in, fu) if uf == ff == 0 and uu >= 2 else 0.0
    if z == "*":
        return po_pmf(b_in, 1) * po_pmf(a_in, fu) if uf == 1 and uu == ff == 0 else 0.0
    if z == "f":
        return po_pmf(b_in, 0) * po_pmf(a_in, ff) if fu == uf == uu == 0 else 0.0
    raise ValueError(f"unknown mark {z!r}")


def census_cutoff(lam: float, eps: float = 1e-14) -> int:
    """Smallest k with P[Po(lam) > k] < eps."""
    k, p, cdf = 0, math.exp(-lam), math.exp(-lam)
    while 1.0 - cdf >= eps and k < 10_000:
        k += 1
        p *= lam / k
        cdf += p
        if p < 1e-300:
            break
    return k


def slush_constants(d: float, profile: AnalyticProfile) -> tuple[float, float, float]:
    """Expected shares (per n) of the R, S and U configurations."""
    lam = profile.lam
    r_bar = math.exp(-d) * lam * lam / 2.0
    s_bar = math.exp(-d)
    if lam == 0:
        return r_bar, s_bar, 0.0
    inner = math.exp(-d * profile.alpha_upper) * lam * lam / (2.0 * -math.expm1(-lam))
    return r_bar, s_bar, r_bar * inner * inner


def identity_suite(d: float, tol: float = 1e-12, threshold: float = 1e-9) -> dict:
    """Residuals of the fixed-point identities; ``ok`` is False if any exceeds the threshold."""
    p = fixed_points(d, tol)
    lo, hi, a0, lam = p.alpha_star, p.alpha_upper, p.alpha_0, p.lam
    res = {
        "Phi_equal": abs(Phi(d, lo) - Phi(d, hi)),
        "upper_from_lower": abs((1.0 - hi) - math.exp(-d * (1.0 - lo))),
        "lower_from_upper": abs((1.0 - lo) - math.exp(-d * (1.0 - hi))),
        "Phi_at_alpha_0": abs(Phi(d, a0) - (1.0 - 2.0 * a0 + d * (1.0 - a0) ** 2)),
        "message_fixed_point": dist_update(q_star(p), d).tv(q_star(p)),
    }
    skipped = []
    if abs(d - math.e) < CRITICAL_BAND:
        # convergence is only polynomial here; the limit is not resolvable to the threshold
        skipped.append("message_limit")
    else:
        res["message_limit"] = dist_limit(q_zero(), d).tv(q_star(p))
    sub = lam * lam * math.exp(lam) / math.expm1(lam) ** 2 if lam > 0 else 1.0
    flags = [k for k, v in res.items() if v > threshold]
    if p.two_peaks and not sub < 1.0:
        flags.append("subcritical")
    return {"d": d, "profile": p.to_dict(), "residuals": res, "subcritical_value": sub,
            "flags": flags, "skipped": skipped, "ok": not flags}
