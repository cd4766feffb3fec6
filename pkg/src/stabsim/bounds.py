"""Closed-form right-hand sides of the stability bounds with explicit constants,
plus the optimal Trotter-number / truncation-length choosers.

Every evaluator keeps the pre-simplification, proof-level expression: the
asymptotic forms are reported alongside for exponent-fit comparison, never in
place of an evaluable constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .trotter import trotter_error_constant

THEOREMS = (
    "T1",  # worst-case analog, time-dependent bounded perturbations
    "T2",  # worst-case digital, gate-dependent (M1) perturbations
    "T3",  # worst-case digital, constant (M2) perturbations
    "T4",  # average analog, Gaussian-process noise (finite or infinite lambda)
    "T5",  # average analog, white noise (Ito), with concentration tail
    "T5b",  # expected worst-case analog, time-independent random noise
    "T6",  # average digital M1, with concentration tail
    "T7",  # average digital M2, with concentration tail
    "T8",  # discrete-Ito digital noise
    "T9",  # Lindbladian perturbations
    "trotter",
    "truncation",
    "randomsum",
)


class BoundError(ValueError):
    """Missing parameter or malformed request for a bound evaluation."""


@dataclass(frozen=True)
class BoundParams:
    """Everything the closed-form evaluators may need.

    theta_count may carry the exact |Theta_l| of a concrete model; when absent
    the analytic count bound is used.  Fields irrelevant to a theorem may stay
    None.
    """

    d: int
    R: float = 1.0
    R_O: float = 0.0
    norm_O: float = 1.0
    supp_O_size: int = 1
    t: float | None = None
    delta: float | None = None
    p: int | None = None
    n: int | None = None
    l: float | None = None
    lam: float | None = None  # correlation length; math.inf for constant noise
    m: int | None = None  # noise operators per Hamiltonian term
    theta_count: float | None = None
    n_jumps: int | None = None  # Lindblad jump operators
    T_draws: int | None = None  # randomsum sample count
    dim_constant: float | None = None  # Hilbert-space dimension constant (T5b)

    @property
    def lambda_d(self) -> float:
        return 2.0**self.d / math.factorial(self.d)

    @property
    def v(self) -> float:
        return math.e * self.lambda_d * self.R ** (self.d + 1)

    @property
    def mu(self) -> float:
        return 1.0 / self.R

    @property
    def k_d(self) -> float:
        # upper bound Gamma(d)/mu^d on the out-of-cone sum
        return math.gamma(self.d) * self.R**self.d

    def upsilon(self) -> int:
        self._need("p")
        return 2 * 5 ** (self.p // 2 - 1)

    def trotter_k(self) -> float:
        self._need("p")
        return trotter_error_constant(self.p, self)

    def theta(self) -> float:
        if self.theta_count is not None:
            return float(self.theta_count)
        self._need("l")
        return self.lambda_d * (self.R_O + self.l + self.R) ** self.d

    def _need(self, *names: str):
        missing = [nm for nm in names if getattr(self, nm) is None]
        if missing:
            raise BoundError(f"missing parameters {missing} for bound evaluation")


@dataclass(frozen=True)
class BoundReport:
    """One evaluated right-hand side with its decomposition and tail."""

    theorem_id: str
    rhs: float
    terms: dict = field(default_factory=dict)
    assumptions: dict = field(default_factory=dict)
    rhs_asymptotic: float | None = None
    tail_scale: float | None = None
    tail_offset: float | None = None
    n_opt: int | None = None
    l_opt: int | None = None

    def tail_threshold(self, s: float) -> float:
        """Threshold whose exceedance probability is bounded by 2*exp(-s^2)."""
        if self.tail_scale is None:
            raise BoundError(f"{self.theorem_id} carries no concentration tail")
        return (self.tail_offset or 0.0) + self.tail_scale * s

    @staticmethod
    def tail_probability(s: float) -> float:
        return 2.0 * math.exp(-(s**2))

    def as_dict(self) -> dict:
        return {
            "theorem": self.theorem_id,
            "rhs": self.rhs,
            "terms": dict(self.terms),
            "assumptions": dict(self.assumptions),
            "rhs_asymptotic": self.rhs_asymptotic,
            "tail_scale": self.tail_scale,
            "tail_offset": self.tail_offset,
            "n_opt": self.n_opt,
            "l_opt": self.l_opt,
        }


def truncation_rhs(par: BoundParams) -> float:
    """Lieb-Robinson truncation term |supp O| ||O|| min(e^{-mu l}(e^{mu v t}-1), 1)."""
    par._need("t")
    if par.l is None:
        return 0.0
    raw = math.exp(-par.mu * par.l) * (math.exp(min(par.mu * par.v * par.t, 700.0)) - 1.0)
    return par.supp_O_size * par.norm_O * min(raw, 1.0)


def _log_factor(par: BoundParams, phi: float) -> float:
    # (1 - log(phi)/(mu v t))^d from the optimal-l substitution
    par._need("t")
    return (1.0 - math.log(phi) / (par.mu * par.v * par.t)) ** par.d


def eval_bound(theorem_id: str, par: BoundParams) -> BoundReport:
    """Closed-form RHS with the proofs' explicit constants."""
    if theorem_id not in THEOREMS:
        raise BoundError(f"unknown theorem id {theorem_id!r}; know {THEOREMS}")
    handler = {
        "T1": _t1,
        "T2": _t2,
        "T3": _t3,
        "T4": _t4,
        "T5": _t5,
        "T5b": _t5b,
        "T6": _t6,
        "T7": _t7,
        "T8": _t8,
        "T9": _t9,
        "trotter": _trotter,
        "truncation": _truncation,
        "randomsum": _randomsum,
    }[theorem_id]
    return handler(par)


def _t1(par: BoundParams) -> BoundReport:
    par._need("t", "delta")
    m_const = par.norm_O * par.supp_O_size * par.v**par.d * (2.0**par.d * par.lambda_d + par.k_d)
    rhs = m_const * par.delta * par.t ** (par.d + 1)
    return BoundReport(
        "T1",
        rhs,
        terms={"M": m_const},
        assumptions={
            "vt_gt_1": par.v * par.t > 1.0,
            "delta_t_small": par.delta * par.t ** (par.d + 1) < 1.0,
        },
    )


def _digital_core(par: BoundParams, gate_term: float) -> tuple[float, dict]:
    theta = par.theta()
    trot = 2.0 * par.norm_O * par.trotter_k() * theta * par.t ** (par.p + 1) / par.n**par.p
    trunc = truncation_rhs(par)
    terms = {"gate": gate_term, "trotter": trot, "truncation": trunc, "theta": theta}
    return gate_term + trot + trunc, terms


def _t2(par: BoundParams) -> BoundReport:
    par._need("t", "delta", "p", "n")
    gate = 2.0 * par.norm_O * par.upsilon() * par.theta() * par.delta * par.t
    rhs, terms = _digital_core(par, gate)
    phi = par.delta * par.t ** (par.d + 1)
    asym = None
    if 0 < phi < 1:
        lf = _log_factor(par, phi)
        asym = phi * par.norm_O * (
            2.0 ** (par.d + 1) * par.lambda_d * par.v**par.d * lf * (par.upsilon() + par.trotter_k())
            + par.supp_O_size
        )
    return BoundReport(
        "T2", rhs, terms=terms, rhs_asymptotic=asym,
        assumptions={"delta_t_small": 0 < phi < 1},
    )


def _t3(par: BoundParams) -> BoundReport:
    par._need("t", "delta", "p", "n")
    gate = 2.0 * par.norm_O * par.n * par.upsilon() * par.theta() * par.delta
    rhs, terms = _digital_core(par, gate)
    phi = par.delta ** (par.p / (par.p + 1)) * par.t ** (par.d + 1)
    asym = None
    if 0 < phi < 1:
        lf = _log_factor(par, phi)
        asym = phi * par.norm_O * (
            2.0 ** (par.d + 1) * par.lambda_d * par.v**par.d * lf * (par.upsilon() + par.trotter_k())
            + par.supp_O_size
        )
    return BoundReport(
        "T3", rhs, terms=terms, rhs_asymptotic=asym,
        assumptions={"delta_t_small": 0 < phi < 1},
    )


def _t4(par: BoundParams) -> BoundReport:
    par._need("t", "delta", "m", "lam")
    theta = par.theta()
    if math.isinf(par.lam):
        double_integral = par.t**2
    else:
        double_integral = math.sqrt(2.0 * math.pi) * par.lam * par.t
    variance = par.delta**2 * par.m * theta * double_integral / 2.0
    stoch = 2.0 * par.norm_O * math.sqrt(variance)
    trunc = truncation_rhs(par)
    return BoundReport(
        "T4",
        stoch + trunc,
        terms={"stochastic": stoch, "truncation": trunc, "double_integral": double_integral, "theta": theta},
        assumptions={"linearization": variance < 0.5},
    )


def _t5(par: BoundParams) -> BoundReport:
    par._need("t", "delta", "m")
    theta = par.theta()
    variance = par.delta**2 * par.t * par.m * theta / 2.0
    stoch = 2.0 * par.norm_O * math.sqrt(variance)
    trunc = truncation_rhs(par)
    return BoundReport(
        "T5",
        stoch + trunc,
        terms={"stochastic": stoch, "truncation": trunc, "sde_variance": variance, "theta": theta},
        assumptions={"linearization": variance < 0.5},
        tail_scale=2.0 * par.norm_O * par.delta * math.sqrt(2.0 * par.t * par.m * theta),
        tail_offset=trunc,
    )


def _t5b(par: BoundParams) -> BoundReport:
    par._need("t", "delta")
    theta = par.theta()
    c_dim = par.dim_constant if par.dim_constant is not None else 2.0**par.d * par.lambda_d
    main = 2.0 * math.sqrt(c_dim) * par.norm_O * par.delta * par.t * theta
    cone_tail = par.norm_O * par.supp_O_size * par.k_d * par.t * par.delta
    return BoundReport(
        "T5b",
        main + cone_tail,
        terms={"random_sum": main, "outside_cone": cone_tail, "dim_constant": c_dim, "theta": theta},
        assumptions={"vt_gt_1": par.v * par.t > 1.0},
    )


def _t6(par: BoundParams) -> BoundReport:
    par._need("t", "delta", "p", "n")
    theta = par.theta()
    ups = par.upsilon()
    stoch = 2.0 * par.norm_O * math.sqrt(2.0 * math.pi * ups * theta) * par.delta * par.t / math.sqrt(par.n)
    mid = 2.0 * par.norm_O * theta * (
        par.delta * ups * par.t**2 / par.n + par.trotter_k() * par.t ** (par.p + 1) / par.n**par.p
    )
    trunc = truncation_rhs(par)
    return BoundReport(
        "T6",
        stoch + mid + trunc,
        terms={"stochastic": stoch, "deterministic": mid, "truncation": trunc, "theta": theta},
        tail_scale=2.0 * par.norm_O * math.sqrt(2.0 * ups * theta) * par.delta * par.t / math.sqrt(par.n),
        tail_offset=mid + trunc,
    )


def _t7(par: BoundParams) -> BoundReport:
    par._need("t", "delta", "p", "n")
    theta = par.theta()
    ups = par.upsilon()
    walk = math.sqrt(par.n) + par.t / math.sqrt(par.n)
    stoch = 2.0 * par.norm_O * math.sqrt(2.0 * math.pi * ups * theta) * par.delta * walk
    mid = 2.0 * par.norm_O * theta * (
        (2.0 / 3.0) * ups * par.delta**2 * par.t
        + (2.0 / 3.0) * ups * par.delta * par.t**2 / par.n
        + par.trotter_k() * par.t ** (par.p + 1) / par.n**par.p
    )
    trunc = truncation_rhs(par)
    return BoundReport(
        "T7",
        stoch + mid + trunc,
        terms={"stochastic": stoch, "deterministic": mid, "truncation": trunc, "theta": theta},
        tail_scale=2.0 * par.norm_O * math.sqrt(2.0 * ups * theta) * par.delta * walk,
        tail_offset=mid + trunc,
    )


def _t8(par: BoundParams) -> BoundReport:
    par._need("t", "delta", "p", "n")
    theta = par.theta()
    ups = par.upsilon()
    stoch = 2.0 * par.norm_O * math.sqrt(2.0 * math.pi * ups * theta) * par.delta * (
        math.sqrt(par.t) + par.t**1.5 / par.n
    )
    mid = 2.0 * par.norm_O * theta * (
        (2.0 / 3.0) * ups * par.delta**2 * par.t**2 / par.n
        + (2.0 / 3.0) * ups * par.delta * par.t**2.5 / par.n**1.5
        + par.trotter_k() * par.t ** (par.p + 1) / par.n**par.p
    )
    trunc = truncation_rhs(par)
    return BoundReport(
        "T8",
        stoch + mid + trunc,
        terms={"stochastic": stoch, "deterministic": mid, "truncation": trunc, "theta": theta},
        tail_scale=2.0 * par.norm_O * math.sqrt(2.0 * ups * theta) * par.delta * (math.sqrt(par.t) + par.t**1.5 / par.n),
        tail_offset=mid + trunc,
    )


def _t9(par: BoundParams) -> BoundReport:
    par._need("t", "delta", "n_jumps")
    trace_rhs = 2.0 * par.delta * math.sqrt(par.t * par.n_jumps)
    trunc = truncation_rhs(par)
    return BoundReport(
        "T9",
        par.norm_O * trace_rhs + trunc,
        terms={"trace_distance": trace_rhs, "truncation": trunc},
    )


def _trotter(par: BoundParams) -> BoundReport:
    par._need("t", "p", "n")
    theta = par.theta()
    rhs = par.trotter_k() * theta * par.t ** (par.p + 1) / par.n**par.p
    return BoundReport("trotter", rhs, terms={"K": par.trotter_k(), "theta": theta})


def _truncation(par: BoundParams) -> BoundReport:
    par._need("t", "l")
    return BoundReport("truncation", truncation_rhs(par))


def _randomsum(par: BoundParams) -> BoundReport:
    par._need("T_draws")
    rhs = math.sqrt(2.0 * math.pi * par.T_draws)
    return BoundReport(
        "randomsum", rhs, tail_scale=math.sqrt(2.0 * par.T_draws), tail_offset=0.0
    )


def optimal_params(theorem_id: str, par: BoundParams, l_cap: int | None = None) -> dict:
    """The papers' optimal-choice formulas, rounded up to integers.

    l is clipped to l_cap when given; the report carries a feasibility flag.
    """
    par._need("t", "delta")
    if not 0.0 < par.delta < 1.0:
        raise BoundError(f"optimal choices need 0 < delta < 1, got {par.delta}")
    t, delta = par.t, par.delta
    if theorem_id == "T2":
        par._need("p")
        n = t / delta ** (1.0 / par.p)
        phi = delta * t ** (par.d + 1)
    elif theorem_id == "T3":
        par._need("p")
        n = t / delta ** (1.0 / (par.p + 1))
        phi = delta ** (par.p / (par.p + 1)) * t ** (par.d + 1)
    elif theorem_id == "T7":
        par._need("p")
        n = delta ** (-2.0 / (2 * par.p + 1)) * t ** ((par.d + 4) / 3.0)
        phi = delta ** (2.0 * par.p / (2 * par.p + 1)) * t ** (2.0 * (par.d + 1) / 3.0)
    elif theorem_id == "T1":
        n = None
        phi = delta * t ** (par.d + 1)
    else:
        raise BoundError(f"no optimal-parameter formula for {theorem_id!r}")
    l_raw = par.v * t - math.log(phi) / par.mu
    l_opt = max(0, math.ceil(l_raw))
    feasible = True
    if l_cap is not None and l_opt > l_cap:
        l_opt, feasible = l_cap, False
    return {
        "n_opt": None if n is None else max(1, math.ceil(n)),
        "l_opt": l_opt,
        "l_raw": l_raw,
        "l_feasible": feasible,
    }
