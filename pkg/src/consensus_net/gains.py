"""Controller gain sets and numerical certification of the stability
inequalities.

Both controllers come with a Lyapunov-based stability argument whose chain of
sufficient conditions involves only the gains and two spectral bounds: the
norm of the certificate matrix P (lambda_P) and the norm of the Laplacian
(lambda_L).  ``certify_matched`` and ``certify_unmatched`` evaluate every
inequality in that chain with zero slack, assemble the quadratic-form matrix
whose positive definiteness makes the Lyapunov derivative negative, and
report its smallest eigenvalue.  Certification is advisory: the simulator
runs uncertified gains and records the report alongside the trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleGainError, ValidationError
from .spectral import LyapunovCertificate

#: tolerance for the exact-equality substitution checks
_SUBSTITUTION_TOL = 1e-12


def _require_positive(obj, names):
    for name in names:
        value = getattr(obj, name)
        if not (value > 0) or not math.isfinite(value):
            raise ValidationError(f"{name}: must be a positive finite number, got {value}")


@dataclass(frozen=True)
class MatchedGains:
    """Gains of the matched-disturbance controller plus Lyapunov parameters.

    gamma1..gamma4 enter the control law; mu, b, rho, epsilon parametrize the
    Lyapunov function.  The stability analysis substitutes
    gamma4 = 2*gamma3*(1 + mu/b) + gamma2, epsilon = rho/gamma2 and
    rho = gamma2; gains violating those are still simulated but flagged.
    """

    gamma1: float
    gamma2: float
    gamma3: float
    gamma4: float
    mu: float = 1.0
    b: float = 10.0
    rho: float | None = None
    epsilon: float | None = None

    def __post_init__(self):
        if self.rho is None:
            object.__setattr__(self, "rho", float(self.gamma2))
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", float(self.rho) / float(self.gamma2))
        _require_positive(self, ("gamma1", "gamma2", "gamma3", "gamma4", "mu", "b", "rho", "epsilon"))

    @classmethod
    def with_substitutions(cls, gamma1, gamma2, gamma3, mu=1.0, b=10.0) -> "MatchedGains":
        """Fill gamma4, rho, epsilon from the stability-analysis substitutions."""
        gamma4 = 2.0 * gamma3 * (1.0 + mu / b) + gamma2
        return cls(gamma1, gamma2, gamma3, gamma4, mu=mu, b=b, rho=gamma2, epsilon=1.0)


@dataclass(frozen=True)
class UnmatchedGains:
    """Gains of the unmatched-disturbance controller.

    k_x, k_d, k_s, alpha1, nu enter the control law; alpha2 parametrizes the
    Lyapunov function.  The stability analysis substitutes nu = alpha1/k_d and alpha1 = k_d.
    """

    k_x: float
    k_d: float
    k_s: float
    alpha1: float
    nu: float
    alpha2: float = 1.0

    def __post_init__(self):
        _require_positive(self, ("k_x", "k_d", "k_s", "alpha1", "nu", "alpha2"))


@dataclass(frozen=True)
class Check:
    """One certified inequality: ``left (relation) right`` with its margin.

    margin > 0 means the requirement holds; margin is left - right for
    strict lower bounds and tolerance - |left - right| for equalities.
    """

    name: str
    requirement: str
    left: float
    right: float
    margin: float

    @property
    def passed(self) -> bool:
        return self.margin > 0

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "requirement": self.requirement,
            "left": self.left,
            "right": self.right,
            "margin": self.margin,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class CertificationReport:
    """Outcome of a gain certification: ordered checks plus the smallest
    eigenvalue of the assembled quadratic form."""

    passed: bool
    checks: tuple
    min_eig_form: float

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "min_eig_form": self.min_eig_form,
            "checks": [c.to_json() for c in self.checks],
        }

    def table(self) -> str:
        """Human-readable fixed-width table of the checks."""
        rows = [("check", "requirement", "left", "right", "margin", "ok")]
        for c in self.checks:
            rows.append(
                (c.name, c.requirement, f"{c.left:.6g}", f"{c.right:.6g}", f"{c.margin:.6g}",
                 "yes" if c.passed else "NO")
            )
        widths = [max(len(r[k]) for r in rows) for k in range(6)]
        lines = ["  ".join(cell.ljust(widths[k]) for k, cell in enumerate(row)) for row in rows]
        lines.append(f"min eig of quadratic form: {self.min_eig_form:.6g}")
        lines.append(f"certified: {'PASSED' if self.passed else 'FAILED'}")
        return "\n".join(lines)


def _equality_check(name, requirement, left, right) -> Check:
    return Check(name, requirement, float(left), float(right),
                 _SUBSTITUTION_TOL - abs(float(left) - float(right)))


def _bound_check(name, requirement, left, right) -> Check:
    return Check(name, requirement, float(left), float(right), float(left) - float(right))


def is_S_hurwitz(g: MatchedGains) -> bool:
    """Stability of the 2x2 averaged (velocity, integral) subsystem.

    The matrix [[-gamma2, -gamma3], [gamma4, 0]] is Hurwitz iff its trace is
    negative and its determinant positive; for strictly positive gains both
    hold automatically.
    """
    trace = -g.gamma2
    det = g.gamma3 * g.gamma4
    return trace < 0 and det > 0


def certify_matched(g: MatchedGains, cert: LyapunovCertificate) -> CertificationReport:
    """Evaluate the matched-case gain conditions against a certificate.

    Checks, in order: positivity of the Lyapunov function, the three design
    substitutions, the gamma2 lower bound, the b lower bound, and finally the
    smallest eigenvalue of the assembled 3n x 3n quadratic-form matrix.
    """
    lam_P = cert.lambda_P
    lam_L = cert.lambda_L
    checks = []

    checks.append(_bound_check(
        "H_positive", "sqrt(2*rho*mu/lambda_P) > epsilon",
        math.sqrt(2.0 * g.rho * g.mu / lam_P), g.epsilon))
    checks.append(_equality_check(
        "gamma4_substitution", "gamma4 = 2*gamma3*(1 + mu/b) + gamma2",
        g.gamma4, 2.0 * g.gamma3 * (1.0 + g.mu / g.b) + g.gamma2))
    checks.append(_equality_check(
        "epsilon_substitution", "epsilon = rho/gamma2", g.epsilon, g.rho / g.gamma2))
    checks.append(_equality_check("rho_substitution", "rho = gamma2", g.rho, g.gamma2))
    gamma2_bound = (lam_P + 2.0 * g.gamma3 * (g.mu + g.b)) / (2.0 * g.mu + g.b) \
        + 0.5 * g.gamma1 * (2.0 * g.mu + g.b) * lam_L ** 2
    checks.append(_bound_check(
        "gamma2_bound",
        "gamma2 > (lambda_P + 2*gamma3*(mu+b))/(2*mu+b) + gamma1*(2*mu+b)*lambda_L^2/2",
        g.gamma2, gamma2_bound))
    checks.append(_bound_check(
        "b_bound", "b >= (gamma3/gamma1)*lambda_P^2",
        g.b, (g.gamma3 / g.gamma1) * lam_P ** 2))

    N = matched_form_matrix(g, cert)
    min_eig = float(np.linalg.eigvalsh(N)[0])
    checks.append(_bound_check("form_posdef", "min eig of quadratic form > 0", min_eig, 0.0))

    passed = all(c.passed for c in checks) and min_eig > 0
    return CertificationReport(passed=passed, checks=tuple(checks), min_eig_form=min_eig)


def matched_form_matrix(g: MatchedGains, cert: LyapunovCertificate) -> np.ndarray:
    """Assemble the symmetric 3n x 3n matrix of the matched Lyapunov decay,
    in (e_x, e_y, e_d) block order."""
    n = cert.n_agents
    P = cert.P
    L = cert.L
    I = np.eye(n)
    N11 = g.gamma1 * g.epsilon * I
    N12 = g.gamma1 * (2.0 * g.mu + g.b) * L.T - (g.rho - g.epsilon * g.gamma2) * P
    N13 = g.gamma3 * g.epsilon * P
    N22 = 2.0 * (2.0 * g.b * g.gamma2 - g.b * g.gamma4 + 2.0 * g.mu * g.gamma2) * I \
        - 2.0 * g.epsilon * P
    N23 = (2.0 * g.mu * g.gamma3 + 2.0 * g.b * g.gamma3 + g.b * g.gamma2 - g.b * g.gamma4) * I
    N33 = 2.0 * g.gamma3 * g.b * I
    return np.block([
        [N11, N12, N13],
        [N12.T, N22, N23],
        [N13.T, N23.T, N33],
    ])


def suggest_matched(gamma1: float, gamma3: float, mu: float, b: float,
                    cert: LyapunovCertificate) -> MatchedGains:
    """Pick gamma2 5% above its lower bound and fill the design substitutions.

    The scalar bounds alone do not guarantee joint positive definiteness of
    the assembled form: its two Schur-complement arguments share the same
    leading block.  When the 5% choice leaves the form indefinite, gamma2 is
    escalated geometrically until certification passes; this terminates
    because the b bound keeps a factor-2 reserve on the remaining coupling.
    Raises InfeasibleGainError (carrying the minimal admissible b) when b is
    below (gamma3/gamma1)*lambda_P^2.
    """
    for name, value in (("gamma1", gamma1), ("gamma3", gamma3), ("mu", mu), ("b", b)):
        if not (value > 0 and math.isfinite(value)):
            raise ValidationError(f"{name}: must be a positive finite number, got {value}")
    b_min = (gamma3 / gamma1) * cert.lambda_P ** 2
    if b < b_min:
        raise InfeasibleGainError(
            f"b = {b} is below the minimal admissible value {b_min}", minimal_value=b_min)
    gamma2_bound = (cert.lambda_P + 2.0 * gamma3 * (mu + b)) / (2.0 * mu + b) \
        + 0.5 * gamma1 * (2.0 * mu + b) * cert.lambda_L ** 2
    gamma2 = 1.05 * gamma2_bound
    for _ in range(200):
        gains = MatchedGains.with_substitutions(gamma1, gamma2, gamma3, mu=mu, b=b)
        if certify_matched(gains, cert).passed:
            return gains
        gamma2 *= 1.25
    raise InfeasibleGainError(
        f"could not certify any gamma2 for gamma1={gamma1}, gamma3={gamma3}, mu={mu}, b={b}",
        minimal_value=b_min)


def unmatched_form_matrices(g: UnmatchedGains,
                            cert: LyapunovCertificate) -> tuple[np.ndarray, np.ndarray]:
    """The 2n x 2n quadratic-form matrix and its Schur-complement test matrix."""
    n = cert.n_agents
    P = cert.P
    L = cert.L
    I = np.eye(n)
    M = np.block([
        [(g.alpha1 * g.k_x / g.k_d) * I, g.alpha2 * g.k_x * L.T],
        [g.alpha2 * g.k_x * L, 2.0 * (g.alpha2 * g.k_d * I - (g.alpha1 / g.k_d) * P)],
    ])
    D = 2.0 * (g.alpha2 * g.k_d * I - P) - g.alpha2 ** 2 * g.k_x * (L @ L.T)
    return M, D


def certify_unmatched(g: UnmatchedGains, cert: LyapunovCertificate) -> CertificationReport:
    """Evaluate the unmatched-case gain conditions against a certificate.

    Checks: positivity of the Lyapunov function, the two design substitutions
    (nu = alpha1/k_d, alpha1 = k_d), the k_d lower bound, and the smallest
    eigenvalues of the assembled quadratic form and its Schur test matrix.
    """
    checks = []
    checks.append(_bound_check(
        "W_positive", "sqrt(alpha1*alpha2/lambda_P) > nu",
        math.sqrt(g.alpha1 * g.alpha2 / cert.lambda_P), g.nu))
    checks.append(_equality_check(
        "nu_substitution", "nu = alpha1/k_d", g.nu, g.alpha1 / g.k_d))
    checks.append(_equality_check(
        "alpha1_substitution", "alpha1 = k_d", g.alpha1, g.k_d))
    kd_bound = 0.5 * g.alpha2 * g.k_x * cert.lambda_L ** 2 + cert.lambda_P / g.alpha2
    checks.append(_bound_check(
        "k_d_bound", "k_d > alpha2*k_x*lambda_L^2/2 + lambda_P/alpha2",
        g.k_d, kd_bound))

    M, D = unmatched_form_matrices(g, cert)
    min_eig_M = float(np.linalg.eigvalsh((M + M.T) / 2)[0])
    min_eig_D = float(np.linalg.eigvalsh((D + D.T) / 2)[0])
    checks.append(_bound_check("form_posdef", "min eig of quadratic form > 0", min_eig_M, 0.0))
    checks.append(_bound_check("schur_psd", "min eig of Schur test matrix > 0", min_eig_D, 0.0))

    passed = all(c.passed for c in checks) and min_eig_M > 0
    return CertificationReport(passed=passed, checks=tuple(checks), min_eig_form=min_eig_M)
