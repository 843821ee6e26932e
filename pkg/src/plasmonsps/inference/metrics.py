"""Figures of merit derived from fitted quantities."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from ..errors import MissingInput

DEFAULT_TAU_REF = 55.0   # ns, average lifetime of uncoupled dots
ALT_TAU_REF = 61.0       # ns, lifetime of the individual uncoupled dot


@dataclass(frozen=True)
class MetricsReport:
    """Derived metrics; fields are ``None`` when their inputs were absent.

    Attributes
    ----------
    alpha : float
        Detection efficiency of the chain.
    gamma_sp : float
        Fiber-coupled single-photon rate in MHz (both fiber ends).
    pf, pf_alt : float
        Purcell factor against the configured and the alternative
        reference lifetime.
    ef : float
        Emission enhancement relative to the reference ``gamma_sp``.
    coupling_efficiency : float
        ``gamma_sp * tau`` (dimensionless).
    """

    alpha: float
    gamma_sp: float
    pf: float | None = None
    pf_alt: float | None = None
    ef: float | None = None
    coupling_efficiency: float | None = None
    dop: float | None = None
    g2_0: float | None = None
    tau_ref: float = DEFAULT_TAU_REF

    def as_dict(self) -> dict:
        return asdict(self)


def gamma_sp(n_max: float, alpha: float) -> float:
    """Single-photon rate entering both fiber ends, ``2 N_max / alpha`` (Hz).

    ``n_max`` is the saturated rate measured through one fiber end.
    """
    return 2.0 * n_max / alpha


def derived_metrics(n_max: float | None, chain=None, alpha: float | None = None,
                    tau: float | None = None, reference_gamma: float | None = None,
                    tau_ref: float = DEFAULT_TAU_REF, tau_ref_alt: float = ALT_TAU_REF,
                    dop: float | None = None, g2_0: float | None = None) -> MetricsReport:
    """Assemble the metrics report.

    Parameters
    ----------
    n_max : float
        Saturated detected count rate in counts/s.
    chain : DetectorChain, optional
        Source of ``alpha`` when not given directly.
    alpha : float, optional
    tau : float, optional
        Lifetime in ns; enables ``pf`` and ``coupling_efficiency``.
    reference_gamma : float, optional
        ``gamma_sp`` (MHz) of the uncoupled reference; enables ``ef``.
    tau_ref, tau_ref_alt : float
        Reference lifetimes (ns) for the Purcell factor.
    dop, g2_0 : float, optional
        Passed through to the report.

    Raises
    ------
    MissingInput
        Without ``n_max`` or without any source of ``alpha``.
    """
    if n_max is None:
        raise MissingInput("n_max is required")
    if alpha is None:
        if chain is None:
            raise MissingInput("alpha or a detector chain is required")
        alpha = chain.alpha
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    g_hz = gamma_sp(n_max, alpha)
    g_mhz = g_hz * 1e-6
    pf = pf_alt = eta = ef = None
    if tau is not None:
        pf = tau_ref / tau
        pf_alt = tau_ref_alt / tau
        eta = g_hz * (tau * 1e-9)
    if reference_gamma is not None:
        ef = g_mhz / reference_gamma
    return MetricsReport(alpha, g_mhz, pf, pf_alt, ef, eta, dop, g2_0, tau_ref)
