"""Profit changes, insolvency tests and the direct/indirect default split."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import FirmFinancials


@dataclass(frozen=True)
class DefaultVector:
    chi: np.ndarray
    chi_eq: np.ndarray
    chi_l: np.ndarray
    chi_dir: np.ndarray
    chi_indir: np.ndarray


def profit_delta(h_T, financials: FirmFinancials) -> np.ndarray:
    """Lost operating profit: (1 - h) * (revenue - material costs).

    Negative-margin firms get a negative delta (producing less helps them).
    """
    h_T = np.asarray(h_T, dtype=float)
    return (1.0 - h_T) * (financials.revenue - financials.material_costs)


def evaluate_defaults(dp, financials: FirmFinancials):
    """Equity and liquidity insolvency tests; returns ``(chi, chi_eq, chi_l)``.

    A firm defaults when its equity or its net short-term position drops to
    zero or below. Firms already insolvent before the shock stay in default.
    """
    dp = np.asarray(dp, dtype=float)
    z = financials.equity
    liq = financials.liquidity
    chi_eq = ((z - dp) <= 0) | (z <= 0)
    chi_l = ((liq - dp) <= 0) | (liq <= 0)
    return chi_eq | chi_l, chi_eq, chi_l


def split_defaults(chi, psi):
    """Indirect defaults are firms that defaulted without being hit (psi = 1)."""
    chi = np.asarray(chi, dtype=bool)
    psi = np.asarray(psi, dtype=float)
    indir = chi & (psi == 1.0)
    return chi & ~indir, indir


def default_vector(h_T, psi, financials: FirmFinancials) -> DefaultVector:
    chi, chi_eq, chi_l = evaluate_defaults(profit_delta(h_T, financials), financials)
    chi_dir, chi_indir = split_defaults(chi, psi)
    return DefaultVector(chi=chi, chi_eq=chi_eq, chi_l=chi_l, chi_dir=chi_dir, chi_indir=chi_indir)


def baseline_insolvent(financials: FirmFinancials) -> np.ndarray:
    """Firms that fail the insolvency test with no shock at all."""
    return (financials.equity <= 0) | (financials.liquidity <= 0)
