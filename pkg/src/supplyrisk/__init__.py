"""Firm-level supply chain contagion and its systemic risk for banks."""

__version__ = "0.1.0"

from .banks import (BankLossVector, FsriResult, bank_losses, evaluate_scenario, fsri_all,
                    single_firm_sweep, system_loss)
from .defaults import DefaultVector, default_vector, evaluate_defaults, profit_delta, split_defaults
from .network import (BankLayer, DataValidationError, FirmFinancials, StructuralError,
                      SupplyChainNetwork, build_bank_layer, build_network, validate_layers)
from .production import (EssentialityTable, GLPFParams, calibrate_glpf, cascade_step, esri_all,
                         propagate, single_firm_shock)
from .stress import (LossDistribution, adjusted_pd, amplification, critical_sets,
                     exact_adjusted_pd, pd_adjusted_stress, risk_measures, run_stress,
                     sample_scenarios)
from .synth import Dataset, SynthSpec, preset_dataset, synthesize, toy_dataset

__all__ = [
    "BankLayer", "BankLossVector", "DataValidationError", "Dataset", "DefaultVector",
    "EssentialityTable", "FirmFinancials", "FsriResult", "GLPFParams", "LossDistribution",
    "StructuralError", "SupplyChainNetwork", "SynthSpec", "adjusted_pd", "amplification",
    "bank_losses", "build_bank_layer", "build_network", "calibrate_glpf", "cascade_step",
    "critical_sets", "default_vector", "esri_all", "evaluate_defaults", "evaluate_scenario",
    "exact_adjusted_pd", "fsri_all", "pd_adjusted_stress", "preset_dataset", "profit_delta",
    "propagate", "risk_measures", "run_stress", "sample_scenarios", "single_firm_shock",
    "single_firm_sweep", "split_defaults", "synthesize", "system_loss", "toy_dataset",
    "validate_layers",
]
