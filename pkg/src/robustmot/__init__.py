"""Exact optimal adversarial risk for multiclass classification on empirical data.

The risk under closed-ball attacks of budget eps equals one minus the value of
a stratified multimarginal transport LP; the LP duals give a robust soft
classifier as a max of weighted balls.
"""
from .classifier import BallAtom, BallMaxClassifier, RiskReport, build_classifier, risk_report
from .data import DataError, EmpiricalDistribution, PerturbedDistribution, load_distribution
from .geometry import CostSpec, Metric, c_A, cost, min_enclosing_ball
from .mot import Barycenter, MotSolution, barycenter_from_mot, solve_mot, solve_mot_approx_sequence

__all__ = [
    "BallAtom", "BallMaxClassifier", "Barycenter", "CostSpec", "DataError", "EmpiricalDistribution",
    "Metric", "MotSolution", "PerturbedDistribution", "RiskReport", "barycenter_from_mot",
    "build_classifier", "c_A", "cost", "load_distribution", "min_enclosing_ball", "risk_report",
    "solve_mot", "solve_mot_approx_sequence",
]
__version__ = "0.1.0"
