"""L2 spectral invariants of periodic simplicial complexes and hyperbolic models.

Public names are loaded on first access so that the command-line entry point
only pays for the modules it uses.
"""

from importlib import import_module

from ._errors import ConfigError, DomainError, NumericalError, SpecgapError

_EXPORTS = {
    "PeriodicComplex": "complex",
    "MeshStats": "complex",
    "build_torus_complex": "complex",
    "subdivide": "complex",
    "mesh_stats": "complex",
    "MassFamily": "whitney",
    "SampledForm": "whitney",
    "QuadratureWarning": "whitney",
    "barycentric_gradients": "whitney",
    "local_mass": "whitney",
    "mass_family": "whitney",
    "whitney_form_at": "whitney",
    "whitney_form": "whitney",
    "simplex_rule": "whitney",
    "integrate_on_simplex": "whitney",
    "derham_map": "whitney",
    "TwistedOperatorFamily": "bloch",
    "SpectralSample": "bloch",
    "SpectrumSummary": "bloch",
    "assemble_laplacian": "bloch",
    "laplacian_families": "bloch",
    "character_grid": "bloch",
    "sample_spectrum": "bloch",
    "vn_heat_trace": "bloch",
    "spectral_density": "bloch",
    "spectrum_summary": "bloch",
    "ClosedFormTheta": "closed_form",
    "ThetaFunction": "spectral",
    "BetaEstimate": "spectral",
    "BetaEstimator": "spectral",
    "theta": "spectral",
    "theta_truncated": "spectral",
    "estimate_beta": "spectral",
    "laplace_of_density": "spectral",
    "estimate_density_exponent": "spectral",
    "HeatExpansion": "zeta",
    "ZetaReport": "zeta",
    "zeta_small": "zeta",
    "zeta_large": "zeta",
    "determinant": "zeta",
    "beta_torsion": "zeta",
    "ns_zeta": "zeta",
    "HyperbolicModel": "hyperbolic",
    "plancherel_poly": "hyperbolic",
    "i_t_sigma": "hyperbolic",
    "theta_hyperbolic": "hyperbolic",
    "gap_table": "hyperbolic",
    "gap_formula": "hyperbolic",
    "product_theta": "hyperbolic",
    "product_gap_formula": "hyperbolic",
    "determinant_hyperbolic": "hyperbolic",
    "zeta_report_hyperbolic": "hyperbolic",
    "torsion_hyperbolic": "hyperbolic",
    "CLOSED_FORM_MODELS": "hyperbolic",
    "model_thetas": "hyperbolic",
    "ConvergenceRow": "lab",
    "ConvergenceReport": "lab",
    "TORUS_PRESETS": "lab",
    "EXPERIMENT_PRESETS": "lab",
    "torus_preset": "lab",
    "torus_theta_reference": "lab",
    "torus_counting_reference": "lab",
    "refinement_levels": "lab",
    "theta_table": "lab",
    "theta_convergence": "lab",
    "gap_convergence": "lab",
    "density_sandwich": "lab",
    "fit_dilation": "lab",
    "zeta_convergence": "lab",
    "run_preset": "lab",
}

__all__ = ["ConfigError", "DomainError", "NumericalError", "SpecgapError", *_EXPORTS]


def __getattr__(name):
    module = _EXPORTS.get(name)
    if module is None:
        raise AttributeError(f"module 'specgap' has no attribute {name!r}")
    value = getattr(import_module(f".{module}", __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(__all__)
