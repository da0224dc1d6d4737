"""Stochastic blockmodel estimation and inference.

Complete-data maximum likelihood, an exact marginal-likelihood oracle at
enumerable sizes, mean-field variational EM, likelihood-modularity label
search, a degree-corrected submodel, and the Monte Carlo machinery (Wilks
statistics, confidence regions, parametric bootstrap, local-quadratic
expansion checks) that verifies the asymptotic equivalences empirically.
"""

from .cgm import (
    AsymptoticCov,
    CgmFit,
    asymptotic_cov,
    cgm_mle,
    complete_loglik,
    gradient,
    hessian,
    loglik_ratio,
    nu_free_indices,
    pack_nu,
    unpack_nu,
    wilks_cgm,
    wilks_df,
)
from .degree import (
    DcFit,
    DcFitConfig,
    DcParams,
    canonicalize_dc,
    dc_param_count,
    dc_to_blockmodel,
    fit_submodel,
)
from .exact import (
    ENUMERATION_BUDGET,
    ExactEmConfig,
    ExactGmFit,
    ExactPosterior,
    exact_gm_mle,
    exact_posterior,
    marginal_loglik,
    theorem1_gap,
    verify_identity_eq2,
)
from .inference import (
    BootstrapResult,
    ConfidenceRegion,
    LanReport,
    MonteCarloReport,
    confidence_region,
    lan_check,
    monte_carlo_normality,
    parametric_bootstrap,
    sym_inv_sqrt,
    wilks_gm_exact,
    wilks_variational,
)
from .model import (
    EmptyBlockError,
    EnumerationBudgetError,
    FitError,
    Graph,
    LogitParams,
    ModelParams,
    SufficientStats,
    align_labels,
    align_params,
    aligned_param_distance,
    derived_rng,
    from_logits,
    param_distance,
    planted_partition_params,
    sample_graph,
    split_rho,
    sufficient_stats,
    to_logits,
)
from .modularity import (
    ConfusionMatrix,
    F,
    ProfileSearchConfig,
    concentration_X,
    confusion,
    modularity_Qn,
    profile_label_search,
    tau,
)
from .varem import (
    MeanFieldPosterior,
    VarConfig,
    VarFit,
    check_sandwich,
    e_step,
    elbo,
    fit_variational,
    m_step,
    optimize_q,
)

__version__ = "0.1.0"
