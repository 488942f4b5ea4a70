"""Data-dropping robustness audits for OLS and Huber regression."""

from .audit import (
    AuditQuery,
    AuditTrace,
    adversarial_audit,
    adversarial_subset,
    amip_audit,
    amip_ranking,
    brute_force_delta,
    one_greedy,
    refit_delta,
)
from .bounds import (
    BoundParams,
    BoundReport,
    NoiseDist,
    asymptotic_lower_bound,
    classify_regime,
    finite_sample_lower_bound,
    gaussian_upper_bound,
    product_normal_cdf,
    product_normal_quantile,
    rate_bounds,
    truncated_product_moment,
)
from .dataio import (
    SummaryStats,
    TableSchema,
    emit_report,
    expand_fixed_effects,
    load_dataset,
    load_report,
    summarize,
)
from .linalg import SpdFactor, downdate_inverse, factor_spd, inverse_spd, solve_spd
from .regression import (
    Dataset,
    HuberConfig,
    RegressionFit,
    fit_huber,
    fit_ols,
    influence_scores,
    loo_effects,
)
from .simulate import (
    Misspec,
    ModelSpec,
    SimulationConfig,
    SimulationResult,
    gen_model1,
    gen_model2,
    run_figure1,
    run_regime_grid,
)

__version__ = "0.1.0"
