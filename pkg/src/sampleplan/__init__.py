"""Sample size planning for classification studies.

Classifier testing is a Bernoulli process: this package turns that into
interval estimates for tested proportions, the test sample sizes needed for
a prescribed precision, power/sample-size analysis for classifier
comparisons, and learning-curve studies on simulated Gaussian class data
validated by iterated stratified cross-validation.
"""

__version__ = "0.1.0"

from .binom_ci import (
    BetaParams,
    BinomialObservation,
    CredibleInterval,
    PriorSpec,
    UNIFORM_PRIOR,
    clopper_pearson,
    equal_tailed_interval,
    hpd_interval,
    interval,
    min_ntest_for_width,
    min_width_interval,
    point_estimate,
    posterior,
    sampling_stddev,
    worst_case_ntest,
)
from .classify import (
    LdaModel,
    PipelineModel,
    PlsProjection,
    fit_lda,
    fit_pls,
    fit_pls_lda,
    load_model,
    predict,
    predict_lda,
    save_model,
)
from .confusion import (
    ClassMetrics,
    ConfusionMatrix,
    accumulate,
    class_metrics,
    guessing_baseline,
    npv,
    ppv,
    row_normalize,
    sensitivity,
    specificity,
)
from .errors import InfeasibleError, SolverError, UndefinedMetricError
from .power import (
    MonteCarloPower,
    SampleSizePlan,
    TwoProportionSpec,
    allocation_samsize,
    analytic_power,
    equal_allocation_samsize,
    max_power_vs_infinite_test,
    n_new_for_fixed_n_old,
    simulated_power,
)
from .rng import RngSeed
from .simgen import (
    GaussianClassSpec,
    LabeledDataset,
    estimate_class_moments,
    growing_sequence,
    make_problem,
    matrix_root,
    sample_mvn,
    sample_problem,
    stratified_draw,
)
from .validate import (
    CvResult,
    CvSpec,
    LearningCurve,
    fit_inverse_power_law,
    iterated_cv,
    learning_curve_growing,
    learning_curve_population,
    percentile_band,
    retrospective_curve,
    stratified_folds,
)
