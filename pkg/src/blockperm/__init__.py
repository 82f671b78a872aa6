"""Block-restricted one-swap permutation tests for two-sample problems.

Exact finite-sample-valid p-values over restricted permutation sets,
closed-form one-swap statistic updates for the mean difference and the
unbiased MMD^2, data-dependent tail diagnostics, and a Monte Carlo harness.
"""

from .blockdesign import (
    BlockDesign,
    Component,
    SwapSet,
    build_swap_set,
    complementary_pairs,
    kernel_score_blocks,
    quantile_blocks,
    select_representatives,
)
from .core import (
    LABEL_A,
    LABEL_B,
    LabelState,
    PooledSample,
    RestrictedPermutation,
    apply_permutation,
    compose_with_inverse,
    effective_resolution,
    exchange_labels,
    load_csv,
    permute_labels,
)
from .diagnostics import (
    DiagnosticsReport,
    FreedmanTail,
    IncrementMoments,
    VarianceComparison,
    diagnose,
    freedman_tail,
    in_variance_regime,
    increment_moments,
    path_prefix_v_star,
    quantile_bound,
    rho_feasibility,
    rho_recommend,
    tau_squared,
    variance_comparison,
)
from .errors import (
    BlockPermError,
    DegenerateDiagnosticsError,
    DegenerateGroupError,
    DesignError,
    DisjointnessError,
    EmptySwapSetError,
    RepresentativeSetTooSmallError,
    SwapOrientationError,
)
from .permtest import (
    FULL_RELABEL,
    MEAN_DIFF,
    MMD2,
    RESTRICTED_MATCHING,
    RESTRICTED_SINGLE_SWAP,
    TestConfig,
    TestResult,
    empirical_critical_value,
    p_value,
    prepare_design,
    run_full_test,
    run_restricted_test,
    run_test,
)
from .sampler import (
    ComponentMatchingLaw,
    component_matching_counts,
    enumerate_restricted,
    restricted_set_size,
    sample_full_relabeling,
    sample_restricted,
    sample_restricted_batch,
    sample_single_swap,
)
from .simharness import (
    CellResult,
    ExperimentSpec,
    SweepRow,
    generate_gaussian_pair,
    load_spec,
    run_power_study,
    run_simulation,
    run_table1,
    run_variance_sweep,
    table1_specs,
)
from .stats import (
    KernelMatrix,
    MeanDiffState,
    MMDState,
    full_relabel_variance_mean,
    gaussian_kernel_matrix,
    mean_diff_batch,
    mean_diff_full,
    mean_diff_increment,
    mean_diff_statistic,
    median_heuristic_bandwidth,
    mmd2_batch,
    mmd2_full,
    mmd_one_swap_increment,
    pooled_variance,
    psi_a_to_b,
    psi_b_to_a,
)

__version__ = "0.1.0"
