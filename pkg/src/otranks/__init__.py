"""Distribution-free multivariate nonparametric tests built on
optimal-assignment multivariate ranks.

The observations are matched to a fixed quasi-Monte Carlo grid by an
exact assignment solve; distance covariance and energy statistics on the
matched grid points are exactly distribution-free under their nulls, so
critical values come from permutation Monte Carlo over the grid alone
and never touch the data.
"""

from .assign import Assignment, CostMatrix, brute_force, build_cost, solve
from .nulldist import (
    NullTable,
    critical_value,
    load_table,
    null_sample_k_indep,
    null_sample_k_sample,
    null_sample_rdcov,
    null_sample_re,
    null_sample_symmetry,
    p_value,
    save_table,
)
from .qmc import (
    RankGrid,
    default_grid,
    halton_grid,
    lattice1d,
    load_grid_csv,
    radical_inverse,
    save_grid_csv,
    validate_custom,
)
from .ranks import (
    PointCloud,
    PooledRanks,
    RankMap,
    SymmetryRanks,
    coordinatewise_prerank,
    empirical_ranks,
    paired_symmetry_ranks,
    pooled_ranks,
)
from .simgen import PowerResult, SimSetting, generate, make_setting, power_study
from .stats import cvm_integral, dcov_sq, energy_sq, hoeffding_integral
from .testing import (
    TestReport,
    k_indep_test,
    k_sample_test,
    rdcov_test,
    re_test,
    symmetry_test,
)

__version__ = "0.1.0"
