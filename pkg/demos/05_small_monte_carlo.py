"""A small simulation study.

Runs a few replications of every estimator in the quadratic design and
prints the mean, standard deviation, rmse and empirical size of the 5%
t-test. The acceptance suite runs the same harness at 300 replications.
"""

import logging

from rankcf import montecarlo as mc
from rankcf.dgp import DgpConfig

logging.basicConfig(level=logging.WARNING)

cfg = mc.ExperimentConfig(
    dgp=DgpConfig(rho=0.5, pi_shape="quadratic", n=500),
    replications=20,
    estimators=("ML", "CF0", "MW1", "MW2", "DONG", "npMW1"),
    boot_b={"parametric": 49, "semiparametric": 9},
    base_seed=1,
)
table = mc.run_experiment(cfg, progress=lambda r, total: print(f"\rreplication {r}/{total}", end=""))
print()
print(table.format())
