"""Sweep correlation families and component counts on simulated data.

Run:  python3 demos/model_selection.py
"""

import numpy as np

from copulamix import evaluate as ev, model as mx, sampler as sp, selection as sel

rng = np.random.default_rng(2)
dataset, _, _ = mx.generate(400, ev.example1_params(), rng)

config = sp.ChainConfig(g=1, iterations=200, burn_in=40, n_chains=2, seed=0)
report = sel.sweep(dataset, [1, 2, 3],
                   [mx.INDEPENDENT, mx.HOMOSCEDASTIC, mx.HETEROSCEDASTIC],
                   config)

print(sel.format_report(report, delimiter="\t"))
best_bic = report.best("bic")
best_icl = report.best("icl")
print(f"best by BIC: {best_bic.family} with g={best_bic.g}")
print(f"best by ICL: {best_icl.family} with g={best_icl.g}")
