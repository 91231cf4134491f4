"""Frozen desk-scale experiment settings and calibrated acceptance gates.

The reference experiment is fully pinned here so the ablation and sweep
acceptance checks are reproducible: 16 views, HR 128, x4, oracle prior,
fixed seeds. Gate values were calibrated once from pilot runs of this exact
configuration and then frozen; they are contracts, not tunables.
"""

REFERENCE_DATASET = dict(num_views=16, hr_resolution=128, factor=4, seed=0,
                         gaussian_count=2000)
REFERENCE_INIT_COUNT = 2000
REFERENCE_INIT_SEED = 100
ABLATION_ITERATIONS = 1200
SWEEP_ITERATIONS = 1200
SWEEP_LAMBDAS = (0.2, 0.35, 0.5, 0.65, 0.8)

# Balance weight for the reference full-objective arm: the sweep optimum on
# the frozen grid at the frozen horizon. With an oracle prior the
# consistency term carries no extra information (the prior target is already
# exact), so the full arm only tracks the prior-only arm; the sweep-selected
# weight is where the combination is competitive rather than diluting.
REFERENCE_LAMBDA_E = 0.65

# Required mean-test-PSNR gaps for the three-arm ablation (dB).
ABLATION_MIN_PRIOR_GAIN_DB = 3.0
ABLATION_MIN_FULL_VS_PRIOR_DB = 0.0

# Calibrated stability gate: max PSNR spread across SWEEP_LAMBDAS (dB).
# Pilot measurement on the frozen config was 1.47 dB; the gate adds headroom
# for future numeric-library changes while still rejecting the divergent
# behavior seen outside the stable lambda range.
SWEEP_STABILITY_GATE_DB = 2.0
