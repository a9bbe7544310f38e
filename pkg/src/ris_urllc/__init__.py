"""RIS-aided massive-MIMO downlink simulator for short-packet (URLLC) transmission.

The package is organized around the pipeline it implements:

- :mod:`ris_urllc.channel`: spatial correlation models, path loss, and
  correlated Rayleigh channel sampling.
- :mod:`ris_urllc.estimation`: LMMSE estimation of the cascaded BS-RIS-user
  channel and its normalized MSE.
- :mod:`ris_urllc.fbl`: finite-blocklength rate math (Q-function, dispersion,
  rate kernels, SINR-target inversion).
- :mod:`ris_urllc.sinr`: closed-form deterministic-equivalent SINR terms under
  maximum-ratio transmission.
- :mod:`ris_urllc.gradients`: analytic phase-shift gradients of the weighted
  sum rate.
- :mod:`ris_urllc.gp` / :mod:`ris_urllc.optimize`: geometric-programming power
  allocation and the alternating optimizer with accelerated phase ascent.
- :mod:`ris_urllc.montecarlo`: independent Monte-Carlo estimators used to
  validate every closed form.
- :mod:`ris_urllc.cli`: experiment runner reproducing the reference figures
  at desk scale.
"""

__version__ = "0.1.0"
