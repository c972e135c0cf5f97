"""
qzeno: simulate and analyse a Rabi-driven qubit under continuous click monitoring.

Modules:
  ideal_model     : closed forms of the decoherence-free no-click model
  liouvillian     : realistic-model generators, spectra and transition finders
  trajectory_sim  : windowed Monte Carlo trajectories with detector errors
  estimation      : HMM calibration, matrix pencil, coalescence and dwell fits
  pipeline_cli    : batch CLI (ideal, transitions, simulate, extract, calibrate, scan)
"""
__version__ = "0.3.0"
