"""Link-level simulator for full-duplex non-coherent mmWave communication.

Modules
-------
mathcore       normal CDF and quantile, seeded random streams, dB helpers
constellation  cube-split Grassmannian mapping, demapping and decoding
channel        geometric intended and self-interference channels
beamforming    angle-domain analog beam selection
transceiver    per-block transmission for the four duplexing schemes
simulator      Monte Carlo sweeps, BER records and CSV output
cli            the ``fdnc`` command
"""

__version__ = "0.1.0"
