"""Active-RIS-aided energy-harvesting NOMA downlink simulator with an LSTM
activity forecaster and a DDPG RIS controller."""

__version__ = "0.1.0"
