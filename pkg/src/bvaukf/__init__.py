"""Adaptive unscented Kalman filtering of RNN arm-motion predictions."""
