"""State-space filtering and smoothing: Kalman, two-filter, Gaussian-sum and particle."""
