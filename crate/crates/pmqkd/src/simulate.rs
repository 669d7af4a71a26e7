//! Monte Carlo event generation.
