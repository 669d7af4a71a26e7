//! Event-stream formats and analysis.
