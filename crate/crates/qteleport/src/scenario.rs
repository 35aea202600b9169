//! Scenario configuration and runners.
