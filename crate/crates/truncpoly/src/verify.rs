//! Placeholder; implemented in a later step.
