//! Binary field and state snapshots with JSON headers, and CSV helpers.
