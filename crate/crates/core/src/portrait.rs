//! Topological signatures on the Poincare disk and catalog matching.
