//! Determinant asymptotics for finite sections of band-dominated operators
//! with almost periodic diagonals.
//!
//! The crate builds operators `A = Σ_k (a_k I) U_k` on `l²(Z)` whose
//! diagonals `a_k` are almost periodic sequences with frequencies in a
//! finitely generated subgroup of R/Z, takes determinants of their finite
//! sections `P_{h1,h2} A P_{h1,h2}`, and compares the growth of those
//! determinants against limit constants of Szegő–Widom type computed
//! independently from truncated operator determinants. Window endpoints
//! are steered along fractal (phase-converging) integer sequences built
//! from continued fraction denominators, so the classical "ratio of
//! determinants" limits exist even though the diagonals never repeat.
//!
//! Module map:
//! * [`group`]: frequency groups, characters, weights and their audits.
//! * [`apseq`]: almost periodic sequences, window sums, the boundary
//!   functional `F_a`.
//! * [`apop`]: the twisted band-operator algebra (finite sums of
//!   `(a I) U_k`), exponentials and logarithms inside it.
//! * [`linalg`]: dense complex sections, LU determinants, matrix
//!   exponentials.
//! * [`fractal`]: continued fractions, fractal subsequences, certificates.
//! * [`limits`]: growth constant, theta constants via truncation ladders,
//!   determinant ratio flows.
//! * [`models`]: block Laurent symbols and almost Mathieu operators.

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod apop;
pub mod apseq;
pub mod fractal;
pub mod group;
pub mod limits;
pub mod linalg;
pub mod models;
pub mod phase;
