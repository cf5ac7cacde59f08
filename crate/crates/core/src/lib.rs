//! Periodic homogenization of fully nonlinear elliptic equations
//! `F(D^2 u, x / epsilon) = f` with monotone finite differences.
//!
//! The crate is organized bottom-up: grids and stencil data ([`grid`],
//! [`stencil`], [`matrix`]), periodic operators ([`operator`]), the monotone
//! solver ([`solver`]), cell problems and effective operators ([`cell`]),
//! boundary-layer correctors ([`blayer`]) and the experiment bench
//! ([`bench`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod blayer;
pub mod cell;
pub mod grid;
pub mod matrix;
pub mod operator;
pub mod solver;
pub mod stencil;

pub use cell::{solve_cell, CellMethod, CellOptions, CellSolution};
pub use grid::{BoxGrid, Grid, GridFunction, Point, TorusGrid};
pub use matrix::SymMatrix;
pub use operator::{Operator, OperatorSpec};
pub use solver::{solve_dirichlet, DirichletProblem, SolveReport};
pub use stencil::SecondDiffs;
