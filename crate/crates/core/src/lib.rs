//! Robust class-incremental learning with task-aware boundary augmentation.
//!
//! This crate is the allocation-only (`no_std` + `alloc`) core: a small
//! reverse-mode autodiff engine, MLP classifiers with an expandable head,
//! the robust continual-learning objectives, an L∞ PGD adversary, exemplar
//! memory with herding, boundary augmentation, task-stream construction and
//! the stage-by-stage training harness.
//!
//! File formats, dataset ingestion, reports and the command-line tool live in
//! the std companion crate `taba`.
//!
//! All randomness flows through [`Rng`], a seeded ChaCha8 stream; no
//! operation reads ambient entropy.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;

pub mod adversary;
pub mod augment;
pub mod harness;
pub mod losses;
pub mod memory;
pub mod nets;
pub mod taskstream;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Rng, Tape, Tensor, Var};
