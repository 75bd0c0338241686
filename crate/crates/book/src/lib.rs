//! Doc-test harness for the guide in `book/`. Each chapter is included as
//! the documentation of an empty module so `cargo test` runs its snippets.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/decision-sets.md")]
pub mod decision_sets {}

#[doc = include_str!("../../../book/src/bandit-feedback.md")]
pub mod bandit_feedback {}

#[doc = include_str!("../../../book/src/projection-free.md")]
pub mod projection_free {}

#[doc = include_str!("../../../book/src/boosting.md")]
pub mod boosting {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
