use crate::context::{Failure, Overrides, Verdict};

pub mod compose;
pub mod extend;
pub mod l2bound;
pub mod periodise;
pub mod solve;
pub mod taylor;

pub type Runner = fn(&Overrides) -> Result<Verdict, Failure>;
