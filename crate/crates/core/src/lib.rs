pub mod chain;
pub mod corpus;
pub mod eval;
pub mod extract;
pub mod insertion;
pub mod lm;
pub mod pipeline;
