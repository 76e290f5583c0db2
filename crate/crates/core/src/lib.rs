pub mod ast;
pub mod names;
pub mod parser;
pub mod value;
pub mod eval;
pub mod calculus;
pub mod search;
pub mod po;
pub mod compile;
pub mod pattern;
pub mod soundness;
