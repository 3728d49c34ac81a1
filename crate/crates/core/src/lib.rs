pub mod derivation;
pub mod grammar;
pub mod harness;
pub mod intern;
pub mod machine;
pub mod memory;
pub mod problems;
pub mod search;
