pub mod checks;
pub mod corpus;
