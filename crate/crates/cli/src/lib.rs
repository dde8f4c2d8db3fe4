pub mod checks;
pub mod corpus;
pub mod descriptor;
pub mod run;
pub mod scenario;
