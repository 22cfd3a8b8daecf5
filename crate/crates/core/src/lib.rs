//! Validation of lexical meronymy relations against a first-order upper
//! ontology through competency questions and automated theorem proving.

pub mod atp;
pub mod corpus;
pub mod cqgen;
pub mod evaluator;
pub mod kif;
pub mod logic;
pub mod mapping;
pub mod ontology;
pub mod pipeline;
pub mod service;
