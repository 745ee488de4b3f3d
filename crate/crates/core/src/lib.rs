//! Easy-first dependency parsing with tree-LSTM structure encodings.

pub mod cli;
pub mod config;
pub mod easyfirst;
pub mod eval;
#[doc(hidden)]
pub mod gradcheck;
pub mod layers;
pub mod oracle;
pub mod repr;
pub mod synthetic;
pub mod tensor;
pub mod train;
pub mod treebank;
