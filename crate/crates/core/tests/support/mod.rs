#![allow(dead_code)]

pub mod metric_oracle;
pub mod scenarios;
pub mod grammar;
