pub mod oracle;
pub mod scenarios;
