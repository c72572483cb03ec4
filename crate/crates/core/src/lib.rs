pub mod chem;
pub mod geometry;
pub mod oracle;
pub mod plugin;
pub mod seed;
pub mod archive;
pub mod hull;
pub mod policy;
pub mod campaign;
pub mod env;
pub mod io;
pub mod metrics;
