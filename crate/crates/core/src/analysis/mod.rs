//! Diagnostics: weighted norms, rays, virial rates and drift reports.

pub mod norms;
pub mod rays;
pub mod virial;
