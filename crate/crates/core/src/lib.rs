//! Privacy accounting for interactive mechanisms: concurrent composition,
//! privacy filters and odometers, with an exhaustive verification oracle for
//! finite instances.

pub mod accountants;
pub mod composition;
pub mod measures;
pub mod mechanisms;
pub mod oracle;
pub mod protocol;
pub mod strategy;
