mod degrade;
mod diagnose;
mod eval;
mod restore;
mod train;

pub use degrade::degrade;
pub use diagnose::diagnose;
pub use eval::eval;
pub use restore::restore;
pub use train::train;
