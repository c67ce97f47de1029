pub mod agent;
pub mod elm;
pub mod error;
pub mod fft;
pub mod geom;
pub mod io;
pub mod metrics;
pub mod optim;
pub mod rl;
pub mod retina;
pub mod snn;
pub mod stimulus;
pub mod trial;
pub mod visibility;

pub use error::{Error, Result};
pub use geom::Vec2;
