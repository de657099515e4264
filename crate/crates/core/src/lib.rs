//! Direct tracts of transcendental entire functions: level-set tracing,
//! annulus-covering certificates, harmonic-measure estimates and finite-depth
//! slowly escaping orbits.

pub mod catalog;
pub mod complexfn;
pub mod covering;
pub mod error;
pub mod geom;
pub mod hp;
pub mod metrics;
pub mod orbit;
pub mod rate;
pub mod render;
pub mod tract;

pub use complexfn::{FnKind, FunctionSpec, LogValue, Magnitude};
pub use error::{CoverError, FnError, MetricsError, OrbitError, RateError, TractError};
pub use geom::{Polygon, Window};
pub use hp::BigComplex;
pub use tract::{LevelCurve, TractRegion};
