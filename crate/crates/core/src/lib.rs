pub mod bits;
pub mod bucket_hash;
pub mod codec;
pub mod error;
pub mod external;
pub mod function;
pub mod gf2_hash;
pub mod internal;
pub mod keys;
pub mod rank;

pub use error::{Error, Result};
pub use external::{build, build_standalone, BuildConfig, BuildOutput, BuildStats};
pub use function::{Hasher, Layout, PerfectHashFunction};
pub use gf2_hash::{Fingerprint128, HashProviderMode};
pub use internal::{Epsilon, Mode};
pub use keys::{KeyFile, KeySource, RandomKeys};
