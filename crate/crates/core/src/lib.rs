//! Entropy-feature EEG classification: band-pass filtering and segmentation,
//! db4 band decomposition, seven entropy estimators, an RBF support vector
//! classifier with a two-stage repeated stratified K-fold protocol, and the
//! studies built on top of them (per-band, per-channel, per-feature,
//! greedy selection, segment length, timing, monitoring).

pub mod entropy;
pub mod experiments;
pub mod features;
pub mod signal;
pub mod svc;
pub mod wavelet;

pub use entropy::{EntropyConfig, EntropyError, EntropyMethod};
pub use features::{FeatureKey, FeatureMatrix};
pub use signal::{Channel, EegRecord, Label, Segment};
pub use svc::{CvProtocol, CvReport, SvcModel, SvcParams};
pub use wavelet::SignalVariant;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
