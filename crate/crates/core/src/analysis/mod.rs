//! Numerical checks of the quantitative statements about the intermittent
//! map and of the local consequences of hyperbolic times.

pub mod lemma51;
pub mod local;
pub mod quadrature;
pub mod recurrence;
pub mod tail;

pub use lemma51::{lemma51_sweep, lemma51_verify, recurrence_sequence, Lemma51Report, RecurrenceSequence};
pub use local::{contraction_check, distortion_check, ContractionReport, DistortionReport, DEFAULT_ARC_RADIUS};
pub use quadrature::{log_dist_moment, lyapunov_integral, LyapunovEstimate, LyapunovMethod, Truncation};
pub use recurrence::{birkhoff_negativity, slow_recurrence_profile, BirkhoffReport, SlowRecurrenceProfile};
pub use tail::{tail_report, TailReport};
