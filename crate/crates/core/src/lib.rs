//! Energy-minimal rate and time allocation for K-user TDMA over block-fading channels.
//!
//! Everything inside the library is normalized to unit bandwidth and unit noise
//! power, so rates are in bits/s/Hz and powers are noise-normalized received
//! powers. Physical units only appear in the command-line front end.

pub mod amc;
pub mod channel;
pub mod costreward;
pub mod error;
pub mod experiments;
pub mod indiv;
pub mod numeric;
pub mod quad;
pub mod wsum;

#[doc(hidden)]
pub mod cli;

pub use channel::{ChannelModel, Fading, FadingState, SampleSet};
pub use costreward::{AmcTable, Codebook, Envelope, Mode, UserProfile};
pub use error::{Error, Result};
pub use wsum::{Allocation, Share};
