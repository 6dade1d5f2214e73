//! Software model of a 10 MHz IEEE 802.11p receiver chain (QPSK, rate-1/2
//! convolutional code, LS preamble channel estimation) used to label channel
//! regions with their frame error rate.

pub mod ber;
pub mod coding;
pub mod config;
pub mod error;
pub mod link;
pub mod ofdm;

pub use ber::{uncoded_qpsk_ber, BerPoint};
pub use coding::{conv_encode, viterbi_decode};
pub use config::PhyConfig;
pub use error::{Error, Result};
pub use link::{frame_outcomes, measure_fer, simulate_frame, FerMeasurement, LinkSimulator};
